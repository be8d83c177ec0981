from checkins.management.base import PipelineCommand


class Command(PipelineCommand):
    help = 'Build per-user feature matrices for the train, validation and test splits'
    stages = ('features',)
