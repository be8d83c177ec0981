from checkins.management.base import PipelineCommand


class Command(PipelineCommand):
    help = 'Score context to view influence with entropy, gain and gain ratio'
    stages = ('influence',)
