from checkins.management.base import PipelineCommand


class Command(PipelineCommand):
    help = 'Score the model, baselines and applicability cohorts on the test split'
    stages = ('evaluate',)
