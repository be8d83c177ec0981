from checkins.management.base import PipelineCommand


class Command(PipelineCommand):
    help = 'Rank users by monthly difference value and assign each to one feature model'
    stages = ('applicability',)
