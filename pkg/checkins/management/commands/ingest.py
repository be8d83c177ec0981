from checkins.management.base import PipelineCommand


class Command(PipelineCommand):
    help = 'Load a check-in file and its category hierarchy into the database'
    stages = ('ingest',)
