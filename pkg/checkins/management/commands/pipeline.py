from checkins.management.base import PipelineCommand
from checkins.pipeline import STAGES


class Command(PipelineCommand):
    help = 'Run a subset of the stages in pipeline order (all of them by default)'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--stages', default=','.join(STAGES),
                            help=f'comma separated subset of {", ".join(STAGES)}')
        parser.add_argument('--epochs', type=int)

    def overrides(self, options):
        values = super().overrides(options)
        values['epochs'] = options.get('epochs')
        return values

    def handle(self, *args, **options):
        stages = [stage.strip() for stage in options['stages'].split(',') if stage.strip()]
        self.run_stages(options, stages)
