"""Shared plumbing for the pipeline management commands."""
from django.core.management.base import BaseCommand, CommandError

from ..config import load_config
from ..exceptions import PipelineError, StageError
from ..pipeline import Pipeline


def _flag(value):
    return True if value else None


class PipelineCommand(BaseCommand):
    """A command that loads the run configuration and runs one or more stages.

    Flags left unset fall through to the config file, then to the
    `LBSN_PIPELINE` defaults.
    """
    stages: tuple[str, ...] = ()

    def add_arguments(self, parser):
        parser.add_argument('--config', help='flat key = value configuration file')
        parser.add_argument('--seed', type=int)
        parser.add_argument('--out-dir', dest='out_dir')
        parser.add_argument('--normalize-monthly', dest='normalize_monthly', action='store_true',
                            help='L1-normalize monthly matrices before differencing')
        parser.add_argument('--delta', type=float, help='gain ratio threshold for influence selection')
        parser.add_argument('--target-view', dest='target_view', choices=('root', 'leaf'))
        parser.add_argument('--k', help='comma separated K values, e.g. 1,5,10')
        parser.add_argument('--dataset', help='check-in file to ingest')
        parser.add_argument('--categories', help='leaf to root category mapping (csv)')
        parser.add_argument('--category-labels', dest='category_labels', help='category id to name mapping (csv)')
        parser.add_argument('--dataset-name', dest='dataset_name')
        parser.add_argument('--format', dest='report_format', choices=('csv', 'json'))

    def overrides(self, options) -> dict:
        keys = ('seed', 'out_dir', 'delta', 'target_view', 'k', 'dataset', 'categories', 'category_labels',
                'dataset_name', 'report_format')
        values = {key: options.get(key) for key in keys}
        values['normalize_monthly'] = _flag(options.get('normalize_monthly'))
        return values

    def say(self, stage: str, message: str):
        tag = f'[{stage.upper()}]'
        if message.startswith('running'):
            self.stdout.write(self.style.MIGRATE_HEADING(f'{tag} {message}'))
        else:
            self.stdout.write(f'{tag} {message}')

    def run_stages(self, options, stages):
        try:
            config = load_config(options.get('config'), self.overrides(options))
            pipeline = Pipeline(config, notify=self.say)
            outcomes = pipeline.run(stages)
        except StageError as exc:
            raise CommandError(f'[{exc.stage.upper()}] {exc.cause}') from exc
        except PipelineError as exc:
            raise CommandError(str(exc)) from exc
        for outcome in outcomes:
            details = ', '.join(f'{key}={value}' for key, value in outcome.summary.items())
            self.stdout.write(self.style.SUCCESS(f'[{outcome.stage.upper()}] done {details}'.rstrip()))
        return outcomes

    def handle(self, *args, **options):
        self.run_stages(options, self.stages)
