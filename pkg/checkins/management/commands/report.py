from django.core.management.base import CommandError

from checkins.config import load_config
from checkins.dimensions import CANONICAL_PAIRS
from checkins.exceptions import PipelineError
from checkins.management.base import PipelineCommand
from checkins.pipeline import summarize_assignments
from checkins.reports import convert_reports


class Command(PipelineCommand):
    help = 'Re-emit every report of the output directory in one format and print the assignment summary'

    def handle(self, *args, **options):
        overrides = self.overrides(options)
        fmt = overrides.get('report_format') or 'csv'
        try:
            config = load_config(options.get('config'), overrides)
            written = convert_reports(config.output_path, fmt)
            summary = summarize_assignments(config.output_path)
        except PipelineError as exc:
            raise CommandError(f'[REPORT] {exc}') from exc

        for path in written:
            self.stdout.write(f'[REPORT] wrote {path}')
        if summary is None:
            self.stdout.write(self.style.WARNING('[REPORT] no applicability summary yet'))
            return

        self.stdout.write(self.style.MIGRATE_HEADING('[REPORT] users per feature model'))
        for pair in CANONICAL_PAIRS:
            count = summary.get(pair.key)
            self.stdout.write(f'[REPORT]   {pair.key:<14} {"-" if count is None else count}')
        self.stdout.write(f'[REPORT]   {"total":<14} {summary["users"]}')
