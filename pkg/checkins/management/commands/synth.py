from django.core.management.base import BaseCommand, CommandError

from checkins.dimensions import CANONICAL_PAIRS
from checkins.exceptions import PipelineError
from checkins.synthetic import SynthSpec, generate_synthetic, write_synthetic


class Command(BaseCommand):
    help = 'Generate a synthetic cohort with planted regularities, one group per feature model'

    def add_arguments(self, parser):
        parser.add_argument('--users', type=int, default=400)
        parser.add_argument('--months', type=int, default=6)
        parser.add_argument('--noise', type=float, default=0.1)
        parser.add_argument('--seed', type=int, default=7)
        parser.add_argument('--output', required=True, help='directory for the generated files')

    def handle(self, *args, **options):
        spec = SynthSpec.balanced(options['users'], options['months'], options['noise'], options['seed'])
        try:
            dataset = generate_synthetic(spec)
            paths = write_synthetic(dataset, options['output'])
        except (PipelineError, OSError) as exc:
            raise CommandError(f'[SYNTH] {exc}') from exc

        self.stdout.write(f'[SYNTH] {spec.user_count} users, {spec.months} months, '
                          f'{dataset.checkin_count} check-ins (seed {spec.seed})')
        for group in spec.groups:
            self.stdout.write(f'[SYNTH]   {group.pair.key}: {group.size} users, noise {group.noise}')
        for path in paths.values():
            self.stdout.write(f'[SYNTH] wrote {path}')
        self.stdout.write(self.style.SUCCESS(f'[SYNTH] planted {len(CANONICAL_PAIRS)} groups'))
