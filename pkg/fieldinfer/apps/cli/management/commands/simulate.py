"""
simulate: write a seeded mean-plus-noise dataset as a grid CSV.
"""
from apps.cli.base import FieldInferCommand, add_output_argument
from apps.cli.models import CommandName
from apps.grid.services import save_grid_csv
from apps.simulate.services import MeanField, MeanFieldKind, NoiseKind, simulate_dataset


class Command(FieldInferCommand):
    help = 'Simulate a dataset X = mu(i/n, j/m) + noise'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--mean', choices=MeanFieldKind.values, default=MeanFieldKind.ZERO, help='Mean field')
        parser.add_argument('--noise', choices=NoiseKind.values, default=NoiseKind.AR2D, help='Noise field')
        parser.add_argument('-n', type=int, default=200, help='Rows (default: 200)')
        parser.add_argument('-m', type=int, default=200, help='Columns (default: 200)')
        parser.add_argument('--seed', type=int, default=0, help='Master seed (default: 0)')
        parser.add_argument('--height', type=float, default=0.3, help='Disc height (default: 0.3)')
        parser.add_argument('--radius', type=float, default=0.1, help='Disc radius (default: 0.1)')
        parser.add_argument(
            '--center', type=float, nargs=2, default=(0.5, 0.5), metavar=('X', 'Y'),
            help='Disc center (default: 0.5 0.5)',
        )
        parser.add_argument('--noise-scale', type=float, default=1.0, help='Noise multiplier (default: 1)')
        add_output_argument(parser, required=True)

    def run(self, started, **options):
        mean = MeanField(options['mean'], options['height'], options['radius'], tuple(options['center']))
        data = simulate_dataset(
            mean, options['noise'], options['n'], options['m'], options['seed'], noise_scale=options['noise_scale']
        )
        save_grid_csv(data, options['output'])
        self.record(
            CommandName.SIMULATE,
            config={
                'mean': mean.kind.value,
                'height': mean.height,
                'radius': mean.radius,
                'center': list(mean.center),
                'noise': NoiseKind(options['noise']).value,
                'n': options['n'],
                'm': options['m'],
                'noise_scale': options['noise_scale'],
            },
            seeds={'seed': options['seed']},
            output_path=options['output'],
            manifest_path=options['manifest'],
            wall_clock_seconds=self.elapsed(started),
        )
