"""
estimate: interior Nadaraya-Watson mean surface of a grid.
"""
import io
import logging

import numpy as np

from apps.bandwidth.services import CvConfig, cv_select_k
from apps.cli.base import FieldInferCommand, add_output_argument, load_input
from apps.cli.models import CommandName
from apps.kernels.services import SMOOTHING_KERNELS, get_smoothing_kernel
from apps.smoother.services import SmootherConfig, nw_surface

logger = logging.getLogger(__name__)


class Command(FieldInferCommand):
    help = 'Estimate the mean surface over the interior lattice'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--input', required=True, help='Grid CSV')
        parser.add_argument('--k', type=int, default=None, help='Smoothing bandwidth (default: cross-validation)')
        parser.add_argument('--k-max', type=int, default=20, help='Largest K candidate (default: 20)')
        parser.add_argument(
            '--kernel-g', choices=list(SMOOTHING_KERNELS), default='quartic',
            help='Smoothing kernel G (default: quartic)',
        )
        add_output_argument(parser)

    def run(self, started, **options):
        field = load_input(options['input'])
        g = get_smoothing_kernel(options['kernel_g'])
        k = options['k']
        auto = k is None
        if auto:
            k = cv_select_k(field, CvConfig(options['k_max'], g), threads=options['threads']).k_best
        surface = nw_surface(field, SmootherConfig(k, g))

        buffer = io.StringIO()
        np.savetxt(buffer, surface.values, delimiter=',', fmt='%.17g')
        self.emit(buffer.getvalue().encode('utf-8'), options['output'])
        self.record(
            CommandName.ESTIMATE,
            config={'input': str(options['input']), 'k': int(k), 'kernel_g': g.name, 'k_max': options['k_max']},
            seeds={},
            output_path=options['output'],
            manifest_path=options['manifest'],
            inputs=[options['input']],
            wall_clock_seconds=self.elapsed(started),
            auto_bandwidth=auto,
        )
