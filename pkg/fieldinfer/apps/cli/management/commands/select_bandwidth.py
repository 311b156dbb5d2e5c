"""
select-bandwidth: cross-validated K and block-subsampled B.
"""
from apps.bandwidth.serializers import BandwidthSelectionSerializer, selection_payload
from apps.bandwidth.services import CvConfig, cv_select_k, select_variance_bandwidth
from apps.bootstrap.serializers import render_json
from apps.cli.base import (
    FieldInferCommand,
    add_kernel_arguments,
    add_output_argument,
    add_selector_arguments,
    load_input,
    vb_config,
)
from apps.cli.models import CommandName
from apps.kernels.services import get_smoothing_kernel


class Command(FieldInferCommand):
    help = 'Select the smoothing and variance bandwidths from the data'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--input', required=True, help='Grid CSV')
        parser.add_argument('--seed', type=int, default=0, help='Master seed (default: 0)')
        add_selector_arguments(parser)
        add_kernel_arguments(parser)
        add_output_argument(parser)

    def run(self, started, **options):
        field = load_input(options['input'])
        g = get_smoothing_kernel(options['kernel_g'])
        cv = cv_select_k(field, CvConfig(options['k_max'], g), threads=options['threads'])
        vb_cfg = vb_config(options)
        vb = select_variance_bandwidth(field, cv.k_best, vb_cfg, smoothing_kernel=g, threads=options['threads'])
        self.emit(render_json(BandwidthSelectionSerializer(selection_payload(cv, vb)).data), options['output'])
        self.record(
            CommandName.SELECT_BANDWIDTH,
            config={
                'input': str(options['input']),
                'k_max': options['k_max'],
                'q': vb_cfg.q,
                'gamma': list(vb_cfg.gamma),
                'iterations': vb_cfg.iterations,
                'pilot': vb_cfg.pilot,
                'reps': vb_cfg.reps,
                'kernel_g': g.name,
                'kernel_k': vb_cfg.kernel.name,
                'sqrt': vb_cfg.sqrt_mode.value,
            },
            seeds={'seed': vb_cfg.seed},
            output_path=options['output'],
            manifest_path=options['manifest'],
            inputs=[options['input']],
            wall_clock_seconds=self.elapsed(started),
            auto_bandwidth=True,
        )
