"""
ci: simultaneous confidence region by the locally weighted multiplier bootstrap.
"""
from apps.bootstrap.serializers import dump_result
from apps.bootstrap.services import run_lwmb
from apps.cli.base import (
    FieldInferCommand,
    add_inference_arguments,
    add_output_argument,
    bootstrap_manifest_config,
    bootstrap_setup,
)
from apps.cli.models import CommandName


class Command(FieldInferCommand):
    help = 'Simultaneous confidence region for the mean at grid positions'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        add_inference_arguments(parser)
        add_output_argument(parser)

    def run(self, started, **options):
        field, grid, cfg, auto = bootstrap_setup(options)
        result = run_lwmb(field, grid, cfg, threads=options['threads'])
        self.emit(dump_result(result), options['output'])
        self.record(
            CommandName.CI,
            config=bootstrap_manifest_config(cfg, options),
            seeds={'seed': cfg.seed},
            output_path=options['output'],
            manifest_path=options['manifest'],
            inputs=[options['input']],
            wall_clock_seconds=self.elapsed(started),
            auto_bandwidth=auto,
        )
