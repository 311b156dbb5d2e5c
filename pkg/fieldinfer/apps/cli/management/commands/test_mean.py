"""
test: simultaneous test of H0: mu = mu0 at the grid positions.
"""
from apps.bootstrap.serializers import VerdictSerializer, render_json, verdict_payload
from apps.bootstrap.services import run_lwmb, test_mean
from apps.cli.base import (
    FieldInferCommand,
    add_inference_arguments,
    add_output_argument,
    bootstrap_manifest_config,
    bootstrap_setup,
    load_input,
)
from apps.cli.models import CommandName

ZERO_NULL = 'zero'


def zero_null(x, y):
    return 0.0


class Command(FieldInferCommand):
    help = "Test the mean field against a null: 'zero' or a grid CSV"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        add_inference_arguments(parser)
        parser.add_argument(
            '--null', default=ZERO_NULL,
            help="'zero', or a CSV holding an n x m lattice, a gv x gv grid or V values (default: zero)",
        )
        add_output_argument(parser)

    def run(self, started, **options):
        inputs = [options['input']]
        if options['null'] == ZERO_NULL:
            mu0 = zero_null
        else:
            mu0 = load_input(options['null']).values
            inputs.append(options['null'])

        field, grid, cfg, auto = bootstrap_setup(options)
        result = run_lwmb(field, grid, cfg, threads=options['threads'])
        verdict = test_mean(result, mu0)
        self.emit(render_json(VerdictSerializer(verdict_payload(verdict)).data), options['output'])

        config = bootstrap_manifest_config(cfg, options)
        config['null'] = str(options['null'])
        self.record(
            CommandName.TEST,
            config=config,
            seeds={'seed': cfg.seed},
            output_path=options['output'],
            manifest_path=options['manifest'],
            inputs=inputs,
            wall_clock_seconds=self.elapsed(started),
            auto_bandwidth=auto,
        )
