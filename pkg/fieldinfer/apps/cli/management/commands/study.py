"""
study: Monte-Carlo coverage or size/power table.
"""
import json
import logging

from apps.cli.base import FieldInferCommand, add_output_argument, require_input
from apps.cli.models import CommandName
from apps.grid.exceptions import ConfigError
from apps.simulate.serializers import StudyConfigSerializer
from apps.simulate.studies import StudyKind, coverage_study, size_power_study, write_study_csv

logger = logging.getLogger(__name__)


def load_study_config(path):
    """StudyConfig from a validated study.json."""
    try:
        with open(require_input(path), encoding='utf-8') as handle:
            data = json.load(handle)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not JSON: {e}") from e
    serializer = StudyConfigSerializer(data=data)
    if not serializer.is_valid():
        raise ConfigError(f"invalid study config {path}: {serializer.errors}")
    return serializer.save()


class Command(FieldInferCommand):
    help = 'Run a Monte-Carlo coverage or size/power study'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('kind', choices=StudyKind.values, help='Study kind')
        parser.add_argument('--config', required=True, help='study.json')
        add_output_argument(parser, required=True)

    def run(self, started, **options):
        cfg = load_study_config(options['config'])
        if options['kind'] == StudyKind.COVERAGE:
            result = coverage_study(cfg)
        else:
            result = size_power_study(cfg)
        write_study_csv(result, options['output'])
        self.record(
            CommandName.STUDY,
            config={'kind': options['kind'], 'study': cfg.to_dict(), 'sims': result.sims},
            seeds={'seed': cfg.seed},
            output_path=options['output'],
            manifest_path=options['manifest'],
            inputs=[options['config']],
            wall_clock_seconds=self.elapsed(started),
            auto_bandwidth=cfg.k is None or cfg.b is None,
        )
