"""
Factories for cli app.
"""
import factory

from apps.cli.models import CommandName, RunManifest


class RunManifestFactory(factory.django.DjangoModelFactory):
    """Factory for RunManifest rows."""

    class Meta:
        model = RunManifest

    command = CommandName.CI
    config = factory.LazyFunction(lambda: {'alpha': 0.05, 'mode': 'homogeneous', 'k': 10, 'b': 2.0})
    seeds = factory.Sequence(lambda n: {'seed': n})
    versions = factory.LazyFunction(lambda: {'fieldinfer': '0.1.0'})
    wall_clock_seconds = 1.5
    input_checksums = factory.LazyFunction(dict)
    output_path = factory.Sequence(lambda n: f"results/run-{n}.json")
    auto_bandwidth = False
