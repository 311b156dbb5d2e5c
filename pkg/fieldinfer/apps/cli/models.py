"""
Run manifest models for fieldinfer commands.
"""
from django.db import models
from django.utils import timezone


class CommandName(models.TextChoices):
    """Command choices."""
    ESTIMATE = 'estimate', 'Estimate mean surface'
    CI = 'ci', 'Simultaneous confidence region'
    TEST = 'test', 'Simultaneous mean test'
    SELECT_BANDWIDTH = 'select-bandwidth', 'Bandwidth selection'
    SIMULATE = 'simulate', 'Simulate dataset'
    STUDY = 'study', 'Monte-Carlo study'


class RunManifest(models.Model):
    """
    Record of one command run, written next to its output.

    Attributes:
        command: CommandName that produced the output
        config: fully resolved configuration
        seeds: master seeds used by the run
        versions: fieldinfer, numpy, scipy and django versions
        wall_clock_seconds: elapsed time of the run
        input_checksums: SHA-256 of every input file, keyed by path
        output_path: result file, empty when written to stdout
        auto_bandwidth: whether K or B was selected from the data
        created_at: Record creation timestamp
    """
    command = models.CharField(
        max_length=20,
        choices=CommandName.choices,
        help_text="Command that produced the output"
    )
    config = models.JSONField(
        default=dict,
        help_text="Fully resolved configuration"
    )
    seeds = models.JSONField(
        default=dict,
        blank=True,
        help_text="Master seeds used by the run"
    )
    versions = models.JSONField(
        default=dict,
        help_text="Library versions"
    )
    wall_clock_seconds = models.FloatField(
        default=0.0,
        help_text="Elapsed time of the run in seconds"
    )
    input_checksums = models.JSONField(
        default=dict,
        blank=True,
        help_text="SHA-256 of every input file"
    )
    output_path = models.CharField(
        max_length=500,
        blank=True,
        help_text="Result file"
    )
    auto_bandwidth = models.BooleanField(
        default=False,
        help_text="Whether a bandwidth was selected from the data"
    )
    created_at = models.DateTimeField(default=timezone.now)

    class Meta:
        db_table = 'run_manifests'
        verbose_name = 'Run Manifest'
        verbose_name_plural = 'Run Manifests'
        ordering = ['-created_at']
        indexes = [
            models.Index(fields=['command'], name='run_manifests_command_idx'),
        ]

    def __str__(self):
        return f"{self.command} -> {self.output_path or 'stdout'}"

    @property
    def manifest_path(self):
        """Path of the JSON manifest next to the output, or None for stdout runs."""
        return f"{self.output_path}.manifest.json" if self.output_path else None
