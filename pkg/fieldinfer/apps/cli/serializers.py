"""
Serializers for cli app.
"""
from rest_framework import serializers

from apps.cli.models import RunManifest


class RunManifestSerializer(serializers.ModelSerializer):
    """Serializer for RunManifest model."""

    command_display = serializers.CharField(source='get_command_display', read_only=True)

    class Meta:
        model = RunManifest
        fields = [
            'id', 'command', 'command_display', 'config', 'seeds', 'versions',
            'wall_clock_seconds', 'input_checksums', 'output_path',
            'auto_bandwidth', 'created_at'
        ]
        read_only_fields = ['id', 'created_at']
