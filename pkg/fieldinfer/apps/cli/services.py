"""
Run manifests: checksums, versions and persistence.
"""
import hashlib
import logging
from pathlib import Path

import django
import numpy as np
import scipy
from django.conf import settings
from django.db import DatabaseError

from apps.bootstrap.serializers import render_json
from apps.cli.models import RunManifest
from apps.cli.serializers import RunManifestSerializer
from apps.grid.exceptions import GridIOError

logger = logging.getLogger(__name__)

CHUNK_SIZE = 1 << 16


def file_checksum(path):
    """SHA-256 hex digest of a file."""
    digest = hashlib.sha256()
    try:
        with open(path, 'rb') as handle:
            for chunk in iter(lambda: handle.read(CHUNK_SIZE), b''):
                digest.update(chunk)
    except OSError as e:
        raise GridIOError(f"cannot read {path}: {e}") from e
    return digest.hexdigest()


def library_versions():
    """Versions recorded with every run."""
    from fieldinfer import __version__

    return {
        'fieldinfer': __version__,
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'django': django.get_version(),
    }


def manifest_json(manifest):
    """Rendered JSON bytes of a manifest."""
    return render_json(RunManifestSerializer(manifest).data)


def record_run(
    command, config, seeds, output_path, inputs=(), wall_clock_seconds=0.0, auto_bandwidth=False, manifest_path=None
):
    """
    Build, persist and write the manifest of a finished run.

    The row is saved when FIELDINFER_RECORD_RUNS is set; a database failure
    only logs a warning. The JSON manifest goes to manifest_path when given,
    otherwise next to the output file; stdout runs without manifest_path
    write no file.

    Args:
        command: CommandName value
        config: resolved configuration dict
        seeds: dict of master seeds
        output_path: result file, or None when the result went to stdout
        inputs: input file paths to checksum
        wall_clock_seconds: elapsed time
        auto_bandwidth: whether K or B was selected from the data
        manifest_path: explicit manifest file

    Returns:
        RunManifest
    """
    manifest = RunManifest(
        command=command,
        config=config,
        seeds=seeds,
        versions=library_versions(),
        wall_clock_seconds=float(wall_clock_seconds),
        input_checksums={str(path): file_checksum(path) for path in inputs},
        output_path=str(output_path) if output_path else '',
        auto_bandwidth=bool(auto_bandwidth),
    )
    if getattr(settings, 'FIELDINFER_RECORD_RUNS', True):
        try:
            manifest.save()
        except DatabaseError as e:
            logger.warning(f"Run manifest for {command} not stored: {e}")

    target = manifest_path or manifest.manifest_path
    if target:
        try:
            Path(target).write_bytes(manifest_json(manifest))
        except OSError as e:
            raise GridIOError(f"cannot write manifest {target}: {e}") from e
        logger.debug(f"Wrote manifest {target}")
    return manifest
