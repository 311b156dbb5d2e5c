"""
Serializers for bootstrap app.
"""
import json

from rest_framework import serializers
from rest_framework.renderers import JSONRenderer

from apps.grid.exceptions import FormatError, GridIOError
from apps.hac.services import BootstrapMode

RESULT_SCHEMA = 'lwmb-result/1'


class PositionSerializer(serializers.Serializer):
    """Serializer for one target position."""

    x = serializers.FloatField(min_value=0.0, max_value=1.0)
    y = serializers.FloatField(min_value=0.0, max_value=1.0)
    p = serializers.IntegerField(min_value=1)
    q = serializers.IntegerField(min_value=1)


class VerdictSerializer(serializers.Serializer):
    """Serializer for a simultaneous mean test outcome."""

    statistic = serializers.FloatField(min_value=0.0)
    c_quantile = serializers.FloatField(min_value=0.0)
    reject = serializers.BooleanField()
    flags = serializers.ListField(child=serializers.BooleanField())
    flagged = serializers.ListField(child=serializers.IntegerField(min_value=0))
    flagged_positions = PositionSerializer(many=True, required=False)

    def validate(self, data):
        """Check flagged indices and positions agree with the flags."""
        expected = [v for v, flag in enumerate(data['flags']) if flag]
        if data['flagged'] != expected:
            raise serializers.ValidationError("flagged indices do not match the flags")
        positions = data.get('flagged_positions')
        if positions is not None and len(positions) != len(expected):
            raise serializers.ValidationError(
                f"{len(positions)} flagged positions listed for {len(expected)} flagged indices"
            )
        if data['reject'] != (data['statistic'] > data['c_quantile']):
            raise serializers.ValidationError("reject must equal statistic > c_quantile")
        return data


class BootstrapResultSerializer(serializers.Serializer):
    """Serializer for the lwmb-result/1 document."""

    schema = serializers.CharField()
    alpha = serializers.FloatField(min_value=0.0, max_value=1.0)
    mode = serializers.ChoiceField(choices=BootstrapMode.choices)
    k = serializers.IntegerField(min_value=1)
    b = serializers.FloatField(min_value=0.0)
    reps = serializers.IntegerField(min_value=1)
    seed = serializers.IntegerField(min_value=0)
    kernel_g = serializers.CharField()
    kernel_k = serializers.CharField()
    t_nm = serializers.FloatField()
    b_nm = serializers.FloatField()
    c_quantile = serializers.FloatField(min_value=0.0)
    positions = PositionSerializer(many=True)
    estimates = serializers.ListField(child=serializers.FloatField())
    half_widths = serializers.ListField(child=serializers.FloatField(min_value=0.0))
    tau = serializers.ListField(child=serializers.FloatField(min_value=0.0))
    sigma = serializers.ListField(child=serializers.FloatField(min_value=0.0))
    negative_variance = serializers.ListField(child=serializers.BooleanField())
    verdict = VerdictSerializer(allow_null=True)

    def validate_schema(self, value):
        """Only the current schema version is accepted."""
        if value != RESULT_SCHEMA:
            raise serializers.ValidationError(f"unsupported schema {value!r}")
        return value

    def validate(self, data):
        """Check per-position arrays have one entry per position."""
        count = len(data['positions'])
        for name in ('estimates', 'half_widths', 'tau', 'negative_variance'):
            if len(data[name]) != count:
                raise serializers.ValidationError(f"{name} has {len(data[name])} entries, expected {count}")
        if data['sigma'] and len(data['sigma']) != count:
            raise serializers.ValidationError(f"sigma has {len(data['sigma'])} entries, expected {count}")
        if data['verdict'] and len(data['verdict']['flags']) != count:
            raise serializers.ValidationError("verdict flags do not match the positions")
        return data


def position_payload(pos):
    return {'x': pos.x, 'y': pos.y, 'p': pos.p, 'q': pos.q}


def verdict_payload(verdict):
    """Plain dict for a Verdict."""
    return {
        'statistic': verdict.statistic,
        'c_quantile': verdict.c_quantile,
        'reject': verdict.reject,
        'flags': list(verdict.flags),
        'flagged': verdict.flagged,
        'flagged_positions': [position_payload(pos) for pos in verdict.flagged_positions],
    }


def result_payload(result):
    """Plain dict for a BootstrapResult in the lwmb-result/1 layout."""
    cfg = result.config
    est = result.estimates
    return {
        'schema': RESULT_SCHEMA,
        'alpha': cfg.alpha,
        'mode': cfg.mode.value,
        'k': cfg.smoother.bandwidth,
        'b': cfg.hac.bandwidth,
        'reps': cfg.reps,
        'seed': cfg.seed,
        'kernel_g': cfg.smoother.kernel.name,
        'kernel_k': cfg.hac.kernel.name,
        't_nm': est.t_nm,
        'b_nm': est.b_nm,
        'c_quantile': result.c_quantile,
        'positions': [position_payload(pos) for pos in result.positions],
        'estimates': est.estimates.tolist(),
        'half_widths': result.half_widths.tolist(),
        'tau': result.tau.tolist(),
        'sigma': [] if result.sigma is None else result.sigma.tolist(),
        'negative_variance': result.negative_variance.tolist(),
        'verdict': None if result.verdict is None else verdict_payload(result.verdict),
    }


def render_json(data):
    """Render serializer data as indented JSON bytes with a trailing newline."""
    return JSONRenderer().render(data, renderer_context={'indent': 2}) + b'\n'


def dump_result(result):
    """Validated lwmb-result/1 JSON bytes for a BootstrapResult."""
    return render_json(BootstrapResultSerializer(result_payload(result)).data)


def load_result(path):
    """
    Read and validate an lwmb-result/1 file.

    Raises:
        GridIOError: file cannot be read
        FormatError: content is not a valid result document
    """
    try:
        with open(path, encoding='utf-8') as handle:
            data = json.load(handle)
    except OSError as exc:
        raise GridIOError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not JSON: {exc}") from exc
    serializer = BootstrapResultSerializer(data=data)
    if not serializer.is_valid():
        raise FormatError(f"{path} is not a valid {RESULT_SCHEMA} document: {serializer.errors}")
    return serializer.validated_data
