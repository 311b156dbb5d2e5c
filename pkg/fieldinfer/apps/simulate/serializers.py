"""
Serializers for simulate app.
"""
from rest_framework import serializers

from apps.bandwidth.services import DEFAULT_GAMMA, VbConfig
from apps.hac.services import BootstrapMode
from apps.kernels.services import SMOOTHING_KERNELS, VARIANCE_KERNELS
from apps.simulate.services import MeanField, MeanFieldKind, NoiseKind
from apps.simulate.studies import StudyConfig
from apps.toeplitz.services import SqrtMode


class MeanFieldSerializer(serializers.Serializer):
    """Serializer for a mean field."""

    kind = serializers.ChoiceField(choices=MeanFieldKind.choices)
    height = serializers.FloatField(default=0.3)
    radius = serializers.FloatField(default=0.1, min_value=0.0)
    center = serializers.ListField(
        child=serializers.FloatField(), min_length=2, max_length=2, default=[0.5, 0.5]
    )


class VbSettingsSerializer(serializers.Serializer):
    """Serializer for variance-bandwidth selector settings."""

    q = serializers.FloatField(default=0.1, min_value=0.0, max_value=1.0)
    gamma = serializers.ListField(child=serializers.FloatField(min_value=0.0), min_length=1, default=list(DEFAULT_GAMMA))
    iterations = serializers.IntegerField(default=15, min_value=1)
    pilot = serializers.FloatField(default=5.0, min_value=0.0)
    reps = serializers.IntegerField(default=200, min_value=1)


class StudyConfigSerializer(serializers.Serializer):
    """Serializer for study.json."""

    n = serializers.IntegerField(min_value=1)
    m = serializers.IntegerField(min_value=1)
    mean = MeanFieldSerializer(default={'kind': MeanFieldKind.ZERO})
    noise = serializers.ChoiceField(choices=NoiseKind.choices, default=NoiseKind.AR2D)
    grid_divisions = serializers.IntegerField(default=20, min_value=1)
    alpha = serializers.FloatField(default=0.05)
    sims = serializers.IntegerField(default=200, min_value=1)
    boot_reps = serializers.IntegerField(default=200, min_value=1)
    modes = serializers.ListField(
        child=serializers.ChoiceField(choices=BootstrapMode.choices),
        min_length=1,
        default=[BootstrapMode.HOMOGENEOUS, BootstrapMode.HETEROGENEOUS],
    )
    seed = serializers.IntegerField(default=0, min_value=0)
    k = serializers.IntegerField(required=False, allow_null=True, default=None, min_value=1)
    b = serializers.FloatField(required=False, allow_null=True, default=None, min_value=0.0)
    kernel_g = serializers.ChoiceField(choices=list(SMOOTHING_KERNELS), default='quartic')
    kernel_k = serializers.ChoiceField(choices=list(VARIANCE_KERNELS), default='gaussian')
    sqrt_mode = serializers.ChoiceField(choices=SqrtMode.choices, default=SqrtMode.AUTO)
    k_max = serializers.IntegerField(default=20, min_value=1)
    vb = VbSettingsSerializer(default=dict)

    def validate_alpha(self, value):
        """Alpha must lie in (0, 1)."""
        if not 0.0 < value < 1.0:
            raise serializers.ValidationError("alpha out of range")
        return value

    def create(self, validated_data):
        """Build the StudyConfig."""
        data = dict(validated_data)
        mean = dict(data.pop('mean'))
        vb = dict(data.pop('vb'))
        return StudyConfig(
            mean=MeanField(
                kind=mean['kind'],
                height=mean.get('height', 0.3),
                radius=mean.get('radius', 0.1),
                center=tuple(mean.get('center', (0.5, 0.5))),
            ),
            vb=VbConfig(
                q=vb.get('q', 0.1),
                gamma=tuple(vb.get('gamma', DEFAULT_GAMMA)),
                iterations=vb.get('iterations', 15),
                pilot=vb.get('pilot', 5.0),
                reps=vb.get('reps', 200),
            ),
            modes=tuple(data.pop('modes')),
            **data,
        )
