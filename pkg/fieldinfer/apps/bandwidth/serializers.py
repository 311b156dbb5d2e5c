"""
Serializers for bandwidth app.
"""
from rest_framework import serializers


class BandwidthSelectionSerializer(serializers.Serializer):
    """Serializer for the select-bandwidth document."""

    k_best = serializers.IntegerField(min_value=1)
    b_best = serializers.FloatField(min_value=0.0)
    cv_scores = serializers.DictField(child=serializers.FloatField())
    vb_losses = serializers.DictField(child=serializers.FloatField(min_value=0.0))
    sigma2 = serializers.FloatField(min_value=0.0)
    corners = serializers.ListField(child=serializers.ListField(child=serializers.IntegerField(min_value=1)))

    def validate(self, data):
        """The chosen bandwidths must be among the scored candidates."""
        if str(data['k_best']) not in data['cv_scores']:
            raise serializers.ValidationError("k_best is not a scored candidate")
        if format_bandwidth(data['b_best']) not in data['vb_losses']:
            raise serializers.ValidationError("b_best is not a scored candidate")
        return data


def format_bandwidth(b):
    """Stable text key for a variance bandwidth."""
    return repr(float(b))


def selection_payload(cv, vb):
    """Plain dict for a CvSelection and a VbSelection."""
    return {
        'k_best': cv.k_best,
        'b_best': vb.b_best,
        'cv_scores': {str(k): score for k, score in cv.scores.items()},
        'vb_losses': {format_bandwidth(b): loss for b, loss in vb.losses.items()},
        'sigma2': vb.sigma2,
        'corners': [list(corner) for corner in vb.corners],
    }
