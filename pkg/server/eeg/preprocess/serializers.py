from rest_framework import serializers


class SiteConfigSerializer(serializers.Serializer):
    """Per-site overrides of the preprocessing defaults. Every field is optional."""

    site = serializers.CharField(required=False, allow_blank=True)
    target_rate_hz = serializers.FloatField(required=False, min_value=0)
    notch_hz = serializers.FloatField(required=False, allow_null=True, min_value=0)
    notch_width_hz = serializers.FloatField(required=False, min_value=0)
    high_pass_hz = serializers.FloatField(required=False, min_value=0)
    low_pass_hz = serializers.FloatField(required=False, min_value=0)
    transition_hz = serializers.FloatField(required=False, min_value=0)
    deviation_z = serializers.FloatField(required=False, min_value=0)
    min_correlation = serializers.FloatField(required=False, min_value=0, max_value=1)
    predictability_correlation = serializers.FloatField(required=False, min_value=0, max_value=1)
    noisiness_z = serializers.FloatField(required=False, min_value=0)
    correlation_window_s = serializers.FloatField(required=False, min_value=0)
    noise_split_hz = serializers.FloatField(required=False, min_value=0)
    ransac_trials = serializers.IntegerField(required=False, min_value=1)
    ransac_fraction = serializers.FloatField(required=False, min_value=0, max_value=1)
    epoch_length_s = serializers.FloatField(required=False, min_value=0)
    rejection_folds = serializers.IntegerField(required=False, min_value=2)
    rejection_grid_uv = serializers.ListField(
        child=serializers.FloatField(min_value=0), required=False, allow_empty=False
    )
    rejection_channel_fraction = serializers.FloatField(required=False, min_value=0, max_value=1)

    def validate_rejection_grid_uv(self, value):
        if any(b <= a for a, b in zip(value, value[1:])):
            raise serializers.ValidationError("Threshold grid must be strictly ascending.")
        return value

    def validate(self, attrs):
        high = attrs.get("high_pass_hz")
        low = attrs.get("low_pass_hz")
        if high is not None and low is not None and not high < low:
            raise serializers.ValidationError({"high_pass_hz": "high_pass_hz must be below low_pass_hz."})
        return attrs

    def to_settings(self):
        """Validated overrides keyed like settings.EEG_PREPROCESS."""
        return {key.upper(): value for key, value in self.validated_data.items() if key != "site"}
