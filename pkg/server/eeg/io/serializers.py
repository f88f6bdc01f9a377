from rest_framework import serializers

from eeg.io.types import CONDITIONS


class RecordingHeaderSerializer(serializers.Serializer):
    channel_names = serializers.ListField(child=serializers.CharField(), allow_empty=False)
    sample_rate_hz = serializers.FloatField()
    condition = serializers.ChoiceField(choices=CONDITIONS)
    block_index = serializers.IntegerField(min_value=0)
    n_samples = serializers.IntegerField(min_value=0)
    data_file = serializers.CharField(required=False)

    def validate_channel_names(self, value):
        seen = set()
        for name in value:
            if name in seen:
                raise serializers.ValidationError(f"Duplicate channel name {name!r}.", code="duplicate")
            seen.add(name)
        return value

    def validate_sample_rate_hz(self, value):
        if not value > 0:
            raise serializers.ValidationError("Sample rate must be positive.")
        return value


class CsvSidecarSerializer(serializers.Serializer):
    sample_rate_hz = serializers.FloatField()
    condition = serializers.ChoiceField(choices=CONDITIONS, required=False, default="eyes_open")
    block_index = serializers.IntegerField(min_value=0, required=False, default=0)

    def validate_sample_rate_hz(self, value):
        if not value > 0:
            raise serializers.ValidationError("Sample rate must be positive.")
        return value


class FeatureSchemaSerializer(serializers.Serializer):
    columns = serializers.DictField(child=serializers.ChoiceField(choices=["categorical", "continuous"]))

    def to_internal_value(self, data):
        # The sidecar is a flat {"column": "categorical"} map.
        if isinstance(data, dict) and "columns" not in data:
            data = {"columns": data}
        return super().to_internal_value(data)


class EpochMetadataSerializer(serializers.Serializer):
    channel_names = serializers.ListField(child=serializers.CharField(), allow_empty=False)
    sample_rate_hz = serializers.FloatField(min_value=0)
    condition = serializers.ChoiceField(choices=CONDITIONS)
    block_index = serializers.IntegerField(min_value=0)
    length_s = serializers.FloatField(min_value=0)
    subject_id = serializers.CharField(required=False, allow_blank=True)
