from rest_framework import serializers

from causal.policy.methods import METHODS
from causal.serializers import ForestOverridesSerializer
from sim.generator import EFFECTS, NOISE_MODELS, GeneratorSpec
from utils.utils import load_json


class ContinuousBlockSerializer(serializers.Serializer):
    names = serializers.ListField(child=serializers.CharField(), allow_empty=False)
    mean = serializers.ListField(child=serializers.FloatField())
    covariance = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()))

    def validate(self, attrs):
        p = len(attrs["names"])
        rows = attrs["covariance"]
        if len(attrs["mean"]) != p or len(rows) != p or any(len(row) != p for row in rows):
            raise serializers.ValidationError("mean and covariance must match the number of names.")
        return attrs


class CategoricalSerializer(serializers.Serializer):
    name = serializers.CharField()
    probabilities = serializers.ListField(child=serializers.FloatField(min_value=0), min_length=2)

    def validate_probabilities(self, value):
        if abs(sum(value) - 1) > 1e-9:
            raise serializers.ValidationError("Class probabilities must sum to 1.")
        return value


class NoiseSerializer(serializers.Serializer):
    model = serializers.ChoiceField(choices=NOISE_MODELS, default="bernoulli")
    sd = serializers.FloatField(min_value=0, default=1.0)
    clip = serializers.ListField(child=serializers.FloatField(min_value=0, max_value=1), min_length=2, max_length=2,
                                 default=[0.02, 0.98])


def _check_effect_node(node, path="effect_tree"):
    if not isinstance(node, dict):
        raise serializers.ValidationError(f"{path} must be an object.")
    if "feature" in node:
        missing = {"threshold", "left", "right"} - set(node)
        if missing:
            raise serializers.ValidationError(f"{path} lacks {sorted(missing)}.")
        _check_effect_node(node["left"], f"{path}.left")
        _check_effect_node(node["right"], f"{path}.right")
    elif not {"mu_1", "mu_0"} <= set(node):
        raise serializers.ValidationError(f"{path} is neither a split nor a leaf with mu_1 and mu_0.")


class GeneratorSpecSerializer(serializers.Serializer):
    continuous = ContinuousBlockSerializer()
    categoricals = CategoricalSerializer(many=True, required=False, default=list)
    effect_tree = serializers.DictField()
    effect = serializers.ChoiceField(choices=EFFECTS, default="strong")
    noise = NoiseSerializer(required=False, default=dict)
    seed = serializers.IntegerField(min_value=0, default=0)

    def validate_effect_tree(self, value):
        _check_effect_node(value)
        return value


class SimulationOverridesSerializer(serializers.Serializer):
    train_sizes = serializers.ListField(child=serializers.IntegerField(min_value=4), required=False, allow_empty=False)
    n_test = serializers.IntegerField(required=False, min_value=1)
    replicates = serializers.IntegerField(required=False, min_value=1)
    effect = serializers.ChoiceField(choices=EFFECTS, required=False)
    methods = serializers.ListField(child=serializers.ChoiceField(choices=METHODS), required=False, allow_empty=False)
    policy_split_step = serializers.IntegerField(required=False, min_value=1)
    forest = ForestOverridesSerializer(required=False)


def load_spec(path):
    serializer = GeneratorSpecSerializer(data=load_json(path))
    serializer.is_valid(raise_exception=True)
    data = serializer.validated_data
    noise = data.get("noise") or {}
    return GeneratorSpec.from_dict({**data, "noise": {"model": noise.get("model", "bernoulli"),
                                                     "sd": noise.get("sd", 1.0),
                                                     "clip": noise.get("clip", [0.02, 0.98])}})
