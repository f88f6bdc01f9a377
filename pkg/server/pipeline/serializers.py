from pathlib import Path

from django.conf import settings
from rest_framework import serializers

from causal.policy.methods import METHODS
from causal.serializers import ForestOverridesSerializer, PolicyOverridesSerializer, TuneGridSerializer
from eeg.preprocess.serializers import SiteConfigSerializer
from sim.serializers import SimulationOverridesSerializer

ALL_STAGES = ("preprocess", "features", "fit_forest", "scores", "predict", "policy", "simulate")


class PipelineConfigSerializer(serializers.Serializer):
    stages = serializers.ListField(child=serializers.ChoiceField(choices=ALL_STAGES), required=False,
                                   allow_empty=False)
    out_dir = serializers.CharField(required=False)
    raw_dir = serializers.CharField(required=False, allow_null=True, default=None)
    clinical = serializers.CharField(required=False, allow_null=True, default=None)
    features = serializers.CharField(required=False, allow_null=True, default=None)
    sim_spec = serializers.CharField(required=False, allow_null=True, default=None)
    train_fraction = serializers.FloatField(required=False)
    upsample_minority = serializers.BooleanField(required=False)
    propensity = serializers.FloatField(required=False, allow_null=True, default=None)
    policy_method = serializers.ChoiceField(choices=METHODS, required=False, default="policy_tree")
    seed = serializers.IntegerField(required=False, min_value=0)
    threads = serializers.IntegerField(required=False, min_value=1)
    site = SiteConfigSerializer(required=False)
    forest = ForestOverridesSerializer(required=False)
    tune = serializers.BooleanField(required=False, default=False)
    tune_grid = TuneGridSerializer(required=False)
    policy = PolicyOverridesSerializer(required=False)
    simulation = SimulationOverridesSerializer(required=False)

    def validate_train_fraction(self, value):
        if not 0 < value < 1:
            raise serializers.ValidationError("train_fraction must lie strictly between 0 and 1.")
        return value

    def validate_propensity(self, value):
        if value is not None and not 0 < value < 1:
            raise serializers.ValidationError("propensity must lie strictly between 0 and 1.")
        return value

    def validate(self, attrs):
        stages = attrs.get("stages") or settings.PIPELINE["STAGES"]
        errors = {}
        if "preprocess" in stages and not _is_dir(attrs.get("raw_dir")):
            errors["raw_dir"] = "The preprocess stage needs an existing raw_dir."
        if "features" in stages and attrs.get("clinical") and not _is_file(attrs["clinical"]):
            errors["clinical"] = f"{attrs['clinical']} does not exist."
        if "features" in stages and not attrs.get("clinical"):
            errors["clinical"] = "The features stage needs a clinical table with subject_id, W and Y."
        needs_table = {"fit_forest", "scores", "predict", "policy"} & set(stages)
        if needs_table and "features" not in stages and not _is_file(attrs.get("features")):
            errors["features"] = "Forest and policy stages need a features table when the features stage is off."
        if "simulate" in stages and attrs.get("sim_spec") and not _is_file(attrs["sim_spec"]):
            errors["sim_spec"] = f"{attrs['sim_spec']} does not exist."
        if errors:
            raise serializers.ValidationError(errors)
        return attrs


def _is_file(value):
    return bool(value) and Path(value).is_file()


def _is_dir(value):
    return bool(value) and Path(value).is_dir()
