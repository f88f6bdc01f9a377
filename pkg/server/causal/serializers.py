from rest_framework import serializers

from causal.effects.scores import DoublyRobustScores
from causal.policy.methods import METHODS
from causal.policy.olearn import RESIDUALIZERS
from utils.utils import load_json


class ForestOverridesSerializer(serializers.Serializer):
    num_trees = serializers.IntegerField(required=False, min_value=1)
    nuisance_trees = serializers.IntegerField(required=False, min_value=1)
    subsample_ratio = serializers.FloatField(required=False, min_value=0, max_value=1)
    honesty_ratio = serializers.FloatField(required=False, min_value=0, max_value=1)
    mtry = serializers.IntegerField(required=False, allow_null=True, min_value=1)
    min_node_size = serializers.IntegerField(required=False, min_value=1)
    max_depth = serializers.IntegerField(required=False, allow_null=True, min_value=0)
    cross_fit_folds = serializers.IntegerField(required=False, min_value=2)
    propensity_clip = serializers.FloatField(required=False, min_value=0, max_value=0.5)

    def validate_subsample_ratio(self, value):
        if value == 0:
            raise serializers.ValidationError("subsample_ratio must be positive.")
        return value

    def validate_honesty_ratio(self, value):
        if value in (0, 1):
            raise serializers.ValidationError("honesty_ratio must lie strictly between 0 and 1.")
        return value


class PolicyOverridesSerializer(serializers.Serializer):
    depth = serializers.ChoiceField(choices=[1, 2], required=False)
    split_step = serializers.IntegerField(required=False, min_value=1)
    q_folds = serializers.IntegerField(required=False, min_value=2)
    q_n_lambdas = serializers.IntegerField(required=False, min_value=1)
    q_lambda_ratio = serializers.FloatField(required=False, min_value=0, max_value=1)
    q_one_se_rule = serializers.BooleanField(required=False)
    o_residualizer = serializers.ChoiceField(choices=RESIDUALIZERS, required=False)
    o_ridge_per_subject = serializers.FloatField(required=False, min_value=0)
    cv_folds = serializers.IntegerField(required=False, min_value=2)


class TuneGridSerializer(serializers.Serializer):
    mtry = serializers.ListField(child=serializers.IntegerField(min_value=1, allow_null=True), required=False,
                                 allow_empty=False)
    min_node_size = serializers.ListField(child=serializers.IntegerField(min_value=1), required=False,
                                          allow_empty=False)
    subsample_ratio = serializers.ListField(child=serializers.FloatField(min_value=0, max_value=1), required=False,
                                            allow_empty=False)

    def validate(self, attrs):
        if not attrs:
            raise serializers.ValidationError("The tuning grid names no parameter.")
        return attrs


class ScoresSerializer(serializers.Serializer):
    subject_ids = serializers.ListField(child=serializers.CharField(), required=False)
    gamma = serializers.ListField(child=serializers.FloatField(), allow_empty=False)
    gamma_0 = serializers.ListField(child=serializers.FloatField(), allow_empty=False)
    gamma_1 = serializers.ListField(child=serializers.FloatField(), allow_empty=False)
    tau_hat = serializers.ListField(child=serializers.FloatField(), allow_empty=False)
    e_hat = serializers.ListField(child=serializers.FloatField(), allow_empty=False)
    m_hat = serializers.ListField(child=serializers.FloatField(), allow_empty=False)

    def validate(self, attrs):
        lengths = {len(v) for k, v in attrs.items() if k != "subject_ids" or v}
        if len(lengths) != 1:
            raise serializers.ValidationError("All score vectors must have the same length.")
        return attrs


class PolicyMethodField(serializers.ChoiceField):
    def __init__(self, **kwargs):
        super().__init__(choices=METHODS, **kwargs)


def load_scores(path):
    serializer = ScoresSerializer(data=load_json(path))
    serializer.is_valid(raise_exception=True)
    return DoublyRobustScores.from_dict(serializer.validated_data)
