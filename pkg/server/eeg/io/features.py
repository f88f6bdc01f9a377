import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd
from django.conf import settings

from eeg.exceptions import (
    MalformedHeaderError, MissingColumnError, TreatmentDomainError, NonNumericCovariateError,
)
from eeg.io.serializers import FeatureSchemaSerializer
from eeg.io.types import FeatureMatrix

logger = logging.getLogger(__name__)

MANDATORY_COLUMNS = ("subject_id", "W", "Y")


def schema_path_for(path):
    path = Path(path)
    return path.with_name(path.stem + settings.EEG_IO["SCHEMA_SUFFIX"])


def _read_schema(path):
    if not path.exists():
        return {}
    with open(path, encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedHeaderError(f"Schema {path} is not valid JSON.", field="schema") from exc
    serializer = FeatureSchemaSerializer(data=payload)
    if not serializer.is_valid():
        raise MalformedHeaderError(f"Invalid schema {path}: {serializer.errors}", field="schema")
    return dict(serializer.validated_data["columns"])


def _one_hot(frame, column):
    levels = sorted(frame[column].astype(str).unique())
    # First sorted level is the reference and gets no indicator.
    names = [f"{column}_{level}" for level in levels[1:]]
    values = np.column_stack([(frame[column].astype(str) == level).to_numpy(dtype=np.float64)
                              for level in levels[1:]]) if names else np.empty((len(frame), 0))
    return names, values


def feature_matrix_from_frame(frame, schema=None, drop_incomplete=None):
    """Build a FeatureMatrix from a table holding subject_id, W, Y and covariates."""
    schema = schema or {}
    drop_incomplete = settings.EEG_IO["DROP_INCOMPLETE_ROWS"] if drop_incomplete is None else drop_incomplete

    for column in MANDATORY_COLUMNS:
        if column not in frame.columns:
            raise MissingColumnError(f"Feature table lacks mandatory column {column!r}.", field=column)

    n_before = len(frame)
    if drop_incomplete:
        frame = frame.dropna(axis=0, how="any").reset_index(drop=True)
    n_dropped = n_before - len(frame)
    if n_dropped:
        logger.warning("Dropped %d of %d rows with missing values.", n_dropped, n_before)

    W = pd.to_numeric(frame["W"], errors="coerce")
    if W.isna().any() or not W.isin([0, 1]).all():
        bad = frame.loc[~W.isin([0, 1]), "W"].iloc[0]
        raise TreatmentDomainError(f"Treatment W must be 0 or 1, found {bad!r}.", field="W")
    Y = pd.to_numeric(frame["Y"], errors="coerce")
    if Y.isna().any():
        raise NonNumericCovariateError("Outcome Y must be numeric.", field="Y")

    continuous, categorical = [], []
    for column in frame.columns:
        if column in MANDATORY_COLUMNS:
            continue
        if schema.get(column) == "categorical":
            categorical.append(column)
        elif pd.api.types.is_numeric_dtype(frame[column]):
            continuous.append(column)
        else:
            raise NonNumericCovariateError(
                f"Covariate {column!r} is not numeric and not tagged categorical.", field=column
            )

    names = list(continuous)
    kinds = ["continuous"] * len(continuous)
    blocks = [frame[continuous].to_numpy(dtype=np.float64)]
    for column in categorical:
        indicator_names, indicators = _one_hot(frame, column)
        names.extend(indicator_names)
        kinds.extend(["categorical"] * len(indicator_names))
        blocks.append(indicators)

    return FeatureMatrix(
        subject_ids=frame["subject_id"].astype(str).tolist(),
        X=np.hstack(blocks),
        W=W.to_numpy(dtype=np.int64),
        Y=Y.to_numpy(dtype=np.float64),
        column_names=names,
        column_kinds=kinds,
        n_dropped=n_dropped,
    )


def load_feature_table(path, schema_path=None, drop_incomplete=None):
    """Read a subject table; categorical columns are one-hot expanded with the reference level dropped."""
    path = Path(path)
    frame = pd.read_csv(path, encoding="utf-8", dtype={"subject_id": str}, float_precision="round_trip")
    schema = _read_schema(Path(schema_path) if schema_path else schema_path_for(path))
    return feature_matrix_from_frame(frame, schema=schema, drop_incomplete=drop_incomplete)


def save_feature_table(features, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    features.to_frame().to_csv(path, index=False, float_format="%.17g")
    return path
