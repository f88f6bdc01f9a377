import json
from pathlib import Path

import numpy as np

from eeg.exceptions import MalformedHeaderError
from eeg.io.serializers import EpochMetadataSerializer
from eeg.preprocess.epochs import EpochSet


def save_epochs(es, path):
    """Write an EpochSet as .npz: arrays plus a JSON `metadata` member."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    metadata = {
        "channel_names": list(es.channel_names),
        "sample_rate_hz": es.sample_rate,
        "condition": es.condition,
        "block_index": es.block_index,
        "length_s": es.length_s,
        "subject_id": es.subject_id,
        "rejection": es.rejection,
    }
    with open(path, "wb") as fh:
        np.savez(
            fh,
            epochs=es.epochs,
            keep_mask=es.keep_mask,
            per_channel_thresholds=es.per_channel_thresholds,
            metadata=np.array(json.dumps(metadata)),
        )
    return path


def load_epochs(path):
    with np.load(path, allow_pickle=False) as archive:
        try:
            payload = json.loads(str(archive["metadata"]))
        except (KeyError, json.JSONDecodeError) as exc:
            raise MalformedHeaderError(f"{path} has no readable metadata member.", field="metadata") from exc
        serializer = EpochMetadataSerializer(data=payload)
        if not serializer.is_valid():
            raise MalformedHeaderError(f"Invalid epoch metadata in {path}: {serializer.errors}", field="metadata")
        meta = serializer.validated_data
        return EpochSet(
            epochs=archive["epochs"],
            channel_names=meta["channel_names"],
            sample_rate=meta["sample_rate_hz"],
            length_s=meta["length_s"],
            condition=meta["condition"],
            block_index=meta["block_index"],
            keep_mask=archive["keep_mask"],
            per_channel_thresholds=archive["per_channel_thresholds"],
            rejection=payload.get("rejection") or {},
            subject_id=meta.get("subject_id", ""),
        )
