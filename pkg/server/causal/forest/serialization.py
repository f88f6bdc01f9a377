import json
from pathlib import Path

import numpy as np

from causal.exceptions import ModelFormatError
from causal.forest.causal import CausalForestModel, Nuisances
from causal.forest.params import ForestParams
from causal.forest.tree import HonestTree
from utils.utils import ArtifactJSONEncoder

FORMAT = "causal-forest"
FORMAT_VERSION = 1


def save_model(model, path):
    """Write the model as .npz: JSON `header` with tree structures, binary leaf tables and training arrays."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nuisances = model.nuisances
    header = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "params": model.params.to_dict(),
        "column_names": list(model.column_names),
        "n_clipped": nuisances.n_clipped,
        "propensity": nuisances.propensity,
        "trees": [tree.to_dict() for tree in model.trees],
    }
    offsets = np.cumsum([0] + [tree.n_nodes for tree in model.trees])
    with open(path, "wb") as fh:
        np.savez(
            fh,
            header=np.array(json.dumps(header, cls=ArtifactJSONEncoder)),
            node_offsets=offsets,
            leaf_values=np.vstack([tree.values for tree in model.trees]),
            leaf_counts=np.concatenate([tree.counts for tree in model.trees]),
            roles=model.roles,
            X=model.X,
            W=model.W,
            Y=model.Y,
            m_hat=nuisances.m_hat,
            e_hat=nuisances.e_hat,
            folds=nuisances.folds,
        )
    return path


def load_model(path):
    try:
        archive = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise ModelFormatError(f"{path} is not a model archive.", field="model") from exc
    with archive:
        try:
            header = json.loads(str(archive["header"]))
        except (KeyError, json.JSONDecodeError) as exc:
            raise ModelFormatError(f"{path} has no readable header.", field="header") from exc
        if header.get("format") != FORMAT or header.get("version") != FORMAT_VERSION:
            raise ModelFormatError(
                f"Unsupported model format {header.get('format')!r} v{header.get('version')!r}.", field="header"
            )
        offsets = archive["node_offsets"]
        values = archive["leaf_values"]
        counts = archive["leaf_counts"]
        trees = tuple(
            HonestTree.from_arrays(structure, values[lo:hi], counts[lo:hi])
            for structure, lo, hi in zip(header["trees"], offsets[:-1], offsets[1:])
        )
        nuisances = Nuisances(
            m_hat=archive["m_hat"], e_hat=archive["e_hat"], folds=archive["folds"],
            n_clipped=header["n_clipped"], propensity=header["propensity"],
        )
        return CausalForestModel(
            trees=trees,
            roles=archive["roles"],
            params=ForestParams(**header["params"]),
            X=archive["X"],
            W=archive["W"],
            Y=archive["Y"],
            nuisances=nuisances,
            column_names=tuple(header["column_names"]),
        )
