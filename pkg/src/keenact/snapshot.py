"""Model persistence as deterministic JSON text.

Floats are serialized through their shortest round-trip repr, so a
saved model reloads bit-exactly and two identical training runs produce
byte-identical snapshot files.
"""

from __future__ import annotations

import json

import numpy as np
from scipy import sparse

from keenact.data import Catalog
from keenact.features import FeatureLayout, FeatureMatrix
from keenact.fm import FMParameters
from keenact.training import ThresholdTable, TrainConfig, TrainedModel

FORMAT_NAME = "keenact-model"
FORMAT_VERSION = 1


class SnapshotError(ValueError):
    """Snapshot file is missing, malformed, or from an unknown format."""


def _params_to_dict(params: FMParameters) -> dict:
    return {
        "w0": params.w0,
        "w": params.w.tolist(),
        "factors": params.factors.tolist(),
    }


def _params_from_dict(payload: dict) -> FMParameters:
    return FMParameters(
        w0=float(payload["w0"]),
        w=np.array(payload["w"], dtype=np.float64),
        factors=np.array(payload["factors"], dtype=np.float64),
    )


def _feats_to_dict(feats: FeatureMatrix) -> dict:
    coo = feats.matrix.tocoo()
    return {
        "kind": feats.entity_kind,
        "shape": [int(coo.shape[0]), int(coo.shape[1])],
        "rows": coo.row.tolist(),
        "cols": coo.col.tolist(),
        "values": coo.data.tolist(),
    }


def _feats_from_dict(payload: dict) -> FeatureMatrix:
    shape = tuple(payload["shape"])
    matrix = sparse.csr_matrix(
        (payload["values"], (payload["rows"], payload["cols"])), shape=shape, dtype=np.float64
    )
    return FeatureMatrix(matrix, payload["kind"])


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "catalog": model.catalog.to_dict() if model.catalog is not None else None,
        "keen": _params_to_dict(model.keen),
        "act": _params_to_dict(model.act),
        "keen_layout": model.keen_layout.to_dict(),
        "act_layout": model.act_layout.to_dict(),
        "thresholds": {
            "item": model.thresholds.item_thresholds.tolist(),
            "activity": model.thresholds.activity_thresholds.tolist(),
            "fallback": model.thresholds.global_item_fallback,
            "trained": [int(b) for b in model.thresholds.item_trained],
        },
        "user_feats": _feats_to_dict(model.user_feats),
        "item_feats": _feats_to_dict(model.item_feats),
        "seen_items": sorted(model.seen_items),
        "report": [[e, p, m, v] for (e, p, m, v) in model.report],
    }


def model_from_dict(payload: dict) -> TrainedModel:
    if payload.get("format") != FORMAT_NAME:
        raise SnapshotError(f"not a {FORMAT_NAME} file")
    if payload.get("version") != FORMAT_VERSION:
        raise SnapshotError(f"unsupported snapshot version {payload.get('version')!r}")
    thresholds = ThresholdTable(
        item_thresholds=np.array(payload["thresholds"]["item"], dtype=np.float64),
        activity_thresholds=np.array(payload["thresholds"]["activity"], dtype=np.float64),
        global_item_fallback=float(payload["thresholds"]["fallback"]),
        item_trained=np.array(payload["thresholds"]["trained"], dtype=bool),
    )
    model = TrainedModel(
        keen=_params_from_dict(payload["keen"]),
        act=_params_from_dict(payload["act"]),
        thresholds=thresholds,
        keen_layout=FeatureLayout.from_dict(payload["keen_layout"]),
        act_layout=FeatureLayout.from_dict(payload["act_layout"]),
        user_feats=_feats_from_dict(payload["user_feats"]),
        item_feats=_feats_from_dict(payload["item_feats"]),
        seen_items=frozenset(int(v) for v in payload["seen_items"]),
        report=[(int(e), str(p), str(m), float(v)) for e, p, m, v in payload["report"]],
        config=TrainConfig(**payload["config"]),
        catalog=Catalog.from_dict(payload["catalog"]) if payload.get("catalog") else None,
    )
    return model


def save_model(model: TrainedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_model(path) -> TrainedModel:
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"malformed snapshot: {exc}") from None
    if not isinstance(payload, dict):
        raise SnapshotError("malformed snapshot: expected a JSON object")
    return model_from_dict(payload)
