"""Versioned JSON persistence for trained models.

A model is a single JSON document with a format_version guard and a
model_type discriminator.  Factor tensors are flattened row-major
(entity-major, then score, then factor); floats are emitted as Python's
shortest round-trip representation, so loading restores the exact same
binary64 values and re-saving is byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

from .model import FactorModel, Hyperparams
from .pmf import PmfModel
from .scores import ScoreSet

FORMAT_VERSION = 1


def model_document(model: Union[FactorModel, PmfModel]) -> dict:
    """JSON-ready document for a trained model."""
    hp = model.hyperparams
    return {
        "format_version": FORMAT_VERSION,
        "model_type": "resbemf" if isinstance(model, FactorModel) else "pmf",
        "score_values": list(model.score_set.values),
        "k": hp.k,
        "gamma": hp.gamma,
        "eta": hp.eta,
        "m": hp.m,
        "seed": hp.seed,
        "user_ids": list(model.user_ids),
        "item_ids": list(model.item_ids),
        "P": model.P.ravel(order="C").tolist(),
        "Q": model.Q.ravel(order="C").tolist(),
    }


def save_model(model: Union[FactorModel, PmfModel], target) -> None:
    """Write the model document; output bytes are deterministic."""
    text = json.dumps(model_document(model))
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.write("\n")
    else:
        target.write(text)
        target.write("\n")


def load_model(source) -> Union[FactorModel, PmfModel]:
    """Load a model document, rejecting unknown versions and types."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    else:
        doc = json.load(source)
    if not isinstance(doc, dict):
        raise ValueError("model document must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {version!r} (expected {FORMAT_VERSION})")
    model_type = doc.get("model_type")
    if model_type not in ("resbemf", "pmf"):
        raise ValueError(f"unknown model_type {model_type!r}")

    try:
        score_set = ScoreSet(tuple(doc["score_values"]))
        hp = Hyperparams(k=doc["k"], gamma=doc["gamma"], eta=doc["eta"], m=doc["m"], seed=doc["seed"])
        user_ids = tuple(doc["user_ids"])
        item_ids = tuple(doc["item_ids"])
        p_flat = np.asarray(doc["P"], dtype=np.float64)
        q_flat = np.asarray(doc["Q"], dtype=np.float64)
    except KeyError as e:
        raise ValueError(f"model document is missing field {e.args[0]!r}") from None

    if model_type == "resbemf":
        shape_p = (len(user_ids), score_set.d, hp.k)
        shape_q = (len(item_ids), score_set.d, hp.k)
        cls = FactorModel
    else:
        shape_p = (len(user_ids), hp.k)
        shape_q = (len(item_ids), hp.k)
        cls = PmfModel
    if p_flat.size != int(np.prod(shape_p)) or q_flat.size != int(np.prod(shape_q)):
        raise ValueError("factor array lengths disagree with the document's dimensions")
    return cls(
        score_set=score_set,
        P=p_flat.reshape(shape_p),
        Q=q_flat.reshape(shape_q),
        hyperparams=hp,
        user_ids=user_ids,
        item_ids=item_ids,
    )
