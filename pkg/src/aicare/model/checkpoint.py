"""Self-describing checkpoint files.

A checkpoint embeds the schema, its hash, the fitted preprocessor, the
hyperparameters, optional calibration and all weights (base64-encoded
little-endian float64), so serving can never pair a model with the wrong
preprocessing.  Round-trips are bit-exact.
"""

from __future__ import annotations

import base64
import hashlib
import json
from pathlib import Path

import numpy as np

from ..analytics import CalibrationArtifact
from ..data.preprocess import Preprocessor
from ..data.schema import FeatureSchema
from .network import ModelHyper

MAGIC = "aicare-checkpoint"
VERSION = 1


def _encode_array(a: np.ndarray) -> dict:
    return {"shape": list(a.shape),
            "data": base64.b64encode(
                np.ascontiguousarray(a, dtype="<f8").tobytes()).decode()}


def _decode_array(d: dict) -> np.ndarray:
    buf = base64.b64decode(d["data"])
    return np.frombuffer(buf, dtype="<f8").reshape(d["shape"]).copy()


def checkpoint_dict(params: dict[str, np.ndarray], hyper: ModelHyper,
                    schema: FeatureSchema, pre: Preprocessor,
                    calibration: CalibrationArtifact | None,
                    meta: dict) -> dict:
    return {
        "magic": MAGIC,
        "version": VERSION,
        "schema_hash": schema.hash(),
        "schema": schema.to_dict(),
        "hyper": hyper.to_dict(),
        "preprocessor": pre.to_dict(),
        "calibration": calibration.to_dict() if calibration else None,
        "meta": meta,
        "params": {k: _encode_array(v) for k, v in sorted(params.items())},
    }


def checkpoint_bytes(*args, **kwargs) -> bytes:
    return json.dumps(checkpoint_dict(*args, **kwargs),
                      sort_keys=True, separators=(",", ":")).encode()


def model_hash(ckpt_bytes: bytes) -> str:
    return hashlib.sha256(ckpt_bytes).hexdigest()[:16]


def save_checkpoint(path: str | Path, *args, **kwargs) -> str:
    data = checkpoint_bytes(*args, **kwargs)
    Path(path).write_bytes(data)
    return model_hash(data)


def load_checkpoint(path: str | Path):
    """Returns (params, hyper, schema, preprocessor, calibration, meta, hash)."""
    raw = Path(path).read_bytes()
    d = json.loads(raw)
    if d.get("magic") != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    if d.get("version") != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {d.get('version')}")
    schema = FeatureSchema.from_dict(d["schema"])
    if schema.hash() != d["schema_hash"]:
        raise ValueError(f"{path}: schema hash mismatch")
    params = {k: _decode_array(v) for k, v in d["params"].items()}
    hyper = ModelHyper.from_dict(d["hyper"])
    pre = Preprocessor.from_dict(d["preprocessor"])
    cal = (CalibrationArtifact.from_dict(d["calibration"])
           if d["calibration"] else None)
    # hash of the canonical re-serialization, stable across load/save cycles
    h = model_hash(checkpoint_bytes(params, hyper, schema, pre, cal, d["meta"]))
    return params, hyper, schema, pre, cal, d["meta"], h
