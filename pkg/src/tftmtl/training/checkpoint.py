"""Self-describing, byte-comparable checkpoint files.

Layout (canonical JSON, sorted keys, no whitespace)::

    {"format": "tftmtl-checkpoint", "version": 1,
     "model_kind": "tft" | "gru", "model_config": {...},
     "params": {name: {"shape": [...], "data": base64(<f8 bytes)}},
     "optimizer": {"hyper": {...}, "step": n, "m": {...}, "v": {...}},
     "epoch": n, "normalizer": {...}, "encoder": {...}, "features": [...],
     "meta": {...}}
"""

from __future__ import annotations

import base64
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..data.normalize import NormalizerStats, StaticEncoder
from ..errors import CheckpointError
from ..model.config import ModelConfig
from ..numerics import AdamWHyper, AdamWState, Tensor

FORMAT = "tftmtl-checkpoint"
VERSION = 1


@dataclass
class Checkpoint:
    model_kind: str
    model_config: ModelConfig
    params: dict[str, Tensor]
    optimizer: AdamWState | None = None
    epoch: int = 0
    normalizer: NormalizerStats | None = None
    encoder: StaticEncoder | None = None
    features: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict)


def encode_array(a) -> dict:
    a = np.asarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(np.ascontiguousarray(a).tobytes()).decode("ascii")}


def decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"].encode("ascii"), validate=True)
    shape = tuple(int(s) for s in d["shape"])
    flat = np.frombuffer(raw, dtype="<f8")
    if flat.size != int(np.prod(shape, dtype=np.int64)):
        raise CheckpointError(f"array payload has {flat.size} values, shape {shape} needs {int(np.prod(shape))}")
    return flat.reshape(shape).astype(np.float64)


def _arrays(d: dict) -> dict:
    return {k: encode_array(v) for k, v in sorted(d.items())}


def checkpoint_to_json(ckpt: Checkpoint) -> str:
    doc: dict = {
        "format": FORMAT,
        "version": VERSION,
        "model_kind": ckpt.model_kind,
        "model_config": ckpt.model_config.to_dict(),
        "params": _arrays({k: p.data for k, p in ckpt.params.items()}),
        "epoch": int(ckpt.epoch),
        "features": list(ckpt.features),
        "meta": ckpt.meta,
        "optimizer": None,
        "normalizer": None,
        "encoder": None if ckpt.encoder is None else ckpt.encoder.to_dict(),
    }
    if ckpt.optimizer is not None:
        st = ckpt.optimizer
        doc["optimizer"] = {"hyper": asdict(st.hyper), "step": st.step, "m": _arrays(st.m), "v": _arrays(st.v)}
    if ckpt.normalizer is not None:
        nd = ckpt.normalizer.to_dict()
        doc["normalizer"] = {
            "features": nd["features"], "products": nd["products"],
            **{k: encode_array(nd[k]) for k in ("mean", "std", "global_mean", "global_std")},
        }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True, allow_nan=False)


def checkpoint_from_json(text: str) -> Checkpoint:
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"checkpoint is not valid JSON ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise CheckpointError("file is not a tftmtl checkpoint")
    if doc.get("version") != VERSION:
        raise CheckpointError(f"checkpoint version {doc.get('version')!r} is not supported (expected {VERSION})")
    try:
        opt = None
        if doc["optimizer"] is not None:
            o = doc["optimizer"]
            opt = AdamWState(AdamWHyper(**o["hyper"]), int(o["step"]),
                             {k: decode_array(v) for k, v in o["m"].items()},
                             {k: decode_array(v) for k, v in o["v"].items()})
        norm = None
        if doc["normalizer"] is not None:
            n = doc["normalizer"]
            norm = NormalizerStats.from_dict({
                "features": n["features"], "products": n["products"],
                **{k: decode_array(n[k]) for k in ("mean", "std", "global_mean", "global_std")},
            })
        return Checkpoint(
            model_kind=doc["model_kind"],
            model_config=ModelConfig.from_dict(doc["model_config"]),
            params={k: Tensor(decode_array(v)) for k, v in doc["params"].items()},
            optimizer=opt,
            epoch=int(doc["epoch"]),
            normalizer=norm,
            encoder=None if doc["encoder"] is None else StaticEncoder.from_dict(doc["encoder"]),
            features=tuple(doc["features"]),
            meta=doc["meta"],
        )
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise CheckpointError(f"checkpoint is corrupt: {type(exc).__name__}: {exc}") from None


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    """Atomic write; the file holds a single line of canonical JSON."""
    path = Path(path)
    text = checkpoint_to_json(ckpt)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str | Path) -> Checkpoint:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc.strerror}") from None
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError:
        raise CheckpointError("checkpoint contains non-ASCII bytes") from None
    return checkpoint_from_json(text)
