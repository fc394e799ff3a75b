"""Versioned binary model files.

Layout (all little-endian):

    bytes 0-3   magic  "RSSM"
    bytes 4-7   u32    format version (currently 1)
    bytes 8-11  4-byte model tag: "DNNC", "DBC1", "DBC2", or "KMC\\0"
    ...         tag-specific payload

DNNC payload: u32 layer count n, u32 sizes[n+1], f64 leaky slope,
u32 M, f64 mean[M], f64 std[M], then per layer the row-major (out, in)
weight matrix and the bias vector, all f64.

DBC payload: f64 threshold (the norm order is the tag).

KMC payload: u32 kappa, u32 M, f64 centroids[kappa*M] row-major,
f64 threshold.
"""

from __future__ import annotations

import struct

import numpy as np

from .benchmarks import DbcModel, KmcModel
from .detector import DetectorModel
from .errors import DataFormatError
from .neural import MlpParams

_MAGIC = b"RSSM"
_VERSION = 1
_TAG_DNNC = b"DNNC"
_TAG_DBC1 = b"DBC1"
_TAG_DBC2 = b"DBC2"
_TAG_KMC = b"KMC\0"

Model = "DetectorModel | DbcModel | KmcModel"


def _f64(arr) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise DataFormatError(f"{self.path}: truncated model file")
        out = self.data[self.off : self.off + n]
        self.off += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64s(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(np.float64)


def save_model(model, path) -> None:
    chunks = [_MAGIC, struct.pack("<I", _VERSION)]
    if isinstance(model, DetectorModel):
        sizes = model.params.layer_sizes
        chunks.append(_TAG_DNNC)
        chunks.append(struct.pack("<I", model.params.n_layers))
        chunks.append(struct.pack(f"<{len(sizes)}I", *sizes))
        chunks.append(struct.pack("<d", model.negative_slope))
        chunks.append(struct.pack("<I", model.n_features))
        chunks.append(_f64(model.feature_mean))
        chunks.append(_f64(model.feature_std))
        for w, b in zip(model.params.weights, model.params.biases):
            chunks.append(_f64(w))
            chunks.append(_f64(b))
    elif isinstance(model, DbcModel):
        chunks.append(_TAG_DBC1 if model.norm_order == 1 else _TAG_DBC2)
        chunks.append(struct.pack("<d", model.threshold))
    elif isinstance(model, KmcModel):
        kappa, m = model.centroids.shape
        chunks.append(_TAG_KMC)
        chunks.append(struct.pack("<II", kappa, m))
        chunks.append(_f64(model.centroids))
        chunks.append(struct.pack("<d", model.threshold))
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_model(path):
    """Read any model file; the returned type follows the stored tag."""
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), path)
    if r.take(4) != _MAGIC:
        raise DataFormatError(f"{path}: not a model file (bad magic)")
    version = r.u32()
    if version != _VERSION:
        raise DataFormatError(f"{path}: unsupported model format version {version}")
    tag = r.take(4)
    if tag == _TAG_DNNC:
        n_layers = r.u32()
        sizes = [r.u32() for _ in range(n_layers + 1)]
        slope = struct.unpack("<d", r.take(8))[0]
        m = r.u32()
        mean = r.f64s(m)
        std = r.f64s(m)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(r.f64s(fan_in * fan_out).reshape(fan_out, fan_in))
            biases.append(r.f64s(fan_out))
        return DetectorModel(
            params=MlpParams(weights=weights, biases=biases),
            feature_mean=mean,
            feature_std=std,
            negative_slope=slope,
        )
    if tag in (_TAG_DBC1, _TAG_DBC2):
        threshold = struct.unpack("<d", r.take(8))[0]
        return DbcModel(norm_order=1 if tag == _TAG_DBC1 else 2, threshold=threshold)
    if tag == _TAG_KMC:
        kappa = r.u32()
        m = r.u32()
        centroids = r.f64s(kappa * m).reshape(kappa, m)
        threshold = struct.unpack("<d", r.take(8))[0]
        return KmcModel(centroids=centroids, threshold=threshold)
    raise DataFormatError(f"{path}: unknown model tag {tag!r}")


def decide_any(model, f, f_prime):
    """Dispatch the pairwise decision to the model's own rule."""
    from .benchmarks import decide_dbc, decide_kmc
    from .detector import decide

    if isinstance(model, DetectorModel):
        return decide(model, f, f_prime)
    if isinstance(model, DbcModel):
        return decide_dbc(model, f, f_prime)
    if isinstance(model, KmcModel):
        return decide_kmc(model, f, f_prime)
    raise TypeError(f"cannot decide with {type(model).__name__}")
