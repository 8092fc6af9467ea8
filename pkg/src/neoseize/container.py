"""Deployable model container: preprocessing echo + PCA + ProtoNN.

Layout (little-endian)::

    "NSDM" | version:u8 | n_sections:u8
    then per section: tag:4s | length:u32 | payload[length]

Sections are ``PREP`` (preprocessing and feature settings), ``PCA_`` and
``PNN_``. Every float is stored as float32; containers quantize their
parameters on construction, so an in-memory container and its reloaded copy
score identically.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import protonn
from .errors import BadMagic, DimensionMismatch, SectionLengthMismatch, VersionUnsupported
from .features import FeatureConfig, extract_features
from .pca import PcaModel
from .preprocess import PreprocessConfig, preprocess_segment

MAGIC = b"NSDM"
VERSION = 1

_PREP = struct.Struct("<ffffiIIIIIf")
_PCA_HEAD = struct.Struct("<II")
_PNN_HEAD = struct.Struct("<IIIIffffB")


def _q(x):
    """Round to the nearest float32, kept as float64."""
    return np.asarray(x, dtype=np.float32).astype(np.float64)


def _qf(x: float) -> float:
    return float(np.float32(x))


@dataclass(frozen=True)
class ModelContainer:
    preprocess: PreprocessConfig
    features: FeatureConfig
    fs_source: float
    n_channels: int
    pca: PcaModel
    classifier: protonn.ProtoNNModel

    def __post_init__(self):
        if self.pca.n_components != self.classifier.input_dim:
            raise DimensionMismatch(
                f"PCA emits {self.pca.n_components} dims, ProtoNN expects {self.classifier.input_dim}"
            )
        if self.pca.input_dim != 11 * self.n_channels:
            raise DimensionMismatch(
                f"PCA expects {self.pca.input_dim} features, {self.n_channels} channels give {11 * self.n_channels}"
            )
        pre = self.preprocess
        object.__setattr__(self, "preprocess", replace(
            pre, fs_target=_qf(pre.fs_target), highpass_cutoff=_qf(pre.highpass_cutoff)))
        object.__setattr__(self, "features", replace(self.features, r_factor=_qf(self.features.r_factor)))
        object.__setattr__(self, "fs_source", _qf(self.fs_source))
        object.__setattr__(self, "pca", PcaModel(
            mean=_q(self.pca.mean), scale=_q(self.pca.scale),
            components=_q(self.pca.components),
            explained_variance_ratio=_q(self.pca.explained_variance_ratio)))
        clf = self.classifier
        object.__setattr__(self, "classifier", protonn.ProtoNNModel(
            W=_q(clf.W), B=_q(clf.B), Z=_q(clf.Z), gamma=_qf(clf.gamma),
            sparsity=tuple(_qf(s) for s in clf.sparsity)))

    @property
    def model_bytes(self) -> int:
        return protonn.model_size_bytes(self.classifier)

    @property
    def feature_dim(self) -> int:
        return self.pca.input_dim

    def score_features(self, features) -> np.ndarray:
        return protonn.score(self.classifier, self.pca.transform(features))

    def predict_features(self, features):
        return protonn.decide(self.score_features(features))

    def check_channels(self, n_channels: int) -> None:
        if n_channels != self.n_channels:
            raise DimensionMismatch(
                f"model was trained on {self.n_channels} channels "
                f"(d={self.feature_dim}), data has {n_channels}"
            )

    def infer_segment(self, raw: np.ndarray) -> int:
        """Raw ``(channels, samples)`` segment at ``fs_source`` -> class label."""
        self.check_channels(raw.shape[0])
        window = preprocess_segment(raw, self.fs_source, self.preprocess)
        fv = extract_features(window, self.features)
        return self.predict_features(fv.values)

    # --- serialization ---

    def to_bytes(self) -> bytes:
        sections = [(b"PREP", _encode_prep(self)), (b"PCA_", _encode_pca(self.pca)),
                    (b"PNN_", _encode_protonn(self.classifier))]
        out = io.BytesIO()
        out.write(MAGIC + struct.pack("<BB", VERSION, len(sections)))
        for tag, payload in sections:
            out.write(tag + struct.pack("<I", len(payload)))
            out.write(payload)
        return out.getvalue()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ModelContainer":
        if len(raw) < 6 or raw[:4] != MAGIC:
            raise BadMagic(f"not a model container (magic {raw[:4]!r})")
        version, n_sections = struct.unpack_from("<BB", raw, 4)
        if version != VERSION:
            raise VersionUnsupported(f"container version {version}, supported {VERSION}")
        pos = 6
        sections = {}
        for _ in range(n_sections):
            if pos + 8 > len(raw):
                raise SectionLengthMismatch("container truncated inside a section header")
            tag = raw[pos : pos + 4]
            (length,) = struct.unpack_from("<I", raw, pos + 4)
            pos += 8
            if pos + length > len(raw):
                raise SectionLengthMismatch(
                    f"section {tag!r} declares {length} bytes, {len(raw) - pos} remain"
                )
            sections[tag] = raw[pos : pos + length]
            pos += length
        if pos != len(raw):
            raise SectionLengthMismatch(f"{len(raw) - pos} trailing bytes after last section")
        missing = {b"PREP", b"PCA_", b"PNN_"} - sections.keys()
        if missing:
            raise SectionLengthMismatch(f"missing sections {sorted(missing)}")
        pre, feat, fs_source, n_channels = _decode_prep(sections[b"PREP"])
        return cls(preprocess=pre, features=feat, fs_source=fs_source, n_channels=n_channels,
                   pca=_decode_pca(sections[b"PCA_"]), classifier=_decode_protonn(sections[b"PNN_"]))


def save_model(container: ModelContainer, path) -> None:
    Path(path).write_bytes(container.to_bytes())


def load_model(path) -> ModelContainer:
    return ModelContainer.from_bytes(Path(path).read_bytes())


# --- section codecs -----------------------------------------------------------


class _Reader:
    def __init__(self, raw: bytes, name: str):
        self.raw, self.pos, self.name = raw, 0, name

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise SectionLengthMismatch(f"section {self.name} shorter than its contents")
        chunk = self.raw[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, st: struct.Struct):
        return st.unpack(self.take(st.size))

    def floats(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * n), "<f4").astype(np.float64)

    def uints(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * n), "<u4").astype(np.int64)

    def done(self):
        if self.pos != len(self.raw):
            raise SectionLengthMismatch(
                f"section {self.name} declares {len(self.raw)} bytes, contents use {self.pos}"
            )


def _f32(a) -> bytes:
    return np.asarray(a, dtype="<f4").tobytes()


def _encode_prep(c: ModelContainer) -> bytes:
    p, f = c.preprocess, c.features
    threshold = -1 if p.label_threshold is None else p.label_threshold
    return _PREP.pack(c.fs_source, p.fs_target, p.highpass_cutoff, float(p.window_s), threshold,
                      c.n_channels, f.shannon_bins, f.perm_order, f.perm_delay, f.entropy_m,
                      f.r_factor)


def _decode_prep(raw: bytes):
    r = _Reader(raw, "PREP")
    (fs_source, fs_target, cutoff, window_s, threshold, n_channels,
     bins, order, delay, m, r_factor) = r.unpack(_PREP)
    r.done()
    pre = PreprocessConfig(fs_target=fs_target, highpass_cutoff=cutoff, window_s=int(window_s),
                           label_threshold=None if threshold < 0 else threshold)
    feat = FeatureConfig(shannon_bins=bins, perm_order=order, perm_delay=delay, entropy_m=m,
                         r_factor=r_factor)
    return pre, feat, fs_source, n_channels


def _encode_pca(p: PcaModel) -> bytes:
    D, d = p.input_dim, p.n_components
    return (_PCA_HEAD.pack(D, d) + _f32(p.mean) + _f32(p.scale) + _f32(p.components)
            + _f32(p.explained_variance_ratio))


def _decode_pca(raw: bytes) -> PcaModel:
    r = _Reader(raw, "PCA_")
    D, d = r.unpack(_PCA_HEAD)
    model = PcaModel(mean=r.floats(D), scale=r.floats(D), components=r.floats(d * D).reshape(d, D),
                     explained_variance_ratio=r.floats(d))
    r.done()
    return model


def _encode_protonn(m: protonn.ProtoNNModel) -> bytes:
    blocks = (m.W, m.B, m.Z)
    sparse_flags = 0
    body = io.BytesIO()
    for bit, (M, s) in enumerate(zip(blocks, m.sparsity)):
        if s < 1.0:
            sparse_flags |= 1 << bit
            flat = M.reshape(-1)
            idx = np.flatnonzero(flat)
            body.write(struct.pack("<I", idx.size))
            body.write(idx.astype("<u4").tobytes())
            body.write(_f32(flat[idx]))
        else:
            body.write(_f32(M))
    head = _PNN_HEAD.pack(m.input_dim, m.proj_dim, m.n_prototypes, m.n_labels, m.gamma,
                          *m.sparsity, sparse_flags)
    return head + body.getvalue()


def _decode_protonn(raw: bytes) -> protonn.ProtoNNModel:
    r = _Reader(raw, "PNN_")
    d, dh, m, L, gamma, s_w, s_b, s_z, flags = r.unpack(_PNN_HEAD)
    blocks = []
    for bit, shape in enumerate(((dh, d), (dh, m), (L, m))):
        numel = shape[0] * shape[1]
        if flags & (1 << bit):
            (nnz,) = struct.unpack("<I", r.take(4))
            idx = r.uints(nnz)
            if nnz and idx.max() >= numel:
                raise SectionLengthMismatch("sparse index outside its block")
            flat = np.zeros(numel)
            flat[idx] = r.floats(nnz)
            blocks.append(flat.reshape(shape))
        else:
            blocks.append(r.floats(numel).reshape(shape))
    r.done()
    W, B, Z = blocks
    return protonn.ProtoNNModel(W=W, B=B, Z=Z, gamma=gamma, sparsity=(s_w, s_b, s_z))
