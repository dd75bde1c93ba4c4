"""Embedding-set container, binary file format, pairing, and fold splitting.

File format (little-endian throughout)::

    magic "HYFE" | version u16 | dim u32 | class_count u16 |
    class names: (len u16 | UTF-8) x class_count | sample_count u64 |
    per sample: (id_len u16 | id UTF-8 | label u16 | dim x f32)

A JSON sidecar with the same basename plus ".json" duplicates the header
metadata for human inspection and carries fields the binary layout has no
slot for: the set's display name and optional representation/family tags.
The binary file is authoritative for everything it stores.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    AlignmentError,
    BadMagicError,
    DataError,
    DimMismatchError,
    NonFiniteValueError,
    StratificationError,
    TruncatedFileError,
)
from .seeding import substream

MAGIC = b"HYFE"
FORMAT_VERSION = 1

# The eight representation families and their embedding dimensions.
REPRESENTATIONS = {
    "wavlm": {"dim": 768, "family": "RLR"},
    "wav2vec2": {"dim": 768, "family": "RLR"},
    "hubert": {"dim": 768, "family": "RLR"},
    "xvector": {"dim": 512, "family": "RLR"},
    "encodec": {"dim": 375, "family": "CBR"},
    "dac": {"dim": 251, "family": "CBR"},
    "speechtokenizer": {"dim": 250, "family": "CBR"},
    "soundstream": {"dim": 256, "family": "CBR"},
}

CREMA_D_CLASSES = ("happy", "sad", "anger", "fear", "disgust", "neutral")
EMO_DB_CLASSES = ("neutral", "anger", "fear", "joy", "sad", "disgust", "boredom")


def normalize_rep_name(name: str) -> str:
    """Canonical registry key: lowercase with separators stripped."""
    key = "".join(ch for ch in name.lower() if ch.isalnum())
    if key not in REPRESENTATIONS:
        raise DataError(f"unknown representation {name!r}; known: {sorted(REPRESENTATIONS)}")
    return key


def registry_dim(name: str) -> int:
    return REPRESENTATIONS[normalize_rep_name(name)]["dim"]


def registry_family(name: str) -> str:
    return REPRESENTATIONS[normalize_rep_name(name)]["family"]


@dataclass
class EmbeddingSet:
    """A labeled collection of fixed-dimension embedding vectors."""

    name: str
    dim: int
    class_names: list[str]
    ids: list[str]
    labels: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        n = len(self.ids)
        if self.vectors.shape != (n, self.dim):
            raise DataError(f"vectors shape {self.vectors.shape} != ({n}, {self.dim})")
        if self.labels.shape != (n,):
            raise DataError(f"labels shape {self.labels.shape} != ({n},)")
        if n and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise DataError("label index outside class_names range")
        if not np.all(np.isfinite(self.vectors)):
            raise NonFiniteValueError(f"embedding set {self.name!r} contains non-finite vectors")
        if len(set(self.ids)) != n:
            raise DataError(f"embedding set {self.name!r} has duplicate sample ids")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def samples(self):
        """Iterate (vector, label, sample_id) triples."""
        for i, sid in enumerate(self.ids):
            yield self.vectors[i], int(self.labels[i]), sid

    def subset(self, indices) -> "EmbeddingSet":
        indices = np.asarray(indices)
        return EmbeddingSet(
            name=self.name,
            dim=self.dim,
            class_names=list(self.class_names),
            ids=[self.ids[i] for i in indices],
            labels=self.labels[indices].copy(),
            vectors=self.vectors[indices].copy(),
        )


def _sidecar_path(path) -> Path:
    return Path(path).with_suffix(Path(path).suffix + ".json")


def write_embedding_file(eset: EmbeddingSet, path, representation: str | None = None,
                         family: str | None = None) -> None:
    """Write the binary file plus its JSON sidecar."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", FORMAT_VERSION))
        fh.write(struct.pack("<I", eset.dim))
        fh.write(struct.pack("<H", eset.num_classes))
        for cname in eset.class_names:
            raw = cname.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
        fh.write(struct.pack("<Q", len(eset)))
        for i, sid in enumerate(eset.ids):
            raw = sid.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<H", int(eset.labels[i])))
            fh.write(np.ascontiguousarray(eset.vectors[i], dtype="<f4").tobytes())

    sidecar = {
        "name": eset.name,
        "format_version": FORMAT_VERSION,
        "dim": eset.dim,
        "class_names": list(eset.class_names),
        "sample_count": len(eset),
    }
    if representation is not None:
        sidecar["representation"] = representation
    if family is not None:
        sidecar["family"] = family
    with open(_sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_sidecar(path) -> dict:
    sc = _sidecar_path(path)
    if sc.exists():
        with open(sc, encoding="utf-8") as fh:
            return json.load(fh)
    return {}


def read_embedding_file(path, expected_dim: int | None = None) -> EmbeddingSet:
    path = Path(path)
    with open(path, "rb") as fh:
        blob = fh.read()

    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(blob):
            raise TruncatedFileError(f"{path}: truncated while reading {what}")
        chunk = blob[pos:pos + n]
        pos += n
        return chunk

    if take(4, "magic") != MAGIC:
        raise BadMagicError(f"{path}: bad magic bytes")
    (version,) = struct.unpack("<H", take(2, "version"))
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported format version {version}")
    (dim,) = struct.unpack("<I", take(4, "dim"))
    if expected_dim is not None and dim != expected_dim:
        raise DimMismatchError(f"{path}: dim {dim} != expected {expected_dim}")
    (n_classes,) = struct.unpack("<H", take(2, "class count"))
    class_names = []
    for _ in range(n_classes):
        (clen,) = struct.unpack("<H", take(2, "class name length"))
        class_names.append(take(clen, "class name").decode("utf-8"))
    (n_samples,) = struct.unpack("<Q", take(8, "sample count"))

    ids: list[str] = []
    labels = np.empty(n_samples, dtype=np.int64)
    vectors = np.empty((n_samples, dim), dtype=np.float32)
    for i in range(n_samples):
        (ilen,) = struct.unpack("<H", take(2, "sample id length"))
        ids.append(take(ilen, "sample id").decode("utf-8"))
        (label,) = struct.unpack("<H", take(2, "label"))
        labels[i] = label
        vec = np.frombuffer(take(4 * dim, f"vector {i}"), dtype="<f4")
        if not np.all(np.isfinite(vec)):
            raise NonFiniteValueError(f"{path}: sample {ids[-1]!r} has non-finite entries")
        vectors[i] = vec
    if pos != len(blob):
        raise DataError(f"{path}: {len(blob) - pos} trailing bytes after payload")

    name = read_sidecar(path).get("name", path.stem)
    return EmbeddingSet(name=name, dim=dim, class_names=class_names,
                        ids=ids, labels=labels, vectors=vectors)


@dataclass
class PairedDataset:
    """Aligned view over two embedding sets, ordered by sample id."""

    ids: list[str]
    labels: np.ndarray
    vectors_a: np.ndarray
    vectors_b: np.ndarray
    class_names: list[str]

    def __len__(self) -> int:
        return len(self.ids)

    def triples(self):
        for i in range(len(self.ids)):
            yield self.vectors_a[i], self.vectors_b[i], int(self.labels[i])


def pair_datasets(a: EmbeddingSet, b: EmbeddingSet) -> PairedDataset:
    """Align two sets on sample id; labels must agree per id."""
    index_b = {sid: i for i, sid in enumerate(b.ids)}
    only_a = sorted(set(a.ids) - set(b.ids))
    only_b = sorted(set(b.ids) - set(a.ids))
    if only_a or only_b:
        offender = (only_a + only_b)[0]
        raise AlignmentError(
            f"sample id sets differ (first offending id {offender!r}; "
            f"{len(only_a)} only in {a.name!r}, {len(only_b)} only in {b.name!r})")
    order = sorted(range(len(a.ids)), key=lambda i: a.ids[i])
    for i in order:
        j = index_b[a.ids[i]]
        if a.labels[i] != b.labels[j]:
            raise AlignmentError(
                f"label disagreement for id {a.ids[i]!r}: "
                f"{a.name!r} says {int(a.labels[i])}, {b.name!r} says {int(b.labels[j])}")
    b_order = [index_b[a.ids[i]] for i in order]
    return PairedDataset(
        ids=[a.ids[i] for i in order],
        labels=a.labels[order].copy(),
        vectors_a=a.vectors[order].copy(),
        vectors_b=b.vectors[b_order].copy(),
        class_names=list(a.class_names),
    )


@dataclass
class FoldPlan:
    """Stratified assignment of sample ids to folds."""

    num_folds: int
    assignments: dict[str, int]
    seed: int

    def fold_ids(self, fold: int) -> list[str]:
        return [sid for sid, f in self.assignments.items() if f == fold]

    def indices(self, eset_ids: list[str], fold: int) -> tuple[np.ndarray, np.ndarray]:
        """(train_indices, test_indices) into eset_ids for the given test fold."""
        test, train = [], []
        for i, sid in enumerate(eset_ids):
            (test if self.assignments[sid] == fold else train).append(i)
        return np.asarray(train, dtype=np.int64), np.asarray(test, dtype=np.int64)


def make_folds(eset: EmbeddingSet, k: int = 5, seed: int = 0,
               stratified: bool = True) -> FoldPlan:
    """Deal samples into k folds, stratified by class unless disabled."""
    if k < 2:
        raise StratificationError(f"need at least 2 folds, got {k} (a single fold leaves no training data)")
    if len(eset) < k:
        raise StratificationError(f"cannot split {len(eset)} samples into {k} folds")

    assignments: dict[str, int] = {}
    fill = np.zeros(k, dtype=np.int64)
    if stratified:
        groups = [np.flatnonzero(eset.labels == c) for c in range(eset.num_classes)]
        for c, idx in enumerate(groups):
            if len(idx) < k:
                raise StratificationError(
                    f"class {eset.class_names[c]!r} has {len(idx)} samples, fewer than {k} folds")
    else:
        groups = [np.arange(len(eset))]

    rng = substream(seed, "folds")
    for idx in groups:
        idx = idx.copy()
        rng.shuffle(idx)
        per, extra = divmod(len(idx), k)
        # folds currently lightest take the remainder, keeping overall sizes within 1
        order = np.lexsort((np.arange(k), fill))
        quota = np.full(k, per, dtype=np.int64)
        quota[order[:extra]] += 1
        pos = 0
        for f in range(k):
            for i in idx[pos:pos + quota[f]]:
                assignments[eset.ids[i]] = f
            fill[f] += quota[f]
            pos += quota[f]
    return FoldPlan(num_folds=k, assignments=assignments, seed=seed)
