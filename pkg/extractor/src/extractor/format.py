"""Writer and reader for the shared `.hyfe` embedding file format.

This is an independent implementation of the interchange format (the
contract between extractor and trainer); the layout is little-endian:

    magic "HYFE" | version u16 | dim u32 | class_count u16 |
    class names: (len u16 | UTF-8) x class_count | sample_count u64 |
    per sample: (id_len u16 | id UTF-8 | label u16 | dim x f32)

A JSON sidecar (same name + ".json") mirrors the header and carries the
display name plus representation/family tags.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"HYFE"
FORMAT_VERSION = 1


class FormatError(Exception):
    pass


@dataclass
class EmbeddingFile:
    name: str
    dim: int
    class_names: list[str]
    ids: list[str]
    labels: np.ndarray
    vectors: np.ndarray


def write(out_path, name: str, class_names: list[str], ids: list[str],
          labels: np.ndarray, vectors: np.ndarray,
          representation: str | None = None, family: str | None = None) -> None:
    out_path = Path(out_path)
    vectors = np.asarray(vectors, dtype=np.float32)
    labels = np.asarray(labels, dtype=np.int64)
    n, dim = vectors.shape
    if len(ids) != n or labels.shape != (n,):
        raise FormatError("ids, labels, and vectors disagree on sample count")
    if not np.all(np.isfinite(vectors)):
        raise FormatError("refusing to write non-finite vectors")

    with open(out_path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<H", FORMAT_VERSION))
        fh.write(struct.pack("<I", dim))
        fh.write(struct.pack("<H", len(class_names)))
        for cname in class_names:
            raw = cname.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
        fh.write(struct.pack("<Q", n))
        for i, sid in enumerate(ids):
            raw = sid.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<H", int(labels[i])))
            fh.write(np.ascontiguousarray(vectors[i], dtype="<f4").tobytes())

    sidecar = {
        "name": name,
        "format_version": FORMAT_VERSION,
        "dim": dim,
        "class_names": list(class_names),
        "sample_count": n,
    }
    if representation is not None:
        sidecar["representation"] = representation
    if family is not None:
        sidecar["family"] = family
    with open(out_path.with_suffix(out_path.suffix + ".json"), "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read(path) -> EmbeddingFile:
    path = Path(path)
    blob = path.read_bytes()
    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(blob):
            raise FormatError(f"{path}: truncated while reading {what}")
        chunk = blob[pos:pos + n]
        pos += n
        return chunk

    if take(4, "magic") != MAGIC:
        raise FormatError(f"{path}: bad magic bytes")
    (version,) = struct.unpack("<H", take(2, "version"))
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    (dim,) = struct.unpack("<I", take(4, "dim"))
    (n_classes,) = struct.unpack("<H", take(2, "class count"))
    class_names = []
    for _ in range(n_classes):
        (clen,) = struct.unpack("<H", take(2, "class name length"))
        class_names.append(take(clen, "class name").decode("utf-8"))
    (n,) = struct.unpack("<Q", take(8, "sample count"))
    ids: list[str] = []
    labels = np.empty(n, dtype=np.int64)
    vectors = np.empty((n, dim), dtype=np.float32)
    for i in range(n):
        (ilen,) = struct.unpack("<H", take(2, "id length"))
        ids.append(take(ilen, "id").decode("utf-8"))
        (labels[i],) = struct.unpack("<H", take(2, "label"))
        vectors[i] = np.frombuffer(take(4 * dim, "vector"), dtype="<f4")
    if pos != len(blob):
        raise FormatError(f"{path}: trailing bytes after payload")

    sidecar_path = path.with_suffix(path.suffix + ".json")
    name = path.stem
    if sidecar_path.exists():
        name = json.loads(sidecar_path.read_text()).get("name", name)
    return EmbeddingFile(name=name, dim=dim, class_names=class_names,
                         ids=ids, labels=labels, vectors=vectors)
