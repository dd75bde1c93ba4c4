"""Extraction jobs and pairing verification.

A corpus is a directory of per-utterance WAV files plus a label map
``labels.csv`` (header ``sample_id,label``; sample_id is the file stem).
An optional ``classes.txt`` (one class per line) pins the class order;
without it, classes are the sorted distinct labels of the map.

Extraction: resample every utterance to the representation's rate, zero-pad
all of them to the corpus maximum duration, run the frozen backend, and
mean-pool its features over time into one vector per utterance. Utterances
that cannot be processed (unreadable audio, unknown label, backend output of
the wrong dimension) are skipped with a logged reason and reported.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import AudioReadError, load_wav, pad_to, resample
from .backends import make_backend
from .format import read, write
from .registry import info, normalize

log = logging.getLogger("extractor")


class CorpusError(Exception):
    pass


@dataclass(frozen=True)
class ExtractionJob:
    corpus: Path
    representation: str
    output: Path
    backend: str = "pretrained"
    model_path: str | None = None
    pooling: str = "mean"

    def __post_init__(self):
        object.__setattr__(self, "corpus", Path(self.corpus))
        object.__setattr__(self, "output", Path(self.output))
        object.__setattr__(self, "representation", normalize(self.representation))
        if self.pooling != "mean":
            raise ValueError("pooling is fixed to mean over time")

    @property
    def sample_rate(self) -> int:
        return info(self.representation)["sample_rate"]


@dataclass
class ExtractionResult:
    written: int
    skipped: list[tuple[str, str]] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.skipped


def load_label_map(corpus: Path, labels_file: str = "labels.csv") -> tuple[dict[str, str], list[str]]:
    path = corpus / labels_file
    if not path.exists():
        raise CorpusError(f"label map {path} not found")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["sample_id", "label"]:
        raise CorpusError(f"{path}: expected header 'sample_id,label'")
    labels = {}
    for row in rows[1:]:
        if len(row) != 2:
            raise CorpusError(f"{path}: malformed row {row!r}")
        labels[row[0].strip()] = row[1].strip()
    if not labels:
        raise CorpusError(f"{path}: no label entries")

    classes_path = corpus / "classes.txt"
    if classes_path.exists():
        classes = [line.strip() for line in classes_path.read_text().splitlines() if line.strip()]
    else:
        classes = sorted(set(labels.values()))
    return labels, classes


def extract(job: ExtractionJob, backend=None) -> ExtractionResult:
    """Run one extraction job; returns counts plus per-utterance skip reasons."""
    if backend is None:
        backend = make_backend(job.representation, job.backend, job.model_path)
    expected_dim = info(job.representation)["dim"]
    rate = job.sample_rate

    label_map, classes = load_label_map(job.corpus)
    class_index = {c: i for i, c in enumerate(classes)}

    wavs = sorted(job.corpus.glob("*.wav"))
    if not wavs:
        raise CorpusError(f"no .wav files in {job.corpus}")

    skipped: list[tuple[str, str]] = []
    staged: list[tuple[str, int, np.ndarray]] = []
    for path in wavs:
        sid = path.stem
        if sid not in label_map:
            skipped.append((sid, "no entry in label map"))
            continue
        label = label_map[sid]
        if label not in class_index:
            skipped.append((sid, f"unknown label {label!r}"))
            continue
        try:
            wave, orig_rate = load_wav(path)
        except AudioReadError as exc:
            skipped.append((sid, f"unreadable audio: {exc}"))
            continue
        staged.append((sid, class_index[label], resample(wave, orig_rate, rate)))

    if not staged:
        raise CorpusError(f"every utterance in {job.corpus} was skipped")

    # pad to the corpus maximum duration before any model forward
    max_len = max(len(w) for _, _, w in staged)
    ids: list[str] = []
    labels: list[int] = []
    vectors: list[np.ndarray] = []
    for sid, label, wave in staged:
        feats = backend.features(pad_to(wave, max_len), rate)
        vec = np.asarray(feats, dtype=np.float32).mean(axis=0)
        if vec.shape != (expected_dim,):
            skipped.append((sid, f"backend produced dim {vec.shape}, registry says {expected_dim}"))
            continue
        ids.append(sid)
        labels.append(label)
        vectors.append(vec)

    for sid, reason in skipped:
        log.warning("skipped %s: %s", sid, reason)
    if not ids:
        raise CorpusError("no utterance passed the dimension check against the registry")

    write(job.output, name=job.representation, class_names=classes, ids=ids,
          labels=np.asarray(labels), vectors=np.stack(vectors),
          representation=job.representation, family=info(job.representation)["family"])
    return ExtractionResult(written=len(ids), skipped=skipped)


@dataclass
class PairingReport:
    count_a: int
    count_b: int
    missing_in_a: list[str]
    missing_in_b: list[str]
    label_disagreements: list[tuple[str, str, str]]

    @property
    def aligned(self) -> bool:
        return not (self.missing_in_a or self.missing_in_b or self.label_disagreements)


def verify_pairing(file_a, file_b) -> PairingReport:
    """Check that two embedding files can be consumed as an aligned pair."""
    a, b = read(file_a), read(file_b)
    ids_a, ids_b = set(a.ids), set(b.ids)
    index_a = {sid: i for i, sid in enumerate(a.ids)}
    index_b = {sid: i for i, sid in enumerate(b.ids)}

    disagreements = []
    for sid in sorted(ids_a & ids_b):
        la = a.class_names[a.labels[index_a[sid]]]
        lb = b.class_names[b.labels[index_b[sid]]]
        if la != lb:
            disagreements.append((sid, la, lb))
    return PairingReport(
        count_a=len(a.ids),
        count_b=len(b.ids),
        missing_in_a=sorted(ids_b - ids_a),
        missing_in_b=sorted(ids_a - ids_b),
        label_disagreements=disagreements,
    )
