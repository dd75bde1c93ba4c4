"""Synthetic paired embedding sets for desk-scale experiments.

Two modes control how class information is distributed across the pair:

* ``redundant``: both sets place each class on its own cluster center, so a
  single representation suffices for near-perfect classification.
* ``split``: class labels are factored into two group coordinates
  (label = g2 * num_groups_a + g1). Set A's cluster centers depend only on
  g1 and set B's only on g2, so either set alone caps out at chance on the
  coordinate it does not carry, while the pair is linearly separable. This
  is the desk-scale stand-in for complementary representation families.

Sample ids and labels depend only on (classes, samples_per_class), never on
the seed, so sets generated with different seeds remain alignable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import EmbeddingSet
from .errors import ConfigError
from .seeding import substream

MODES = ("redundant", "split")


@dataclass(frozen=True)
class SynthSpec:
    classes: int = 4
    dim_a: int = 32
    dim_b: int = 32
    samples_per_class: int = 200
    cluster_spread: float = 0.25
    complementarity_mode: str = "split"
    seed: int = 0

    def __post_init__(self):
        if self.classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.classes}")
        if self.dim_a < 1 or self.dim_b < 1:
            raise ConfigError("embedding dims must be positive")
        if self.samples_per_class < 1:
            raise ConfigError("samples_per_class must be positive")
        if self.cluster_spread <= 0:
            raise ConfigError("cluster_spread must be positive")
        if self.complementarity_mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.complementarity_mode!r}")


def group_split(classes: int) -> int:
    """Number of values of the first group coordinate in split mode."""
    return math.ceil(math.sqrt(classes))


def split_coordinates(label: int, classes: int) -> tuple[int, int]:
    """Factor a label into (g1, g2); set A carries g1, set B carries g2."""
    g = group_split(classes)
    return label % g, label // g


def _centers(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    c = rng.normal(size=(count, dim))
    return c / np.linalg.norm(c, axis=1, keepdims=True)


def synth_generate(spec: SynthSpec) -> tuple[EmbeddingSet, EmbeddingSet]:
    """Generate the aligned pair of embedding sets for the spec."""
    n = spec.classes * spec.samples_per_class
    labels = np.arange(n, dtype=np.int64) % spec.classes
    ids = [f"s{i:06d}" for i in range(n)]
    class_names = [f"class{c}" for c in range(spec.classes)]

    center_rng = substream(spec.seed, "synth", "centers")
    noise_a = substream(spec.seed, "synth", "noise", "a")
    noise_b = substream(spec.seed, "synth", "noise", "b")

    if spec.complementarity_mode == "redundant":
        centers_a = _centers(center_rng, spec.classes, spec.dim_a)
        centers_b = _centers(center_rng, spec.classes, spec.dim_b)
        keys_a = labels
        keys_b = labels
    else:
        g = group_split(spec.classes)
        g1 = labels % g
        g2 = labels // g
        centers_a = _centers(center_rng, g, spec.dim_a)
        centers_b = _centers(center_rng, int(g2.max()) + 1, spec.dim_b)
        keys_a = g1
        keys_b = g2

    vecs_a = centers_a[keys_a] + spec.cluster_spread * noise_a.normal(size=(n, spec.dim_a))
    vecs_b = centers_b[keys_b] + spec.cluster_spread * noise_b.normal(size=(n, spec.dim_b))

    set_a = EmbeddingSet(name="synth-a", dim=spec.dim_a, class_names=class_names,
                         ids=list(ids), labels=labels.copy(),
                         vectors=vecs_a.astype(np.float32))
    set_b = EmbeddingSet(name="synth-b", dim=spec.dim_b, class_names=class_names,
                         ids=list(ids), labels=labels.copy(),
                         vectors=vecs_b.astype(np.float32))
    return set_a, set_b
