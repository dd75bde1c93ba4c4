"""The four downstream architectures and their parameter handling.

Single-representation models: an FCN (dense 128 + ReLU, dropout, output
layer) and a CNN (two 1-d conv layers with 64 and 128 filters, kernel 3,
ReLU, then the same FCN block). An embedding vector enters the CNN as a
one-channel sequence of its own length.

Fusion models consume two representations. Both encode each branch with the
CNN's conv stack and flatten. The concatenation baseline joins the flattened
branches and applies the FCN block. The hyperbolic model projects each
flattened branch to a common fusion width, lifts both into the Poincare ball
with the exponential map, combines them by Moebius addition (branch order is
configurable; default A then B), maps back with the log map, and applies the
FCN block. Geometry runs in float64 and its gradients flow through the tape.

Weight init is fan-in-scaled uniform, U(-1/sqrt(fan_in), +1/sqrt(fan_in)),
biases zero, drawn from named substreams of the build seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, DataError, ShapeError
from .geometry import PoincareConfig, exp_map_zero_diff, log_map_zero_diff, mobius_add_diff
from .seeding import substream

KINDS = ("fcn", "cnn", "concat", "hyfuse")
FUSION_KINDS = ("concat", "hyfuse")

CHECKPOINT_MAGIC = b"HYFM"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of one architecture."""

    kind: str
    input_dims: tuple[int, ...]
    num_classes: int
    hidden_units: int = 128
    conv_filters: tuple[int, int] = (64, 128)
    kernel_size: int = 3
    dropout_rate: float = 0.2
    fusion_width: int = 64
    fusion_order: str = "ab"
    poincare: PoincareConfig = field(default_factory=PoincareConfig)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        dims = self.input_dims
        if isinstance(dims, int):
            dims = (dims,)
        dims = tuple(int(d) for d in dims)
        object.__setattr__(self, "input_dims", dims)
        object.__setattr__(self, "conv_filters", tuple(int(f) for f in self.conv_filters))

        expected = 2 if self.kind in FUSION_KINDS else 1
        if len(dims) != expected:
            raise ConfigError(f"{self.kind} takes exactly {expected} input dim(s), got {dims}")
        if any(d < 1 for d in dims):
            raise ConfigError(f"input dims must be positive, got {dims}")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.hidden_units < 1 or self.fusion_width < 1:
            raise ConfigError("hidden_units and fusion_width must be positive")
        if len(self.conv_filters) != 2 or any(f < 1 for f in self.conv_filters):
            raise ConfigError(f"conv_filters must be two positive counts, got {self.conv_filters}")
        if self.kernel_size < 1:
            raise ConfigError(f"kernel_size must be positive, got {self.kernel_size}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.fusion_order not in ("ab", "ba"):
            raise ConfigError(f"fusion_order must be 'ab' or 'ba', got {self.fusion_order!r}")
        if self.kind != "fcn":
            shrink = 2 * (self.kernel_size - 1)
            for d in dims:
                if d - shrink < 1:
                    raise ConfigError(
                        f"input dim {d} too short for two valid kernel-{self.kernel_size} convolutions")

    def conv_out_len(self, dim: int) -> int:
        return dim - 2 * (self.kernel_size - 1)

    def flat_width(self, dim: int) -> int:
        return self.conv_filters[1] * self.conv_out_len(dim)


class ModelParams:
    """Named collection of weight and bias tensors, keyed by layer path."""

    def __init__(self, tensors: dict[str, Tensor]):
        self._tensors = dict(sorted(tensors.items()))

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self):
        return iter(self._tensors)

    def items(self):
        return self._tensors.items()

    def names(self) -> list[str]:
        return list(self._tensors)

    def count(self) -> int:
        return sum(t.data.size for t in self._tensors.values())

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.zero_grad()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._tensors.items()}

    def restore(self, values: dict[str, np.ndarray]) -> None:
        for name, t in self._tensors.items():
            np.copyto(t.data, values[name])


def _param_plan(spec: ModelSpec) -> dict[str, tuple[tuple[int, ...], int]]:
    """Map layer path -> (shape, fan_in) for every trainable tensor."""
    f1, f2 = spec.conv_filters
    k = spec.kernel_size
    plan: dict[str, tuple[tuple[int, ...], int]] = {}

    def conv_stack(prefix: str) -> None:
        plan[f"{prefix}conv1.w"] = ((f1, 1, k), k)
        plan[f"{prefix}conv1.b"] = ((f1,), 0)
        plan[f"{prefix}conv2.w"] = ((f2, f1, k), f1 * k)
        plan[f"{prefix}conv2.b"] = ((f2,), 0)

    def fcn_block(in_width: int) -> None:
        plan["hidden.w"] = ((spec.hidden_units, in_width), in_width)
        plan["hidden.b"] = ((spec.hidden_units,), 0)
        plan["out.w"] = ((spec.num_classes, spec.hidden_units), spec.hidden_units)
        plan["out.b"] = ((spec.num_classes,), 0)

    if spec.kind == "fcn":
        fcn_block(spec.input_dims[0])
    elif spec.kind == "cnn":
        conv_stack("")
        fcn_block(spec.flat_width(spec.input_dims[0]))
    elif spec.kind == "concat":
        conv_stack("branch_a.")
        conv_stack("branch_b.")
        fcn_block(spec.flat_width(spec.input_dims[0]) + spec.flat_width(spec.input_dims[1]))
    else:  # hyfuse
        for prefix, dim in (("branch_a.", spec.input_dims[0]), ("branch_b.", spec.input_dims[1])):
            conv_stack(prefix)
            flat = spec.flat_width(dim)
            plan[f"{prefix}proj.w"] = ((spec.fusion_width, flat), flat)
            plan[f"{prefix}proj.b"] = ((spec.fusion_width,), 0)
        fcn_block(spec.fusion_width)
    return plan


def build(spec: ModelSpec, seed: int, dtype=np.float32) -> ModelParams:
    """Initialize parameters for the spec, deterministically in the seed.

    float32 is the training dtype; float64 exists for gradient checking.
    """
    tensors: dict[str, Tensor] = {}
    for name, (shape, fan_in) in _param_plan(spec).items():
        if fan_in == 0:
            data = np.zeros(shape, dtype=dtype)
        else:
            bound = 1.0 / np.sqrt(fan_in)
            rng = substream(seed, "init", name)
            data = rng.uniform(-bound, bound, size=shape).astype(dtype)
        tensors[name] = Tensor(data, requires_grad=True)
    return ModelParams(tensors)


def parameter_count(spec: ModelSpec) -> int:
    return sum(int(np.prod(shape)) for shape, _ in _param_plan(spec).values())


def _as_tensor(batch) -> Tensor:
    if isinstance(batch, Tensor):
        return batch
    arr = np.asarray(batch)
    if arr.dtype != np.float64:
        arr = arr.astype(np.float32)
    return Tensor(arr)


def _encode_branch(spec: ModelSpec, params: ModelParams, x: Tensor, prefix: str) -> Tensor:
    """conv(64) -> ReLU -> conv(128) -> ReLU -> flatten."""
    seq = ad.reshape(x, (x.shape[0], 1, x.shape[1]))
    seq = ad.relu(ad.conv1d(seq, params[f"{prefix}conv1.w"], params[f"{prefix}conv1.b"]))
    seq = ad.relu(ad.conv1d(seq, params[f"{prefix}conv2.w"], params[f"{prefix}conv2.b"]))
    return ad.flatten(seq)


def _head(spec: ModelSpec, params: ModelParams, feats: Tensor,
          training: bool, rng) -> tuple[Tensor, Tensor]:
    hidden = ad.relu(ad.dense(feats, params["hidden.w"], params["hidden.b"]))
    dropped = ad.dropout(hidden, spec.dropout_rate, training, rng)
    logits = ad.dense(dropped, params["out.w"], params["out.b"])
    return logits, hidden


def _check_dim(x: Tensor, dim: int, which: str) -> None:
    if x.data.ndim != 2 or x.shape[1] != dim:
        raise ShapeError(f"{which} batch must be [B, {dim}], got {x.shape}")


def _forward_parts(spec: ModelSpec, params: ModelParams, inputs: tuple,
                   training: bool, rng, probe=None) -> tuple[Tensor, Tensor]:
    if spec.kind in FUSION_KINDS:
        if len(inputs) != 2:
            raise ShapeError(f"{spec.kind} forward takes two batches, got {len(inputs)}")
        a, b = (_as_tensor(t) for t in inputs)
        _check_dim(a, spec.input_dims[0], "first")
        _check_dim(b, spec.input_dims[1], "second")
        if a.shape[0] != b.shape[0]:
            raise ShapeError(f"batch sizes differ: {a.shape[0]} vs {b.shape[0]}")
        fa = _encode_branch(spec, params, a, "branch_a.")
        fb = _encode_branch(spec, params, b, "branch_b.")
        if spec.kind == "concat":
            feats = ad.concat(fa, fb)
        else:
            pa = ad.dense(fa, params["branch_a.proj.w"], params["branch_a.proj.b"])
            pb = ad.dense(fb, params["branch_b.proj.w"], params["branch_b.proj.b"])
            ha = exp_map_zero_diff(pa, spec.poincare)
            hb = exp_map_zero_diff(pb, spec.poincare)
            first, second = (ha, hb) if spec.fusion_order == "ab" else (hb, ha)
            fused = mobius_add_diff(first, second, spec.poincare)
            if probe is not None:
                probe(fused.data)
            feats = log_map_zero_diff(fused, spec.poincare)
    else:
        if len(inputs) != 1:
            raise ShapeError(f"{spec.kind} forward takes one batch, got {len(inputs)}")
        x = _as_tensor(inputs[0])
        _check_dim(x, spec.input_dims[0], "input")
        feats = x if spec.kind == "fcn" else _encode_branch(spec, params, x, "")
    return _head(spec, params, feats, training, rng)


def forward(spec: ModelSpec, params: ModelParams, inputs: tuple,
            training: bool = False, rng=None, probe=None) -> Tensor:
    """Logits [B, classes] for a tuple of one or two input batches."""
    logits, _ = _forward_parts(spec, params, inputs, training, rng, probe)
    return logits


def forward_single(spec: ModelSpec, params: ModelParams, batch,
                   training: bool = False, rng=None) -> Tensor:
    return forward(spec, params, (batch,), training, rng)


def forward_concat(spec: ModelSpec, params: ModelParams, batch_a, batch_b,
                   training: bool = False, rng=None) -> Tensor:
    return forward(spec, params, (batch_a, batch_b), training, rng)


def forward_hyfuse(spec: ModelSpec, params: ModelParams, batch_a, batch_b,
                   training: bool = False, rng=None, probe=None) -> Tensor:
    return forward(spec, params, (batch_a, batch_b), training, rng, probe)


def penultimate_features(spec: ModelSpec, params: ModelParams, *batches) -> np.ndarray:
    """The hidden activation before the output layer, evaluation mode."""
    _, hidden = _forward_parts(spec, params, tuple(batches), training=False, rng=None)
    return hidden.data.copy()


def predict(spec: ModelSpec, params: ModelParams, inputs: tuple) -> np.ndarray:
    """Class predictions [B] in evaluation mode."""
    logits = forward(spec, params, inputs, training=False)
    return np.argmax(logits.data, axis=1)


# --- checkpoint container ---
#
# Layout (all integers little-endian):
#   magic "HYFM" | version u16 | header_len u32 | header UTF-8 |
#   param_count u32 | for each param in name order:
#     name_len u16 | name UTF-8 | ndim u8 | dims u32... | float32 LE data
# The header is canonical "key=value" lines sorted by key, one per line,
# describing the ModelSpec. Floats are serialized with repr() so they
# round-trip exactly.

def _spec_header(spec: ModelSpec) -> str:
    kv = {
        "kind": spec.kind,
        "input_dims": ",".join(str(d) for d in spec.input_dims),
        "num_classes": str(spec.num_classes),
        "hidden_units": str(spec.hidden_units),
        "conv_filters": ",".join(str(f) for f in spec.conv_filters),
        "kernel_size": str(spec.kernel_size),
        "dropout_rate": repr(float(spec.dropout_rate)),
        "fusion_width": str(spec.fusion_width),
        "fusion_order": spec.fusion_order,
        "curvature": repr(float(spec.poincare.curvature)),
        "ball_epsilon": repr(float(spec.poincare.ball_epsilon)),
    }
    return "".join(f"{k}={v}\n" for k, v in sorted(kv.items()))


def _spec_from_header(text: str) -> ModelSpec:
    kv: dict[str, str] = {}
    for line in text.splitlines():
        if line:
            key, _, value = line.partition("=")
            kv[key] = value
    try:
        return ModelSpec(
            kind=kv["kind"],
            input_dims=tuple(int(d) for d in kv["input_dims"].split(",")),
            num_classes=int(kv["num_classes"]),
            hidden_units=int(kv["hidden_units"]),
            conv_filters=tuple(int(f) for f in kv["conv_filters"].split(",")),
            kernel_size=int(kv["kernel_size"]),
            dropout_rate=float(kv["dropout_rate"]),
            fusion_width=int(kv["fusion_width"]),
            fusion_order=kv["fusion_order"],
            poincare=PoincareConfig(float(kv["curvature"]), float(kv["ball_epsilon"])),
        )
    except KeyError as exc:
        raise DataError(f"checkpoint header missing key {exc}") from exc


def save_checkpoint(path, spec: ModelSpec, params: ModelParams) -> None:
    header = _spec_header(spec).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<H", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(struct.pack("<I", len(params.names())))
        for name, t in params.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", t.data.ndim))
            for d in t.data.shape:
                fh.write(struct.pack("<I", d))
            fh.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())


def load_checkpoint(path) -> tuple[ModelSpec, ModelParams]:
    with open(path, "rb") as fh:
        blob = fh.read()

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(blob):
            raise DataError(f"checkpoint truncated while reading {what}")
        chunk = blob[pos:pos + n]
        pos += n
        return chunk

    pos = 0
    if take(4, "magic") != CHECKPOINT_MAGIC:
        raise DataError(f"not a model checkpoint: {path}")
    (version,) = struct.unpack("<H", take(2, "version"))
    if version != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version {version}")
    (hlen,) = struct.unpack("<I", take(4, "header length"))
    spec = _spec_from_header(take(hlen, "header").decode("utf-8"))
    (count,) = struct.unpack("<I", take(4, "parameter count"))
    tensors: dict[str, Tensor] = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2, "name length"))
        name = take(nlen, "name").decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1, "ndim"))
        shape = tuple(struct.unpack("<I", take(4, "dim"))[0] for _ in range(ndim))
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4
        data = np.frombuffer(take(nbytes, f"data for {name}"), dtype="<f4").reshape(shape)
        tensors[name] = Tensor(data.astype(np.float32, copy=True), requires_grad=True)
    params = ModelParams(tensors)
    expected = set(_param_plan(spec))
    if set(params.names()) != expected:
        raise DataError("checkpoint parameters do not match the spec's layer plan")
    return spec, params
