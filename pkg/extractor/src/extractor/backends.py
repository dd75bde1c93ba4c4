"""Feature backends: frozen pretrained models plus a deterministic stub.

A backend turns a (padded) waveform into a time-major feature matrix
[frames, dim]; the extraction pipeline mean-pools over the time axis. All
models run frozen; codec backends use the continuous encoder output and
bypass the quantizer.

The ``stub`` backend needs no model weights: it frames the waveform and
applies a fixed projection seeded by the representation name. It exists so
the full pipeline (resample, pad, forward, pool, write) can run and be
tested on machines without the pretrained checkpoints; its vectors carry
real signal content (framed energy patterns) but no pretrained semantics.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .registry import info, normalize


class BackendUnavailableError(RuntimeError):
    """The requested backend cannot run here (missing package or weights)."""


class StubBackend:
    """Deterministic framed projection to the registry dimension."""

    def __init__(self, representation: str):
        rep = normalize(representation)
        self.dim = info(rep)["dim"]
        self._seed = int.from_bytes(hashlib.sha256(rep.encode()).digest()[:8], "little")
        self._proj: np.ndarray | None = None

    def _projection(self, window: int) -> np.ndarray:
        if self._proj is None or self._proj.shape[0] != window:
            rng = np.random.Generator(np.random.PCG64(self._seed))
            self._proj = rng.normal(size=(window, self.dim)).astype(np.float32) / np.sqrt(window)
        return self._proj

    def features(self, waveform: np.ndarray, sample_rate: int) -> np.ndarray:
        window = int(0.025 * sample_rate)
        hop = int(0.020 * sample_rate)
        if len(waveform) < window:
            waveform = np.pad(waveform, (0, window - len(waveform)))
        frames = np.lib.stride_tricks.sliding_window_view(waveform, window)[::hop]
        return np.tanh(frames.astype(np.float32) @ self._projection(window))


class TransformersSpeechBackend:
    """Last hidden state of a frozen transformers speech model (16 kHz)."""

    def __init__(self, model_id: str):
        try:
            import torch
            from transformers import AutoModel
        except ImportError as exc:
            raise BackendUnavailableError(
                f"torch/transformers are required for the pretrained backend ({exc})") from exc
        try:
            self._model = AutoModel.from_pretrained(model_id)
        except Exception as exc:
            raise BackendUnavailableError(
                f"cannot load {model_id}; provide a local path if the hub is unreachable "
                f"({exc})") from exc
        self._model.eval()
        self._torch = torch

    def features(self, waveform: np.ndarray, sample_rate: int) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            x = torch.from_numpy(np.asarray(waveform, dtype=np.float32))[None, :]
            out = self._model(x).last_hidden_state[0]
        return out.numpy()


class EncodecEncoderBackend:
    """Continuous encoder output of a frozen EnCodec model (24 kHz)."""

    def __init__(self, model_id: str):
        try:
            import torch
            from transformers import EncodecModel
        except ImportError as exc:
            raise BackendUnavailableError(
                f"torch/transformers are required for the EnCodec backend ({exc})") from exc
        try:
            self._model = EncodecModel.from_pretrained(model_id)
        except Exception as exc:
            raise BackendUnavailableError(
                f"cannot load {model_id}; provide a local path if the hub is unreachable "
                f"({exc})") from exc
        self._model.eval()
        self._torch = torch

    def features(self, waveform: np.ndarray, sample_rate: int) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            x = torch.from_numpy(np.asarray(waveform, dtype=np.float32))[None, None, :]
            latent = self._model.encoder(x)[0]  # [channels, frames]
        return latent.T.numpy()


_UNPORTED = {
    "xvector": "the x-vector backend needs the speechbrain package",
    "dac": "the DAC backend needs a transformers version with DacModel",
    "speechtokenizer": "the SpeechTokenizer backend needs the speechtokenizer package",
    "soundstream": "the SoundStream backend needs a SoundStream implementation",
}


def make_backend(representation: str, kind: str, model_path: str | None = None):
    """Instantiate the backend for a representation.

    kind is "stub" or "pretrained"; model_path overrides the default hub id.
    """
    rep = normalize(representation)
    if kind == "stub":
        return StubBackend(rep)
    if kind != "pretrained":
        raise BackendUnavailableError(f"unknown backend kind {kind!r}")
    source = model_path or info(rep)["source"]
    if rep in ("wavlm", "wav2vec2", "hubert"):
        return TransformersSpeechBackend(source)
    if rep == "encodec":
        return EncodecEncoderBackend(source)
    if rep == "dac":
        try:
            from transformers import DacModel  # noqa: F401
        except ImportError as exc:
            raise BackendUnavailableError(_UNPORTED["dac"]) from exc
        return _DacBackend(source)
    raise BackendUnavailableError(_UNPORTED[rep])


class _DacBackend:
    def __init__(self, model_id: str):
        import torch
        from transformers import DacModel
        try:
            self._model = DacModel.from_pretrained(model_id)
        except Exception as exc:
            raise BackendUnavailableError(
                f"cannot load {model_id} ({exc})") from exc
        self._model.eval()
        self._torch = torch

    def features(self, waveform: np.ndarray, sample_rate: int) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            x = torch.from_numpy(np.asarray(waveform, dtype=np.float32))[None, None, :]
            latent = self._model.encoder(x)[0]
        return latent.T.numpy()
