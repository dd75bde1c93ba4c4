"""WAV loading, resampling, and zero-padding."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly


class AudioReadError(Exception):
    pass


def load_wav(path) -> tuple[np.ndarray, int]:
    """Mono float32 waveform in [-1, 1] plus its sample rate."""
    try:
        rate, data = wavfile.read(Path(path))
    except Exception as exc:
        raise AudioReadError(f"cannot read {path}: {exc}") from exc
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.dtype == np.int16:
        wave = data.astype(np.float32) / 32768.0
    elif data.dtype == np.int32:
        wave = data.astype(np.float32) / 2147483648.0
    elif data.dtype == np.uint8:
        wave = (data.astype(np.float32) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        wave = data.astype(np.float32)
    else:
        raise AudioReadError(f"{path}: unsupported sample format {data.dtype}")
    if wave.size == 0:
        raise AudioReadError(f"{path}: empty audio stream")
    return wave, int(rate)


def resample(wave: np.ndarray, orig_rate: int, target_rate: int) -> np.ndarray:
    if orig_rate == target_rate:
        return wave
    g = math.gcd(orig_rate, target_rate)
    return resample_poly(wave, target_rate // g, orig_rate // g).astype(np.float32)


def pad_to(wave: np.ndarray, length: int) -> np.ndarray:
    """Zero-pad at the end to the given length; padding never truncates."""
    if len(wave) > length:
        raise ValueError(f"waveform of length {len(wave)} exceeds pad target {length}")
    if len(wave) == length:
        return wave
    return np.pad(wave, (0, length - len(wave)))
