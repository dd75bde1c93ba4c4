import numpy as np
import pytest
from scipy.io import wavfile


def write_tone(path, freq, seconds, rate, amplitude=0.4):
    t = np.arange(int(seconds * rate)) / rate
    wave = (amplitude * np.sin(2 * np.pi * freq * t)).astype(np.float32)
    wavfile.write(path, rate, (wave * 32767).astype(np.int16))


@pytest.fixture
def corpus(tmp_path):
    """Six utterances over three classes, mixed rates and durations."""
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    spec = [
        ("utt000", "anger", 220, 0.30, 16000),
        ("utt001", "happy", 330, 0.25, 16000),
        ("utt002", "sad", 440, 0.35, 22050),
        ("utt003", "anger", 550, 0.20, 8000),
        ("utt004", "happy", 660, 0.28, 16000),
        ("utt005", "sad", 770, 0.32, 44100),
    ]
    lines = ["sample_id,label"]
    for sid, label, freq, seconds, rate in spec:
        write_tone(corpus / f"{sid}.wav", freq, seconds, rate)
        lines.append(f"{sid},{label}")
    (corpus / "labels.csv").write_text("\n".join(lines) + "\n")
    (corpus / "classes.txt").write_text("anger\nhappy\nsad\n")
    return corpus
