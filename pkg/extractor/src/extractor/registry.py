"""The eight supported representations: dims, families, and sample rates.

Mirrors the registry the downstream pipeline validates against. Audio is
resampled to 16 kHz before every model except EnCodec, which runs at 24 kHz.
"""

from __future__ import annotations

REPRESENTATIONS = {
    "wavlm": {"dim": 768, "family": "RLR", "sample_rate": 16000,
              "source": "microsoft/wavlm-base"},
    "wav2vec2": {"dim": 768, "family": "RLR", "sample_rate": 16000,
                 "source": "facebook/wav2vec2-base"},
    "hubert": {"dim": 768, "family": "RLR", "sample_rate": 16000,
               "source": "facebook/hubert-base-ls960"},
    "xvector": {"dim": 512, "family": "RLR", "sample_rate": 16000,
                "source": "speechbrain/spkrec-xvect-voxceleb"},
    "encodec": {"dim": 375, "family": "CBR", "sample_rate": 24000,
                "source": "facebook/encodec_24khz"},
    "dac": {"dim": 251, "family": "CBR", "sample_rate": 16000,
            "source": "descript/dac_16khz"},
    "speechtokenizer": {"dim": 250, "family": "CBR", "sample_rate": 16000,
                        "source": "fnlp/SpeechTokenizer"},
    "soundstream": {"dim": 256, "family": "CBR", "sample_rate": 16000,
                    "source": "haydenshively/SoundStream"},
}

CREMA_D_CLASSES = ("happy", "sad", "anger", "fear", "disgust", "neutral")
EMO_DB_CLASSES = ("neutral", "anger", "fear", "joy", "sad", "disgust", "boredom")


class UnknownRepresentationError(ValueError):
    pass


def normalize(name: str) -> str:
    key = "".join(ch for ch in name.lower() if ch.isalnum())
    if key not in REPRESENTATIONS:
        raise UnknownRepresentationError(
            f"unknown representation {name!r}; known: {sorted(REPRESENTATIONS)}")
    return key


def info(name: str) -> dict:
    return REPRESENTATIONS[normalize(name)]
