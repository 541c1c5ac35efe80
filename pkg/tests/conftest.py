import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from covspeech.audio_io import WavClip


@pytest.fixture
def noise_clip():
    rng = np.random.default_rng(42)
    x = np.clip(rng.normal(0.0, 0.2, 16000), -1.0, 1.0)
    return WavClip(x.astype(np.float32), 16000)


@pytest.fixture
def tone_440():
    t = np.arange(32000) / 16000.0
    return WavClip((0.8 * np.sin(2 * np.pi * 440.0 * t)).astype(np.float32), 16000)
