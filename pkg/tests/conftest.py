import numpy as np
import pytest

from tse_search import Waveform, synthesize_scene


@pytest.fixture(scope="session")
def scene():
    """One orthogonal equal-energy scene shared by read-only tests."""
    return synthesize_scene(11, duration=1.0, snr_db=0.0)


def make_orthogonal_pair(seed: int, n: int = 16000, sample_rate: int = 16000):
    """Two zero-mean, orthogonal, equal-norm waveforms (test oracle helper)."""
    rng = np.random.default_rng(seed)
    s = rng.normal(0, 0.1, n)
    i = rng.normal(0, 0.1, n)
    s = s - s.mean()
    i = i - i.mean()
    i = i - (np.sum(i * s) / np.sum(s * s)) * s
    i = i - i.mean()  # projection against a zero-mean vector keeps this ~0
    i = i * (np.linalg.norm(s) / np.linalg.norm(i))
    return Waveform(s, sample_rate), Waveform(i, sample_rate)
