import numpy as np
import pytest

from rolealign import generate_formation, sample_dataset


@pytest.fixture(scope="session")
def easy_tgp():
    """A well-separated 6-role formation with 300 frames; fast to fit."""
    tmpl = generate_formation(6, separation=3.0, seed=11)
    ds, truth = sample_dataset(tmpl, 300, swap_rate=0.05, seed=11)
    return tmpl, ds, truth


@pytest.fixture(scope="session")
def tiny_tgp():
    tmpl = generate_formation(4, separation=3.0, seed=3)
    ds, truth = sample_dataset(tmpl, 120, seed=3)
    return tmpl, ds, truth
