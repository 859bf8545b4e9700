import numpy as np
import pytest

from xlbeam import ArrayConfig, build_hybrid_codebook, build_subarray_codebook
from xlbeam.training import design_all

PAPER_WAVELENGTH = 0.003


@pytest.fixture(scope="session")
def cfg512():
    return ArrayConfig(n_antennas=512, n_rf=4, wavelength=PAPER_WAVELENGTH)


@pytest.fixture(scope="session")
def cfg256():
    return ArrayConfig(n_antennas=256, n_rf=4, wavelength=PAPER_WAVELENGTH)


@pytest.fixture(scope="session")
def cfg128():
    """Desk-scale configuration used by the fast Monte Carlo tests."""
    return ArrayConfig(n_antennas=128, n_rf=4, wavelength=PAPER_WAVELENGTH)


@pytest.fixture(scope="session")
def desk_workspace(cfg128):
    """Desk-scale codebook (Q=128, S=3 from the density bound) plus design."""
    book = build_hybrid_codebook(cfg128, 128, 3)
    sub = build_subarray_codebook(cfg128)
    return book, sub, design_all(book, sub)


@pytest.fixture(scope="session")
def full_workspace(cfg512):
    """Full-scale codebook at the reference settings (Q=512, S=11)."""
    book = build_hybrid_codebook(cfg512, 512, 11)
    sub = build_subarray_codebook(cfg512)
    return book, sub, design_all(book, sub)


@pytest.fixture()
def rng():
    return np.random.default_rng(0xA11CE)
