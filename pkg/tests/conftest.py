import numpy as np
import pytest

from shapedecomp.ecg import optimize_basis


@pytest.fixture(scope="session")
def small_basis():
    """A quick three-primitive lithium basis shared by ECG/density tests."""
    return optimize_basis([1, 2, 3], seed=3, n_cycles=3, trials_per_param=15)


@pytest.fixture(scope="session")
def two_primitive_basis(small_basis):
    """Two-primitive sub-basis for the Monte Carlo oracle comparisons."""
    from shapedecomp.ecg import ECGBasis, normalize

    basis = ECGBasis([small_basis.primitives[0], small_basis.primitives[2]])
    return normalize(basis)
