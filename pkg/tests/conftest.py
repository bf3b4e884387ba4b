import warnings

import numpy as np
import pytest

from cwlm import fixture_path, load_setup
from cwlm.model import SIGMA_X, SIGMA_Y, SIGMA_Z, MeasurementSetup, NoiseData


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (a + a.conj().T)


def random_density(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = a @ a.conj().T
    return r / np.trace(r).real


def random_valid_setup(rng, d=2, n=2, m=2):
    """Random setup guaranteed valid: decoherence sits strictly above its minimum.

    The operator block is assembled as (measurement minimum) + (chosen PSD
    residual); the susceptibility block receives the matching antisymmetric
    part so the full coupling kernel is exactly minimum + residual.
    """
    a = rng.normal(size=(n, n))
    s_det = a @ a.T + n * np.eye(n)
    s_cross = 0.3 * rng.normal(size=(m, n))
    a_cross = rng.normal(size=(n, m))
    block = s_cross.T - 0.5j * a_cross  # (n, m): S_ai - i a_ia / 2
    schur = block.conj().T @ np.linalg.solve(s_det, block)
    w = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    residual = w @ w.conj().T + 0.1 * np.eye(m)
    target = schur + residual
    s_op = np.real(target)
    a_op = np.imag(target)  # antisymmetric since target is Hermitian
    noise = NoiseData(S_det=s_det, S_cross=s_cross, S_op=s_op, a_cross=a_cross, a_op=a_op)
    ops = tuple(random_hermitian(rng, d) for _ in range(m))
    return MeasurementSetup(
        hamiltonian=random_hermitian(rng, d), measured_ops=ops, noise=noise, label="random"
    )


@pytest.fixture
def qubit_sz():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        setup, rho0, report = load_setup(fixture_path("qubit_sz"))
    return setup, rho0


@pytest.fixture
def qubit_cross_noise():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        setup, rho0, report = load_setup(fixture_path("qubit_cross_noise"))
    return setup, rho0


@pytest.fixture
def pauli():
    return SIGMA_X, SIGMA_Y, SIGMA_Z
