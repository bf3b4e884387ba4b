"""Output rescaling and separation into independent equal-noise detectors.

An orthogonal transformation diagonalizes the detector noise matrix and a
rescaling brings every diagonal noise to the common value S (the geometric
mean of the noise eigenvalues, so the choice is deterministic and
scale-balanced).  New outputs are s' = T s; counting fields transform
contravariantly, which fixes how the cross blocks transform:

    S_det' = T S_det T^T = S * I,   a_cross' = T a_cross,
    S_cross' = S_cross T^T,         S_op, a_op unchanged.

The per-detector operators of the separated form are

    D_i = a_ia O_a,  R_i = 2 S_ia O_a,  K_i = (R_i - i D_i)/2,  B_i = K_i / S.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularNoise
from .model import (
    MeasurementSetup,
    NoiseData,
    dissipator,
    lindblad_set,
    residual_lindblad_set,
)


@dataclass(frozen=True)
class SeparatedSetup:
    """A measurement setup whose detector noise matrix is S * identity."""

    base: MeasurementSetup
    noise_scale: float       # the common diagonal noise S
    transform: np.ndarray    # T with s_new = T s_old
    B_ops: tuple
    D_ops: tuple
    R_ops: tuple
    K_ops: tuple

    @property
    def n_detectors(self) -> int:
        return self.base.n_detectors


def separate(setup: MeasurementSetup) -> SeparatedSetup:
    """Transform a setup into separated, equal-noise form."""
    s_det = setup.noise.S_det
    n = s_det.shape[0]
    eigs, q = np.linalg.eigh(0.5 * (s_det + s_det.T))
    if eigs[0] <= 1e-14 * max(abs(eigs[-1]), 1e-300):
        raise SingularNoise("S_det must be positive definite to separate outputs")
    s_bar = float(np.exp(np.mean(np.log(eigs))))
    if np.max(np.abs(s_det - s_bar * np.eye(n))) <= 1e-12 * s_bar:
        transform = np.eye(n)
        new_noise = setup.noise
    else:
        transform = np.sqrt(s_bar) * (q / np.sqrt(eigs)) @ q.T
        # symmetric square-root form keeps T close to the identity; any
        # orthogonal mixing on the left would be equally valid
        noise = setup.noise
        new_noise = NoiseData(
            S_det=s_bar * np.eye(n),
            S_cross=noise.S_cross @ transform.T,
            S_op=noise.S_op,
            a_cross=transform @ noise.a_cross,
            a_op=noise.a_op,
        )
    base = setup.with_noise(new_noise)
    b_ops, d_ops, r_ops, k_ops = _detector_operators(base, s_bar)
    return SeparatedSetup(
        base=base,
        noise_scale=s_bar,
        transform=transform,
        B_ops=b_ops,
        D_ops=d_ops,
        R_ops=r_ops,
        K_ops=k_ops,
    )


def _detector_operators(setup: MeasurementSetup, noise_scale: float):
    noise = setup.noise
    dim = setup.dim
    b_ops, d_ops, r_ops, k_ops = [], [], [], []
    for i in range(noise.n_detectors):
        d_i = np.zeros((dim, dim), dtype=complex)
        r_i = np.zeros((dim, dim), dtype=complex)
        for a in range(noise.n_operators):
            d_i += noise.a_cross[i, a] * setup.measured_ops[a]
            r_i += 2.0 * noise.S_cross[a, i] * setup.measured_ops[a]
        k_i = 0.5 * (r_i - 1j * d_i)
        b_ops.append(k_i / noise_scale)
        d_ops.append(d_i)
        r_ops.append(r_i)
        k_ops.append(k_i)
    return tuple(b_ops), tuple(d_ops), tuple(r_ops), tuple(k_ops)


def build_detector_operators(separated: SeparatedSetup):
    """(B, D, R, K) operator lists of a separated setup; K = S B = (R - iD)/2."""
    return separated.B_ops, separated.D_ops, separated.R_ops, separated.K_ops


def measurement_dissipator(separated: SeparatedSetup):
    """Closure for the minimum measurement back-action S sum_i D[B_i]."""
    s_bar = separated.noise_scale
    b_ops = separated.B_ops

    def apply(rho):
        out = np.zeros_like(rho, dtype=complex)
        for b in b_ops:
            bd = b.conj().T
            bdb = bd @ b
            out += s_bar * (b @ rho @ bd - 0.5 * (bdb @ rho + rho @ bdb))
        return out

    return apply


def equivalent_generator_check(separated: SeparatedSetup, rho_samples) -> float:
    """Max deviation between the B-operator route and the diagonalized channels.

    Route one applies the full decoherence superoperator built from the
    operator coupling matrix; route two applies the minimum measurement
    back-action through the B operators plus the residual channels.  The
    residual kernel must be positive semidefinite (re-verifying the
    minimum-decoherence inequality); a negative eigenvalue beyond tolerance
    raises from the residual channel construction.
    """
    full = dissipator(lindblad_set(separated.base))
    meas = measurement_dissipator(separated)
    resid = dissipator(residual_lindblad_set(separated.base))
    worst = 0.0
    for rho in rho_samples:
        rho = np.asarray(rho, dtype=complex)
        delta = full(rho) - (meas(rho) + resid(rho))
        worst = max(worst, float(np.max(np.abs(delta))))
    return worst
