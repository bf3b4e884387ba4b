"""Counting-field engine: pseudo-density evolution, generating function, P(s).

The pseudo-density matrix rho~(chi; t) equals the density matrix at chi = 0
and its trace is the generating function of the integrated detector outputs.
The output distribution is recovered with the inverse transform

    P(s) = (2 pi)^-N * integral dchi exp(+i s.chi) Tr rho~(chi; t),

so the generating function is Tr rho~(chi) = E[exp(-i chi.s)] and an
eigenstate with drift velocity v contributes exp(-1/2 chi.S.chi t - i chi.v t).
With this convention an eigenstate of the measured operators drifts towards
+v t; cross-engine agreement pins all signs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StepTooLarge
from .model import MeasurementSetup, lindblad_set
from .numerics import UniformGrid, fourier_quadrature_table
from .tables import DistributionTable


def coupling_operators(setup: MeasurementSetup) -> list:
    """Per-detector operators K_i = sum_a (S_ai - i a_ia / 2) O_a."""
    noise = setup.noise
    out = []
    for i in range(noise.n_detectors):
        k = np.zeros((setup.dim, setup.dim), dtype=complex)
        for a in range(noise.n_operators):
            k += (noise.S_cross[a, i] - 0.5j * noise.a_cross[i, a]) * setup.measured_ops[a]
        out.append(k)
    return out


def superop_matrix(hamiltonian, channels, dim) -> np.ndarray:
    """d^2 x d^2 matrix of X -> -i[H, X] + sum_g (L X L^dag - {L^dag L, X}/2).

    Acts on row-major vectorized matrices: vec(A X B) = kron(A, B.T) vec(X).
    """
    eye = np.eye(dim, dtype=complex)
    m = np.kron(-1j * hamiltonian, eye) + np.kron(eye, (1j * hamiltonian).T)
    for _, l_op in channels:
        ld = l_op.conj().T
        ldl = ld @ l_op
        m += np.kron(l_op, l_op.conj())
        m -= 0.5 * (np.kron(ldl, eye) + np.kron(eye, ldl.T))
    return m


class MeasurementGenerator:
    """Precomputed right-hand side of the counting-field evolution equation.

    drho~/dt = -i[H, rho~] - (chi.S.chi / 2) rho~
               + sum_i chi_i (K_i rho~ - rho~ K_i^dag)
               + sum_g (L_g rho~ L_g^dag - {L_g^dag L_g, rho~}/2)
    """

    def __init__(self, setup: MeasurementSetup):
        self.setup = setup
        self.dim = setup.dim
        self.S_det = setup.noise.S_det
        self.channels = lindblad_set(setup)
        self.k_ops = np.array(coupling_operators(setup))  # (N, d, d)
        self.k_dag = self.k_ops.conj().swapaxes(-1, -2)
        self.base = superop_matrix(setup.hamiltonian, self.channels, setup.dim)

    def rate_bound(self, chi_max: float = 0.0) -> float:
        """Crude bound on the fastest rate in the generator, for step-size choice."""
        rate = 2.0 * np.linalg.norm(self.setup.hamiltonian, 2)
        for c, l_op in self.channels:
            rate += 2.0 * np.linalg.norm(l_op, 2) ** 2
        s_max = float(np.max(np.linalg.eigvalsh(self.S_det)))
        rate += 0.5 * chi_max**2 * s_max
        rate += 2.0 * chi_max * sum(np.linalg.norm(k, 2) for k in self.k_ops)
        return max(rate, 1e-12)

    def rhs(self, rhos: np.ndarray, chis: np.ndarray) -> np.ndarray:
        """Batched right-hand side: rhos (n, d, d), chis (n, N)."""
        n, d = rhos.shape[0], self.dim
        out = (rhos.reshape(n, d * d) @ self.base.T).reshape(n, d, d)
        quad = np.einsum("ni,ij,nj->n", chis, self.S_det, chis)
        out -= 0.5 * quad[:, None, None] * rhos
        if self.k_ops.shape[0]:
            out += np.einsum("ni,iab,nbc->nac", chis, self.k_ops, rhos)
            out -= np.einsum("nab,ibc,ni->nac", rhos, self.k_dag, chis)
        return out

    def evolve(self, rhos: np.ndarray, chis: np.ndarray, t: float, dt: float) -> np.ndarray:
        """RK4 integration from 0 to t with an instability guard per step."""
        if t < 0:
            raise ValueError("t must be nonnegative")
        if dt <= 0:
            raise ValueError("dt must be positive")
        rhos = np.array(rhos, dtype=complex)
        floor = 1e-12 * max(float(np.max(np.abs(rhos))), 1e-300)
        n_steps = max(int(round(t / dt)), 1) if t > 0 else 0
        dt_eff = t / n_steps if n_steps else 0.0
        for _ in range(n_steps):
            k1 = self.rhs(rhos, chis)
            step_size = np.max(np.abs(k1), axis=(1, 2)) * dt_eff
            state_size = np.maximum(np.max(np.abs(rhos), axis=(1, 2)), floor)
            if np.any(step_size > 0.1 * state_size):
                worst = float(np.max(step_size / state_size))
                raise StepTooLarge(
                    f"per-step change {worst:.2e} of state norm exceeds 0.1; reduce dt"
                )
            k2 = self.rhs(rhos + 0.5 * dt_eff * k1, chis)
            k3 = self.rhs(rhos + 0.5 * dt_eff * k2, chis)
            k4 = self.rhs(rhos + dt_eff * k3, chis)
            rhos = rhos + (dt_eff / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return rhos


@dataclass(frozen=True)
class PseudoDensityField:
    """Pseudo-density matrices on a counting-field grid at a given time."""

    chi_grid: UniformGrid
    matrices: np.ndarray  # shape (*chi_grid.shape, d, d)
    time: float

    def trace_values(self) -> np.ndarray:
        return np.trace(self.matrices, axis1=-2, axis2=-1)


def fcs_rhs(rho: np.ndarray, chi, setup: MeasurementSetup) -> np.ndarray:
    """Time derivative of the pseudo-density matrix at a single counting field."""
    gen = MeasurementGenerator(setup)
    chi = np.atleast_1d(np.asarray(chi, dtype=float))
    return gen.rhs(np.asarray(rho, dtype=complex)[None], chi[None])[0]


def evolve_pseudo_density(setup, rho0, chi, t, dt) -> np.ndarray:
    """Integrate the pseudo-density matrix at one counting field from 0 to t."""
    gen = MeasurementGenerator(setup)
    chi = np.atleast_1d(np.asarray(chi, dtype=float))
    return gen.evolve(np.asarray(rho0, dtype=complex)[None], chi[None], t, dt)[0]


def generating_function(setup, rho0, chi, t, dt) -> complex:
    """Trace of the evolved pseudo-density matrix; equals 1 at chi = 0."""
    return complex(np.trace(evolve_pseudo_density(setup, rho0, chi, t, dt)))


def evolve_pseudo_density_field(setup, rho0, chi_grid: UniformGrid, t, dt) -> PseudoDensityField:
    """Evolve the full counting-field grid; nodes are independent and batched."""
    gen = MeasurementGenerator(setup)
    if chi_grid.ndim != setup.n_detectors:
        raise ValueError("chi grid dimensionality must match the detector count")
    chis = chi_grid.nodes().reshape(-1, chi_grid.ndim)
    rhos = np.broadcast_to(
        np.asarray(rho0, dtype=complex), (chis.shape[0], setup.dim, setup.dim)
    ).copy()
    final = gen.evolve(rhos, chis, t, dt)
    return PseudoDensityField(
        chi_grid=chi_grid,
        matrices=final.reshape(*chi_grid.shape, setup.dim, setup.dim),
        time=t,
    )


def default_chi_grid(setup, t, points: int = 128, factor: float = 8.0) -> UniformGrid:
    """chi extent 8 / sqrt(S_min t) per axis, wide enough for the GF to decay."""
    s_min = float(np.min(np.linalg.eigvalsh(setup.noise.S_det)))
    if s_min <= 0:
        raise ValueError("S_det must be positive definite to choose a chi grid")
    extent = factor / np.sqrt(s_min * max(t, 1e-12))
    return UniformGrid.make(extent, points, ndim=setup.n_detectors)


def stable_dt(setup, chi_max: float = 0.0, safety: float = 0.05) -> float:
    """Step size keeping each RK4 step well inside the instability guard."""
    return safety / MeasurementGenerator(setup).rate_bound(chi_max)


def output_distribution_fcs(
    setup,
    rho0,
    t,
    chi_grid: UniformGrid | None = None,
    s_grid: UniformGrid | None = None,
    dt: float | None = None,
) -> DistributionTable:
    """P(s) via inverse Fourier transform of the generating function.

    Limited to one or two detectors (inverse-transform memory scales as the
    grid to the Nth power); cumulants remain available for any N.
    """
    n = setup.n_detectors
    if n > 2:
        raise ValueError("inverse transform supports at most 2 detectors; use cumulants")
    if chi_grid is None:
        chi_grid = default_chi_grid(setup, t)
    if s_grid is None:
        s_grid = _default_s_grid(setup, t)
    if dt is None:
        dt = stable_dt(setup, chi_max=float(np.max(chi_grid.extents)))
    field = evolve_pseudo_density_field(setup, rho0, chi_grid, t, dt)
    gf = field.trace_values()
    table = fourier_quadrature_table(gf, chi_grid, s_grid.axes)
    peak = float(np.max(np.abs(table)))
    residue = float(np.max(np.abs(table.imag)))
    negativity = float(np.min(table.real))
    values = table.real
    mass = float(np.sum(values)) * float(np.prod(s_grid.spacings))
    meta = {
        "engine": "fcs",
        "t": t,
        "dt": dt,
        "imag_residue": residue,
        "negativity": negativity,
        "mass": mass,
    }
    out = DistributionTable(axes=tuple(s_grid.axes), values=values, meta=meta)
    if peak > 0 and (residue > 1e-6 * peak or negativity < -1e-6 * peak):
        raise StepTooLarge(
            f"distribution failed realness/positivity gates (residue {residue:.2e}, "
            f"negativity {negativity:.2e}, peak {peak:.2e}); refine chi grid or dt"
        )
    if abs(mass - 1.0) > 1e-3:
        raise StepTooLarge(f"distribution mass {mass:.6f} deviates from 1 beyond 1e-3")
    return out


def _default_s_grid(setup, t, points: int = 257) -> UniformGrid:
    noise = setup.noise
    s_max_noise = float(np.max(np.linalg.eigvalsh(noise.S_det)))
    drift = 0.0
    for i in range(noise.n_detectors):
        bound = sum(
            abs(noise.a_cross[i, a]) * np.linalg.norm(setup.measured_ops[a], 2)
            for a in range(noise.n_operators)
        )
        drift = max(drift, bound)
    extent = drift * t + 6.0 * np.sqrt(s_max_noise * t)
    return UniformGrid.make(extent, points, ndim=setup.n_detectors)


def cumulants(setup, rho0, t, order: int = 2, dt: float | None = None):
    """Mean vector and covariance matrix from finite differences of ln GF at 0.

    Central differences with step h = 1e-3 / sqrt(t).  ``order`` may be 1
    (mean only, covariance returned as None) or 2.
    """
    if order > 2:
        raise ValueError("only cumulants up to order 2 are implemented")
    n = setup.n_detectors
    h = 1e-3 / np.sqrt(max(t, 1e-12))
    points = [np.zeros(n)]
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        points.extend([e.copy(), -e])
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for i, j in pairs:
        for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            e = np.zeros(n)
            e[i], e[j] = si * h, sj * h
            points.append(e)
    chis = np.array(points)
    gen = MeasurementGenerator(setup)
    if dt is None:
        dt = min(stable_dt(setup) / 4.0, t / 50.0)
    rhos = np.broadcast_to(np.asarray(rho0, dtype=complex), (len(points), setup.dim, setup.dim)).copy()
    final = gen.evolve(rhos, chis, t, dt)
    ln_gf = np.log(np.trace(final, axis1=-2, axis2=-1))

    mean = np.empty(n)
    for i in range(n):
        plus, minus = ln_gf[1 + 2 * i], ln_gf[2 + 2 * i]
        mean[i] = np.real(1j * (plus - minus) / (2.0 * h))
    if order < 2:
        return mean, None
    cov = np.empty((n, n))
    for i in range(n):
        plus, minus = ln_gf[1 + 2 * i], ln_gf[2 + 2 * i]
        cov[i, i] = -np.real((plus - 2.0 * ln_gf[0] + minus) / h**2)
    base = 1 + 2 * n
    for idx, (i, j) in enumerate(pairs):
        pp, pm, mp, mm = ln_gf[base + 4 * idx : base + 4 * idx + 4]
        val = -np.real((pp - pm - mp + mm) / (4.0 * h**2))
        cov[i, j] = cov[j, i] = val
    return mean, cov
