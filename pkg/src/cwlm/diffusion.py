"""Drift-diffusion engine for the density matrix in integrated-output space.

Evolves rho(s; t), a d x d block per node of a uniform s-grid, under

    drho/dt = -i[H, rho] + (1/2) S_ij d_i d_j rho
              + i (d_i rho K_i^dag - K_i d_i rho)
              + sum_g (L_g rho L_g^dag - {L_g^dag L_g, rho}/2)

with K_i = sum_a (S_ai - i a_ia/2) O_a.  Diagonal elements of a commuting
setup then obey plain advection-diffusion with velocity v_i = a_ia O_a
(drift towards +v t), which fixes the sign of the first-order term; the
counting-field engine is the cross-check.

Boundaries are absorbing (the field is clamped to zero outside the grid) and
the mass leaking out is reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CFLViolation,
    HamiltonianMixesEigenbasis,
    NonCommutingOperators,
    SingularNoise,
)
from .model import MeasurementSetup, lindblad_set
from .fcs import coupling_operators, superop_matrix
from .numerics import UniformGrid
from .tables import DistributionTable


@dataclass(frozen=True)
class OutputField:
    """Density-matrix blocks over a uniform grid of integrated outputs."""

    s_grid: UniformGrid
    blocks: np.ndarray  # shape (*s_grid.shape, d, d)
    time: float
    leakage: float = 0.0  # trace mass lost through the absorbing boundary

    @property
    def dim(self) -> int:
        return self.blocks.shape[-1]

    def trace_values(self) -> np.ndarray:
        return np.real(np.trace(self.blocks, axis1=-2, axis2=-1))

    def total_trace(self) -> float:
        return float(np.sum(self.trace_values()) * np.prod(self.s_grid.spacings))


def _d1(arr: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Central first difference with zero (absorbing) boundary values."""
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (1, 1)
    p = np.pad(arr, pad)
    up = np.take(p, range(2, arr.shape[axis] + 2), axis=axis)
    dn = np.take(p, range(0, arr.shape[axis]), axis=axis)
    return (up - dn) / (2.0 * h)


def _d2(arr: np.ndarray, axis: int, h: float) -> np.ndarray:
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (1, 1)
    p = np.pad(arr, pad)
    up = np.take(p, range(2, arr.shape[axis] + 2), axis=axis)
    dn = np.take(p, range(0, arr.shape[axis]), axis=axis)
    return (up - 2.0 * arr + dn) / h**2


class DiffusionEngine:
    """Cached superoperators and stencils for one setup on one grid."""

    def __init__(self, setup: MeasurementSetup, s_grid: UniformGrid):
        if s_grid.ndim != setup.n_detectors:
            raise ValueError("s grid dimensionality must match the detector count")
        self.setup = setup
        self.s_grid = s_grid
        self.dim = setup.dim
        self.S_det = setup.noise.S_det
        self.spacings = s_grid.spacings
        d = setup.dim
        eye = np.eye(d, dtype=complex)
        self.decay = superop_matrix(setup.hamiltonian, lindblad_set(setup), d)
        self.k_super = []
        for k in coupling_operators(setup):
            # X -> i (X K^dag - K X) on row-major vectorized blocks
            self.k_super.append(np.kron(-1j * k, eye) + np.kron(eye, (1j * k.conj().T).T))

    def max_drift(self) -> float:
        noise = self.setup.noise
        v = 0.0
        for i in range(noise.n_detectors):
            v = max(
                v,
                sum(
                    abs(noise.a_cross[i, a]) * np.linalg.norm(self.setup.measured_ops[a], 2)
                    for a in range(noise.n_operators)
                ),
            )
        return v

    def check_step(self, dt: float) -> None:
        h_min = float(np.min(self.spacings))
        s_max = float(np.max(np.linalg.eigvalsh(self.S_det)))
        if s_max * dt / h_min**2 > 0.25:
            raise CFLViolation(
                f"diffusion CFL bound violated: S_max*dt/h^2 = {s_max * dt / h_min**2:.3f} > 0.25"
            )
        v = self.max_drift()
        if v * dt > 0.5 * h_min:
            raise CFLViolation(
                f"drift resolution bound violated: |v|max*dt = {v * dt:.3e} > h/2 = {0.5 * h_min:.3e}"
            )

    def rhs(self, blocks: np.ndarray) -> np.ndarray:
        grid_shape = blocks.shape[:-2]
        d = self.dim
        flat = blocks.reshape(-1, d * d)
        out = (flat @ self.decay.T).reshape(blocks.shape)
        n = self.s_grid.ndim
        grads = [_d1(blocks, axis=k, h=self.spacings[k]) for k in range(n)]
        for i in range(n):
            out += 0.5 * self.S_det[i, i] * _d2(blocks, axis=i, h=self.spacings[i])
            for j in range(i + 1, n):
                if self.S_det[i, j] != 0.0:
                    out += self.S_det[i, j] * _d1(grads[i], axis=j, h=self.spacings[j])
            if self.k_super:
                out += (grads[i].reshape(-1, d * d) @ self.k_super[i].T).reshape(blocks.shape)
        return out


def dd_rhs(field: OutputField, setup: MeasurementSetup) -> OutputField:
    """Time derivative of an output field (blocks replaced by their rates)."""
    engine = DiffusionEngine(setup, field.s_grid)
    return OutputField(
        s_grid=field.s_grid,
        blocks=engine.rhs(np.asarray(field.blocks, dtype=complex)),
        time=field.time,
        leakage=field.leakage,
    )


def initial_field(setup, rho0, s_grid: UniformGrid, init_width: float | None = None) -> OutputField:
    """delta(s) start regularized as a narrow Gaussian of width 2h (configurable)."""
    rho0 = np.asarray(rho0, dtype=complex)
    axes = s_grid.axes
    profile = np.ones(s_grid.shape)
    for k, ax in enumerate(axes):
        sigma = init_width if init_width is not None else 2.0 * s_grid.spacings[k]
        g = np.exp(-0.5 * (ax / sigma) ** 2)
        sl = [None] * s_grid.ndim
        sl[k] = slice(None)
        profile = profile * g[tuple(sl)]
    profile /= np.sum(profile) * np.prod(s_grid.spacings)
    return OutputField(
        s_grid=s_grid,
        blocks=profile[..., None, None] * rho0,
        time=0.0,
    )


def evolve_field(
    setup,
    rho0,
    t: float,
    dt: float,
    s_grid: UniformGrid,
    init_width: float | None = None,
) -> OutputField:
    """RK4 time integration of the drift-diffusion equation from a delta start."""
    engine = DiffusionEngine(setup, s_grid)
    engine.check_step(dt)
    start = initial_field(setup, rho0, s_grid, init_width)
    blocks = start.blocks.astype(complex)
    mass0 = start.total_trace()
    n_steps = max(int(round(t / dt)), 0)
    dt_eff = t / n_steps if n_steps else 0.0
    for _ in range(n_steps):
        k1 = engine.rhs(blocks)
        k2 = engine.rhs(blocks + 0.5 * dt_eff * k1)
        k3 = engine.rhs(blocks + 0.5 * dt_eff * k2)
        k4 = engine.rhs(blocks + dt_eff * k3)
        blocks = blocks + (dt_eff / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    result = OutputField(s_grid=s_grid, blocks=blocks, time=t)
    leak = mass0 - result.total_trace()
    return OutputField(s_grid=s_grid, blocks=blocks, time=t, leakage=leak)


def free_propagator(s, t: float, S_det) -> np.ndarray | float:
    """Gaussian density of pure detector noise: zero mean, covariance S_det * t."""
    S_det = np.atleast_2d(np.asarray(S_det, dtype=float))
    n = S_det.shape[0]
    eigs = np.linalg.eigvalsh(S_det)
    if t <= 0:
        raise ValueError("t must be positive")
    if eigs[0] <= 1e-14 * max(abs(eigs[-1]), 1e-300):
        raise SingularNoise("S_det must be positive definite")
    s = np.asarray(s, dtype=float)
    scalar = s.ndim <= 1
    pts = np.atleast_2d(s)
    if pts.shape[-1] != n:
        raise ValueError(f"s must have {n} components per point")
    quad = np.einsum("...i,ij,...j->...", pts, np.linalg.inv(S_det), pts)
    val = (2.0 * np.pi * t) ** (-n / 2.0) / np.sqrt(np.linalg.det(S_det)) * np.exp(-quad / (2.0 * t))
    return float(val[0]) if scalar else val


def _propagator_complex(z: np.ndarray, t: float, S_det: np.ndarray) -> complex:
    """Analytic continuation of the free propagator to complex arguments."""
    n = S_det.shape[0]
    quad = z @ np.linalg.inv(S_det) @ z  # plain transpose, no conjugation
    return (2.0 * np.pi * t) ** (-n / 2.0) / np.sqrt(np.linalg.det(S_det)) * np.exp(
        -quad / (2.0 * t)
    )


def _commutator_scale(a: np.ndarray, b: np.ndarray) -> float:
    comm = a @ b - b @ a
    scale = max(np.linalg.norm(a, 2) * np.linalg.norm(b, 2), 1e-300)
    return float(np.max(np.abs(comm))) / scale


def joint_eigenbasis(mats, tol: float = 1e-10) -> np.ndarray:
    """Common unitary eigenbasis of a family of pairwise commuting Hermitian matrices."""
    d = mats[0].shape[0]
    v = np.eye(d, dtype=complex)
    blocks = [np.arange(d)]
    for m in mats:
        scale = max(float(np.max(np.abs(m))), 1e-300)
        new_blocks = []
        for idx in blocks:
            sub = v[:, idx].conj().T @ m @ v[:, idx]
            w, u = np.linalg.eigh(0.5 * (sub + sub.conj().T))
            v[:, idx] = v[:, idx] @ u
            start = 0
            for k in range(1, len(idx) + 1):
                if k == len(idx) or w[k] - w[k - 1] > tol * scale:
                    new_blocks.append(idx[start:k])
                    start = k
        blocks = new_blocks
    return v


@dataclass(frozen=True)
class CommutingSolution:
    """Closed-form ingredients for mutually commuting measured operators.

    For joint eigenstates a, b: drift velocities v[:, a], noise tilts
    w[:, a], decoherence rates Gamma_d[a, b] and phase rates gamma[a, b].
    Diagonal pairs have Gamma_d = 0 and equal drifts by construction.
    """

    basis: np.ndarray        # unitary, columns are joint eigenvectors
    op_eigs: np.ndarray      # (M, d) eigenvalues of each measured operator
    h_eigs: np.ndarray       # (d,) Hamiltonian eigenvalues in the same basis
    v: np.ndarray            # (N, d) drift velocity per eigenstate
    w: np.ndarray            # (N, d) cross-noise tilt per eigenstate
    Gamma_d: np.ndarray      # (d, d) decoherence rate per state pair
    gamma: np.ndarray        # (d, d) phase rate per state pair


def commuting_data(setup: MeasurementSetup, tol: float = 1e-12) -> CommutingSolution:
    """Validate commutativity and assemble the closed-form solution data."""
    ops = setup.measured_ops
    m = len(ops)
    for a in range(m):
        for b in range(a + 1, m):
            if _commutator_scale(ops[a], ops[b]) > tol:
                raise NonCommutingOperators(
                    f"operators {a} and {b} do not commute (relative {_commutator_scale(ops[a], ops[b]):.2e})"
                )
    h = setup.hamiltonian
    if np.linalg.norm(h, 2) > 0:
        for a in range(m):
            if _commutator_scale(h, ops[a]) > tol:
                raise HamiltonianMixesEigenbasis(
                    f"Hamiltonian does not commute with operator {a}"
                )
    basis = joint_eigenbasis(list(ops) + [h])
    op_eigs = np.array([np.real(np.diag(basis.conj().T @ o @ basis)) for o in ops])
    h_eigs = np.real(np.diag(basis.conj().T @ h @ basis))
    noise = setup.noise
    d = setup.dim
    v = noise.a_cross @ op_eigs if m else np.zeros((noise.n_detectors, d))
    w = noise.S_cross.T @ op_eigs if m else np.zeros((noise.n_detectors, d))
    gamma_d = np.zeros((d, d))
    gamma = np.zeros((d, d))
    for a in range(d):
        for b in range(d):
            diff = op_eigs[:, a] - op_eigs[:, b] if m else np.zeros(0)
            gamma_d[a, b] = 0.5 * diff @ noise.S_op @ diff if m else 0.0
            if m:
                oa, ob = op_eigs[:, a], op_eigs[:, b]
                gamma[a, b] = 0.5 * (ob @ noise.a_op @ oa - oa @ noise.a_op @ ob)
    return CommutingSolution(
        basis=basis, op_eigs=op_eigs, h_eigs=h_eigs, v=v, w=w, Gamma_d=gamma_d, gamma=gamma
    )


def commuting_solution(
    setup,
    rho0,
    t: float,
    s,
    gamma_override: np.ndarray | None = None,
) -> np.ndarray:
    """Closed-form rho(s, t) for commuting measured operators from a delta start.

    In the joint eigenbasis the diagonal elements are drifted free
    propagators, rho_aa(0) * P0(s - v_a t); off-diagonal elements acquire a
    complex shift from the cross noises, damping exp(-Gamma_d t) and a phase
    rotation.  ``gamma_override`` replaces the computed phase-rate matrix
    (it defaults to the susceptibility-driven expression, which vanishes when
    a_op = 0).
    """
    data = commuting_data(setup)
    d = setup.dim
    s = np.atleast_1d(np.asarray(s, dtype=float))
    gamma = data.gamma if gamma_override is None else np.asarray(gamma_override, dtype=float)
    rho0_eig = data.basis.conj().T @ np.asarray(rho0, dtype=complex) @ data.basis
    out = np.zeros((d, d), dtype=complex)
    for a in range(d):
        for b in range(d):
            if rho0_eig[a, b] == 0.0:
                continue
            drift = 0.5 * (data.v[:, a] + data.v[:, b]) * t
            tilt = (data.w[:, a] - data.w[:, b]) * t
            z = s - drift - 1j * tilt
            phase = gamma[a, b] - (data.h_eigs[a] - data.h_eigs[b])
            out[a, b] = (
                rho0_eig[a, b]
                * _propagator_complex(z, t, setup.noise.S_det)
                * np.exp((-data.Gamma_d[a, b] + 1j * phase) * t)
            )
    return data.basis @ out @ data.basis.conj().T


def commuting_marginal(setup, rho0, t: float, s_grid: UniformGrid) -> DistributionTable:
    """P(s) of the closed-form solution; only diagonal elements contribute."""
    data = commuting_data(setup)
    rho0_eig = data.basis.conj().T @ np.asarray(rho0, dtype=complex) @ data.basis
    pops = np.real(np.diag(rho0_eig))
    pts = s_grid.nodes()
    values = np.zeros(s_grid.shape)
    for a in range(setup.dim):
        if pops[a] == 0.0:
            continue
        shifted = pts - data.v[:, a] * t
        values += pops[a] * free_propagator(shifted, t, setup.noise.S_det)
    return DistributionTable(
        axes=tuple(s_grid.axes),
        values=values,
        meta={"engine": "analytic", "t": t},
    )


def marginal(output: OutputField) -> DistributionTable:
    """P(s) = Tr rho(s), in the same table format as the counting-field engine."""
    return DistributionTable(
        axes=tuple(output.s_grid.axes),
        values=output.trace_values(),
        meta={"engine": "diffusion", "t": output.time, "leakage": output.leakage},
    )
