"""Measurement setups: system + phenomenological detector data, and their validation.

A setup bundles the system Hamiltonian, the measured operators and the block
noise/susceptibility data.  The symmetrized noises and zero-frequency
susceptibilities are real; all complex structure is built internally from
them.  Validation collects every positivity condition the data must satisfy
and reports margins instead of throwing.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import NegativeEigenvalue, SingularDetectorNoise
from .numerics import dagger, herm_deviation, hermitian_eigendecomposition

# strict paper inequalities are accepted down to -SATURATION_TOL * scale,
# with |margin| <= SATURATION_TOL * scale flagged as saturated
SATURATION_TOL = 1e-12
MIN_DECOHERENCE_TOL = 1e-10


def _as_real_matrix(a, shape, name):
    a = np.asarray(a, dtype=float)
    if a.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {a.shape}")
    return a


@dataclass(frozen=True)
class NoiseData:
    """Block noise and susceptibility data for N detectors and M measured operators.

    ``S_det[i, j]``   symmetrized detector output noise (units [output]^2 * time)
    ``S_cross[a, i]`` cross noise between operator a and detector i
    ``S_op[a, b]``    symmetrized noise of the forces acting on the system
    ``a_cross[i, a]`` detector response to measured operator a (the gain)
    ``a_op[a, b]``    susceptibility among the forces

    Detector-to-detector and operator-to-detector susceptibilities are
    structurally zero (gauge invariance of the readout); no fields exist for
    them.
    """

    S_det: np.ndarray
    S_cross: np.ndarray
    S_op: np.ndarray
    a_cross: np.ndarray
    a_op: np.ndarray

    def __post_init__(self):
        S_det = np.asarray(self.S_det, dtype=float)
        if S_det.ndim != 2 or S_det.shape[0] != S_det.shape[1]:
            raise ValueError("S_det must be a square matrix")
        n = S_det.shape[0]
        S_cross = np.asarray(self.S_cross, dtype=float)
        if S_cross.ndim != 2 or S_cross.shape[1] != n:
            raise ValueError("S_cross must have shape (M, N)")
        m = S_cross.shape[0]
        S_op = _as_real_matrix(self.S_op, (m, m), "S_op")
        for name, block in (("S_det", S_det), ("S_op", S_op)):
            scale = max(float(np.max(np.abs(block))) if block.size else 0.0, 1e-300)
            if block.size and np.max(np.abs(block - block.T)) > 1e-12 * scale:
                raise ValueError(f"{name} must be symmetric")
        object.__setattr__(self, "S_det", S_det)
        object.__setattr__(self, "S_cross", S_cross)
        object.__setattr__(self, "S_op", S_op)
        object.__setattr__(self, "a_cross", _as_real_matrix(self.a_cross, (n, m), "a_cross"))
        object.__setattr__(self, "a_op", _as_real_matrix(self.a_op, (m, m), "a_op"))

    @classmethod
    def create(cls, S_det, S_cross=None, S_op=None, a_cross=None, a_op=None):
        """Convenience constructor filling absent blocks with zeros."""
        S_det = np.atleast_2d(np.asarray(S_det, dtype=float))
        n = S_det.shape[0]
        if S_op is None and S_cross is None and a_cross is None:
            m = 0
        else:
            for block, axis in ((S_op, 0), (S_cross, 0), (a_cross, 1)):
                if block is not None:
                    m = np.atleast_2d(np.asarray(block)).shape[axis]
                    break
        return cls(
            S_det=S_det,
            S_cross=np.zeros((m, n)) if S_cross is None else np.atleast_2d(S_cross),
            S_op=np.zeros((m, m)) if S_op is None else np.atleast_2d(S_op),
            a_cross=np.zeros((n, m)) if a_cross is None else np.atleast_2d(a_cross),
            a_op=np.zeros((m, m)) if a_op is None else np.atleast_2d(a_op),
        )

    @property
    def n_detectors(self) -> int:
        return self.S_det.shape[0]

    @property
    def n_operators(self) -> int:
        return self.S_op.shape[0]


@dataclass(frozen=True)
class MeasurementSetup:
    """System Hamiltonian, measured operators and detector noise data.

    Immutable after construction; safe to share across threads.  Units use
    hbar = 1, so the Hamiltonian has units 1/time.
    """

    hamiltonian: np.ndarray
    measured_ops: tuple
    noise: NoiseData
    label: str = ""

    def __post_init__(self):
        h = np.asarray(self.hamiltonian, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("hamiltonian must be a square matrix")
        ops = tuple(np.asarray(o, dtype=complex) for o in self.measured_ops)
        for o in ops:
            if o.shape != h.shape:
                raise ValueError("every measured operator must match the Hamiltonian dimension")
        if len(ops) != self.noise.n_operators:
            raise ValueError(
                f"{len(ops)} measured operators but noise data for {self.noise.n_operators}"
            )
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "measured_ops", ops)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def n_detectors(self) -> int:
        return self.noise.n_detectors

    @property
    def n_operators(self) -> int:
        return self.noise.n_operators

    def with_noise(self, noise: NoiseData) -> "MeasurementSetup":
        return dataclasses.replace(self, noise=noise)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    margin: float
    saturated: bool = False
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def overall(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def warnings(self) -> tuple:
        return tuple(c for c in self.checks if c.passed and c.saturated)

    def failed(self) -> tuple:
        return tuple(c for c in self.checks if not c.passed)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            if c.saturated:
                status += " (saturated)"
            lines.append(f"{status:18s} {c.name:28s} margin={c.margin:+.6e}  {c.detail}")
        lines.append(f"overall: {'VALID' if self.overall else 'INVALID'}")
        return "\n".join(lines)


def detector_operator_block(noise: NoiseData) -> np.ndarray:
    """N x M block S_{alpha i} - i a_{i alpha}/2 indexed as [detector, operator]."""
    return noise.S_cross.T - 0.5j * noise.a_cross


def operator_coupling_matrix(noise: NoiseData) -> np.ndarray:
    """Hermitian M x M decoherence kernel, element [b, a] = S_ba + i(a_ba - a_ab)/2.

    This is the kernel contracted against O_a rho O_b - {O_b O_a, rho}/2 in the
    evolution equations; its antisymmetric susceptibility part sets the phase
    rotation of coherences.  The combined positivity matrix uses the transposed
    convention (identical spectrum).
    """
    return noise.S_op + 0.5j * (noise.a_op - noise.a_op.T)


def build_big_C(noise: NoiseData) -> np.ndarray:
    """Hermitian (N+M)x(N+M) matrix C_ab = S_ab + i(a_ba - a_ab)/2.

    The combined index runs over detectors first, then operators, with the
    structural zeros a_ij = 0 and a_{alpha i} = 0 in place.
    """
    n, m = noise.n_detectors, noise.n_operators
    c = np.zeros((n + m, n + m), dtype=complex)
    c[:n, :n] = noise.S_det
    block = detector_operator_block(noise)
    c[:n, n:] = block
    c[n:, :n] = dagger(block)
    c[n:, n:] = operator_coupling_matrix(noise)
    return c


def lindblad_set(setup: MeasurementSetup, tol: float = 1e-12):
    """Diagonalized decoherence channels [(rate C_gamma, operator L_gamma), ...].

    Eigen-decomposes the operator coupling matrix and emits one operator per
    strictly positive eigenvalue; null directions are dropped.  Raises
    :class:`NegativeEigenvalue` if an eigenvalue is negative beyond tolerance.
    """
    return _lindblad_from_kernel(operator_coupling_matrix(setup.noise), setup.measured_ops, tol)


def _lindblad_from_kernel(kernel: np.ndarray, ops, tol: float = 1e-12):
    m = kernel.shape[0]
    if m == 0:
        return []
    w, v = hermitian_eigendecomposition(kernel)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    out = []
    for g in range(m):
        if scale > 0.0 and w[g] < -1e-10 * scale:
            raise NegativeEigenvalue(
                f"decoherence kernel has negative eigenvalue {w[g]:.3e} (scale {scale:.3e})"
            )
        if w[g] > tol * max(scale, 1e-300):
            # kernel = sum_g psi*_a[g] w_g psi_b[g] with psi[g] = conj(v[:, g])
            l_op = np.sqrt(w[g]) * sum(np.conj(v[a, g]) * ops[a] for a in range(m))
            out.append((float(w[g]), l_op))
    return out


def dissipator(channels):
    """Superoperator rho -> sum_g (L rho L^dag - {L^dag L, rho}/2) as a closure."""

    def apply(rho):
        out = np.zeros_like(rho, dtype=complex)
        for _, l_op in channels:
            ld = l_op.conj().T
            ldl = ld @ l_op
            out += l_op @ rho @ ld - 0.5 * (ldl @ rho + rho @ ldl)
        return out

    return apply


def minimum_decoherence_margin(setup: MeasurementSetup) -> float:
    """Smallest eigenvalue of the residual decoherence kernel.

    The kernel is the operator coupling matrix minus the Schur complement of
    the detector block in the combined positivity matrix; a positive margin
    means decoherence strictly above the minimum compatible with the detector
    data, |margin| <= 1e-10 means saturation.
    """
    mineig = np.linalg.eigvalsh(_residual_kernel(setup.noise))
    return float(mineig[0])


def _residual_kernel(noise: NoiseData) -> np.ndarray:
    sd = noise.S_det
    eigs = np.linalg.eigvalsh(sd)
    if eigs[0] <= 1e-14 * max(abs(eigs[-1]), 1e-300):
        raise SingularDetectorNoise("S_det is not invertible")
    block = detector_operator_block(noise)  # (N, M)
    schur = dagger(block) @ np.linalg.solve(sd, block)
    return operator_coupling_matrix(noise) - schur


def residual_lindblad_set(setup: MeasurementSetup, tol: float = 1e-12):
    """Channels for the decoherence in excess of the measurement minimum."""
    return _lindblad_from_kernel(_residual_kernel(setup.noise), setup.measured_ops, tol)


def validate_setup(setup: MeasurementSetup) -> ValidationReport:
    """Run every validity check and report pass flags and margins.

    Failures are reported, never thrown.  Strict inequalities are accepted
    down to -1e-12 * scale; saturated checks carry a warning flag.
    """
    noise = setup.noise
    n, m = noise.n_detectors, noise.n_operators
    checks = []

    def strict(name, margin, scale, detail="", tol=SATURATION_TOL):
        gate = tol * max(scale, 1e-300)
        checks.append(
            CheckResult(
                name=name,
                passed=bool(margin >= -gate),
                margin=float(margin),
                saturated=bool(abs(margin) <= gate),
                detail=detail,
            )
        )

    h_dev = herm_deviation(setup.hamiltonian)
    checks.append(
        CheckResult(
            "hamiltonian_hermiticity",
            h_dev <= 1e-12,
            -h_dev,
            detail="relative deviation from H = H^dag",
        )
    )
    for a, op in enumerate(setup.measured_ops):
        dev = herm_deviation(op)
        checks.append(
            CheckResult(
                f"measured_op_{a}_hermiticity",
                dev <= 1e-12,
                -dev,
                detail="relative deviation from O = O^dag",
            )
        )

    diag = np.concatenate([np.diag(noise.S_det), np.diag(noise.S_op)])
    scale = float(np.max(np.abs(diag))) if diag.size else 1.0
    strict("diagonal_noise_positivity", float(np.min(diag)), scale, "min of S_ii and S_aa")

    if n >= 2:
        margins = [
            noise.S_det[i, i] * noise.S_det[j, j] - noise.S_det[i, j] ** 2
            for i in range(n)
            for j in range(i + 1, n)
        ]
        strict(
            "detector_pair_cross_noise",
            min(margins),
            scale**2,
            "min over pairs of S_ii S_jj - S_ij^2",
        )

    if m >= 1:
        margins = [
            noise.S_det[i, i] * noise.S_op[a, a]
            - noise.S_cross[a, i] ** 2
            - noise.a_cross[i, a] ** 2
            for i in range(n)
            for a in range(m)
        ]
        strict(
            "detector_operator_coupling",
            min(margins),
            scale**2,
            "min over (i,a) of S_ii S_aa - S_ia^2 - a_ia^2",
        )

    big_c = build_big_C(noise)
    eigs = np.linalg.eigvalsh(big_c)
    c_scale = float(np.max(np.abs(eigs)))
    strict(
        "big_c_positivity",
        float(eigs[0]),
        c_scale,
        "smallest eigenvalue of the combined positivity matrix",
    )

    if m >= 1:
        try:
            margin = minimum_decoherence_margin(setup)
            op_scale = float(np.max(np.abs(np.linalg.eigvalsh(operator_coupling_matrix(noise)))))
            strict(
                "minimum_decoherence",
                margin,
                max(op_scale, 1.0) if op_scale == 0.0 else op_scale,
                "smallest eigenvalue of the residual decoherence kernel",
                tol=MIN_DECOHERENCE_TOL,
            )
        except SingularDetectorNoise:
            checks.append(
                CheckResult(
                    "minimum_decoherence",
                    False,
                    float("-inf"),
                    detail="S_det singular; residual kernel undefined",
                )
            )

    return ValidationReport(checks=tuple(checks))


# Pauli matrices, used across fixtures, demos and tests.
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
