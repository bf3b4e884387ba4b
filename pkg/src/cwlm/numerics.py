"""Dense complex linear algebra, integrator and quadrature kernels.

Everything here is pure and reentrant: no global state, safe for concurrent
callers on distinct inputs.  Complex matrices are plain ``numpy`` arrays of
``complex128``; no wrapper type is introduced.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridTooNarrow, NonHermitianInput

HERMITICITY_TOL = 1e-12


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().swapaxes(-1, -2)


def herm_deviation(m: np.ndarray) -> float:
    """max |M - M^dag| relative to max |M| (0 for the zero matrix)."""
    scale = float(np.max(np.abs(m)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(m - dagger(m)))) / scale


def require_hermitian(m: np.ndarray, name: str = "matrix", tol: float = HERMITICITY_TOL) -> np.ndarray:
    if herm_deviation(m) > tol:
        raise NonHermitianInput(f"{name} is not Hermitian (relative deviation {herm_deviation(m):.3e})")
    return m


def hermitian_eigendecomposition(m: np.ndarray, tol: float = HERMITICITY_TOL):
    """Eigenvalues (descending) and unitary eigenvector matrix of a Hermitian matrix.

    Returns ``(w, v)`` with ``m == v @ diag(w) @ v.conj().T`` to machine
    accuracy and ``w`` sorted in descending order.  Raises
    :class:`NonHermitianInput` when the input fails the Hermiticity tolerance.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    require_hermitian(m, tol=tol)
    w, v = np.linalg.eigh(0.5 * (m + dagger(m)))
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def rk4_step(f, state: np.ndarray, dt: float) -> np.ndarray:
    """One classical 4th-order Runge-Kutta step for d(state)/dt = f(state)."""
    k1 = f(state)
    k2 = f(state + 0.5 * dt * k1)
    k3 = f(state + 0.5 * dt * k2)
    k4 = f(state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass(frozen=True)
class UniformGrid:
    """Uniform grid symmetric about zero, one entry per axis.

    ``extents[k]`` is the half-width of axis k and ``points[k]`` its node
    count, so axis k is ``linspace(-extents[k], extents[k], points[k])``.
    """

    extents: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self):
        if len(self.extents) != len(self.points):
            raise ValueError("extents and points must have equal length")
        if any(e <= 0 for e in self.extents) or any(p < 2 for p in self.points):
            raise ValueError("extents must be positive and points >= 2")

    @classmethod
    def make(cls, extent, points, ndim=None):
        """Accepts scalars (replicated over ndim axes) or per-axis sequences."""
        if np.isscalar(extent):
            extent = (float(extent),) * (ndim or 1)
        else:
            extent = tuple(float(e) for e in extent)
        if np.isscalar(points):
            points = (int(points),) * len(extent)
        else:
            points = tuple(int(p) for p in points)
        return cls(extent, points)

    @property
    def ndim(self) -> int:
        return len(self.extents)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    def axis(self, k: int) -> np.ndarray:
        return np.linspace(-self.extents[k], self.extents[k], self.points[k])

    @property
    def axes(self) -> list[np.ndarray]:
        return [self.axis(k) for k in range(self.ndim)]

    @property
    def spacings(self) -> np.ndarray:
        return np.array([2.0 * e / (p - 1) for e, p in zip(self.extents, self.points)])

    def nodes(self) -> np.ndarray:
        """All grid nodes as an array of shape (*points, ndim)."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def trapezoid_weights(self) -> np.ndarray:
        """Tensor-product trapezoid weights, shape ``self.shape``."""
        w = np.ones(self.shape)
        for k in range(self.ndim):
            wk = np.full(self.points[k], self.spacings[k])
            wk[0] *= 0.5
            wk[-1] *= 0.5
            sl = [None] * self.ndim
            sl[k] = slice(None)
            w = w * wk[tuple(sl)]
        return w


def check_grid_decay(values: np.ndarray, rel_tol: float = 1e-6) -> None:
    """Raise GridTooNarrow unless the integrand has decayed at every grid edge."""
    peak = float(np.max(np.abs(values)))
    if peak == 0.0:
        return
    edge = 0.0
    for k in range(values.ndim):
        edge = max(edge, float(np.max(np.abs(np.take(values, 0, axis=k)))))
        edge = max(edge, float(np.max(np.abs(np.take(values, -1, axis=k)))))
    if edge > rel_tol * peak:
        raise GridTooNarrow(
            f"integrand magnitude at grid edge is {edge:.3e} (peak {peak:.3e}); widen the grid"
        )


def fourier_quadrature(values: np.ndarray, grid: UniformGrid, s) -> complex:
    """Trapezoid approximation of ``(2*pi)^-N * integral dchi exp(i s.chi) f(chi)``.

    ``values`` holds f on the nodes of ``grid`` (shape ``grid.shape``); ``s``
    is a single point of the conjugate space.  The complex quadrature value is
    returned; distributions take the real part and treat the imaginary part as
    a residue to be checked.
    """
    values = np.asarray(values, dtype=complex)
    if values.shape != grid.shape:
        raise ValueError(f"values shape {values.shape} != grid shape {grid.shape}")
    check_grid_decay(values)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if s.size != grid.ndim:
        raise ValueError("s must have one component per grid axis")
    acc = values * grid.trapezoid_weights()
    for k in range(grid.ndim - 1, -1, -1):
        phase = np.exp(1j * s[k] * grid.axis(k))
        acc = np.tensordot(acc, phase, axes=([k], [0]))
    return complex(acc) / (2.0 * np.pi) ** grid.ndim


def fourier_quadrature_table(values: np.ndarray, grid: UniformGrid, s_axes) -> np.ndarray:
    """Vectorized :func:`fourier_quadrature` over a tensor product of s axes.

    Exploits separability of exp(i s.chi): one matrix contraction per axis.
    Returns a complex array of shape ``tuple(len(ax) for ax in s_axes)``.
    """
    values = np.asarray(values, dtype=complex)
    if values.shape != grid.shape:
        raise ValueError(f"values shape {values.shape} != grid shape {grid.shape}")
    check_grid_decay(values)
    acc = values * grid.trapezoid_weights()
    for k in range(grid.ndim):
        phase = np.exp(1j * np.outer(grid.axis(k), np.asarray(s_axes[k], dtype=float)))
        # contract the current leading chi axis, appending the s axis at the end
        acc = np.tensordot(acc, phase, axes=([0], [0]))
    return acc / (2.0 * np.pi) ** grid.ndim


@dataclass(frozen=True)
class RngStream:
    """Deterministic, independent random stream keyed by (seed, stream_id).

    Equal keys reproduce identical sequences; distinct ``stream_id`` values
    yield statistically independent streams (numpy ``SeedSequence`` spawn
    keys).
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))
