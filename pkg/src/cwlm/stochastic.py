"""Discrete stochastic update of the conditioned state and output trajectories.

Each detector is realized by a small auxiliary quantum system (a qubit or a
truncated oscillator) that is prepared fresh every step, coupled to the
system through the detector operator B for a time dt, and then read out in
the eigenbasis of its outcome operator c.  The outcome updates the integrated
output, s_new = s_old + sqrt(S dt) c, and conditions the system state

    r_new = L_c r / P(c),      P(c) = Tr[L_c r].

The conditional map is built exactly: the joint state r x R is evolved with
the matrix exponential U = exp(+i sqrt(S dt) (B b^dag + B^dag b)) and
projected on the outcome state.  The sign in U is fixed by requiring the
trajectory drift to match the counting-field mean (an eigenstate with
detector gain a drifts at +a, not -a); the second-order expansion of the same
update is what the closed forms in :func:`closed_form_updates` express.

Trajectories are embarrassingly parallel.  Trajectory i draws all its
randomness from an independent stream keyed by (seed, i), so ensembles are
bit-identical regardless of chunking or worker count.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.special import ndtri

from .errors import (
    LimitNotApplicable,
    NormalizationLoss,
    PositivityLoss,
    StepTooLarge,
    TruncationTooSmall,
)
from .fcs import superop_matrix
from .model import residual_lindblad_set
from .numerics import RngStream, UniformGrid, dagger
from .separation import SeparatedSetup
from .tables import DistributionTable

WEAK_UPDATE_GUARD = 0.1

RELATION_TARGETS = (
    ("c c", 1.0),
    ("b b_dag", 1.0),
    ("b c", 1.0),
    ("c b_dag", 1.0),
    ("b b", 0.0),
    ("b_dag b_dag", 0.0),
    ("c b", 0.0),
    ("b_dag c", 0.0),
    ("b_dag b", 0.0),
)


@dataclass(frozen=True)
class AuxiliarySystem:
    """Detector-modeling auxiliary system: outcome operator c, ladder b, start state R."""

    kind: str
    c_op: np.ndarray
    b_op: np.ndarray
    init_state: np.ndarray
    c_grid: np.ndarray | None = None  # outcome grid for continuous (oscillator) readout

    @property
    def dim_aux(self) -> int:
        return self.c_op.shape[0]


@dataclass(frozen=True)
class RelationReport:
    entries: tuple  # (name, value, target, deviation)

    @property
    def max_deviation(self) -> float:
        return max(e[3] for e in self.entries)

    def passed(self, tol: float = 1e-12) -> bool:
        return self.max_deviation <= tol

    def summary(self) -> str:
        lines = [
            f"<{name}> = {val.real:+.15f}{val.imag:+.1e}j   target {tgt:g}   dev {dev:.2e}"
            for name, val, tgt, dev in self.entries
        ]
        lines.append(f"max deviation {self.max_deviation:.3e}")
        return "\n".join(lines)


def verify_relations(aux: AuxiliarySystem) -> RelationReport:
    """Evaluate the nine operator-pair expectation values against the start state."""
    c, b, r = aux.c_op, aux.b_op, aux.init_state
    bd = dagger(b)
    products = {
        "c c": c @ c,
        "b b_dag": b @ bd,
        "b c": b @ c,
        "c b_dag": c @ bd,
        "b b": b @ b,
        "b_dag b_dag": bd @ bd,
        "c b": c @ b,
        "b_dag c": bd @ c,
        "b_dag b": bd @ b,
    }
    entries = []
    for name, target in RELATION_TARGETS:
        val = complex(np.trace(products[name] @ r))
        entries.append((name, val, target, abs(val - target)))
    return RelationReport(entries=tuple(entries))


def make_oscillator_aux(
    n_max: int = 4, c_points: int = 1024, c_extent: float = 8.0
) -> AuxiliarySystem:
    """Truncated harmonic oscillator prepared in the vacuum; outcome is position.

    b is the annihilation operator on Fock states 0..n_max and c = b + b^dag,
    so the vacuum position density is exactly G(c) = (2 pi)^(-1/2) exp(-c^2/2).
    """
    if n_max < 3:
        raise ValueError("n_max must be at least 3")
    dim = n_max + 1
    b = np.zeros((dim, dim), dtype=complex)
    for n in range(1, dim):
        b[n - 1, n] = np.sqrt(n)
    c = b + dagger(b)
    vac = np.zeros((dim, dim), dtype=complex)
    vac[0, 0] = 1.0
    aux = AuxiliarySystem(
        kind="oscillator",
        c_op=c,
        b_op=b,
        init_state=vac,
        c_grid=np.linspace(-c_extent, c_extent, c_points),
    )
    report = verify_relations(aux)
    if not report.passed(1e-12):
        raise TruncationTooSmall(
            f"oscillator relations deviate by {report.max_deviation:.2e} at n_max={n_max}"
        )
    return aux


def make_qubit_aux() -> AuxiliarySystem:
    """Two-level auxiliary: c = sigma_x, b = (sigma_x + i sigma_y)/2, start spin-up.

    The halved ladder operator is required: the unhalved sigma_x + i sigma_y
    gives <b b_dag> = 4 and fails the relations.
    """
    sx = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    sy = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
    up = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    return AuxiliarySystem(kind="qubit", c_op=sx, b_op=0.5 * (sx + 1j * sy), init_state=up)


def make_aux(kind) -> AuxiliarySystem:
    if isinstance(kind, AuxiliarySystem):
        return kind
    if kind == "qubit":
        return make_qubit_aux()
    if kind == "oscillator":
        return make_oscillator_aux()
    raise ValueError(f"unknown auxiliary kind {kind!r}")


def gaussian_outcome_density(c):
    """Unit-variance vacuum position density G(c)."""
    return np.exp(-0.5 * np.square(c)) / np.sqrt(2.0 * np.pi)


def hermite_amplitudes(c, n_levels: int) -> np.ndarray:
    """Position amplitudes <c|n> for n = 0..n_levels-1, unit-variance vacuum.

    Recurrence from c |n> = sqrt(n) |n-1> + sqrt(n+1) |n+1>; the n = 0 row
    squares to G(c).
    """
    c = np.atleast_1d(np.asarray(c, dtype=float))
    out = np.zeros((c.size, n_levels))
    out[:, 0] = (2.0 * np.pi) ** (-0.25) * np.exp(-0.25 * c**2)
    if n_levels > 1:
        out[:, 1] = c * out[:, 0]
    for n in range(1, n_levels - 1):
        out[:, n + 1] = (c * out[:, n] - np.sqrt(n) * out[:, n - 1]) / np.sqrt(n + 1)
    return out


class DetectorUpdate:
    """Exact one-detector conditional update, precomputed for (B, dt, S, aux)."""

    def __init__(self, b_op: np.ndarray, dt: float, noise_scale: float, aux: AuxiliarySystem):
        b_op = np.asarray(b_op, dtype=complex)
        self.dim = b_op.shape[0]
        self.aux = aux
        self.sqrt_sdt = np.sqrt(noise_scale * dt)
        strength = self.sqrt_sdt * np.linalg.norm(b_op, 2)
        if strength > WEAK_UPDATE_GUARD:
            raise StepTooLarge(
                f"sqrt(S dt) * |B| = {strength:.3f} exceeds the weak-update guard {WEAK_UPDATE_GUARD}"
            )
        self.is_null = strength < 1e-14
        d, a = self.dim, aux.dim_aux
        coupling = np.kron(b_op, dagger(aux.b_op)) + np.kron(dagger(b_op), aux.b_op)
        u = expm(1j * self.sqrt_sdt * coupling).reshape(d, a, d, a)
        # start-state decomposition: L_c r = sum_k p_k M_ck r M_ck^dag
        p, vecs = np.linalg.eigh(aux.init_state)
        keep = p > 1e-14
        self.weights = p[keep]
        comps = vecs[:, keep]  # (a, n_comp)
        if aux.kind == "qubit":
            c_vals, c_vecs = np.linalg.eigh(aux.c_op)
            order = np.argsort(c_vals)[::-1]
            self.outcomes = c_vals[order].real  # (+1, -1)
            proj = c_vecs[:, order].conj()  # <c| rows
            # kraus[c, k] = (I x <c|) U (I x |comp_k>)
            self.kraus = np.einsum("ac,xayb,bk->ckxy", proj, u, comps)
            self.prob_ops = np.einsum("k,ckyx,ckyz->cxz", self.weights, self.kraus.conj(), self.kraus)
        else:
            self.c_grid = aux.c_grid
            h = self.c_grid[1] - self.c_grid[0]
            self.grid_weights = np.full(self.c_grid.size, h)
            self.grid_weights[0] = self.grid_weights[-1] = 0.5 * h
            # W[k, n] = (I x <n|) U (I x |comp_k>)
            self.fock_kraus = np.einsum("xnyb,bk->knxy", u, comps)
            self.psi_grid = hermite_amplitudes(self.c_grid, a)  # (g, n)
            m_grid = np.einsum("gn,knxy->gkxy", self.psi_grid, self.fock_kraus)
            self.prob_ops_grid = np.einsum(
                "k,gkyx,gkyz->gxz", self.weights, m_grid.conj(), m_grid
            )

    # ---- conditional maps -------------------------------------------------

    def kraus_at(self, c: float) -> np.ndarray:
        """Kraus components M_ck at one outcome value, shape (n_comp, d, d)."""
        if self.aux.kind == "qubit":
            idx = int(np.argmin(np.abs(self.outcomes - c)))
            if abs(self.outcomes[idx] - c) > 1e-9:
                raise ValueError(f"outcome {c} is not an eigenvalue of the outcome operator")
            return self.kraus[idx]
        psi = hermite_amplitudes(float(c), self.fock_kraus.shape[1])[0]
        return np.einsum("n,knxy->kxy", psi, self.fock_kraus)

    def conditional(self, r: np.ndarray, c: float) -> np.ndarray:
        """Unnormalized conditioned block L_c r."""
        m = self.kraus_at(c)
        return np.einsum("k,kxy,yz,kwz->xw", self.weights, m, r, m.conj())

    def expected_map(self, r: np.ndarray) -> np.ndarray:
        """Outcome average E_c[L_c r]: exact sum (qubit) or grid quadrature."""
        if self.is_null:
            return np.asarray(r, dtype=complex)
        if self.aux.kind == "qubit":
            return sum(self.conditional(r, c) for c in self.outcomes)
        m_grid = np.einsum("gn,knxy->gkxy", self.psi_grid, self.fock_kraus)
        terms = np.einsum("k,gkxy,yz,gkwz->gxw", self.weights, m_grid, r, m_grid.conj())
        return np.einsum("g,gxw->xw", self.grid_weights, terms)

    # ---- batched sampling -------------------------------------------------

    def probabilities(self, r_batch: np.ndarray) -> np.ndarray:
        if self.aux.kind == "qubit":
            return np.einsum("cxz,tzx->tc", self.prob_ops, r_batch).real
        return np.einsum("gxz,tzx->tg", self.prob_ops_grid, r_batch).real

    def sample_and_apply(self, r_batch: np.ndarray, u: np.ndarray):
        """Draw outcomes from one uniform per trajectory and condition the states.

        Returns (outcomes, conditioned normalized states).
        """
        if self.is_null:
            if self.aux.kind == "qubit":
                c = np.where(u < 0.5, 1.0, -1.0)
            else:
                c = ndtri(np.clip(u, 1e-300, 1.0 - 1e-16))
            return c, r_batch
        probs = self.probabilities(r_batch)
        if self.aux.kind == "qubit":
            mass = probs.sum(axis=1)
            if np.max(np.abs(mass - 1.0)) > 1e-6:
                raise NormalizationLoss(
                    f"outcome probabilities sum to 1 {np.max(np.abs(mass - 1.0)):.2e} off"
                )
            idx = (u >= probs[:, 0]).astype(int)
            m_sel = self.kraus[idx]  # (t, k, d, d)
        else:
            cdf = np.zeros((probs.shape[0], probs.shape[1]))
            np.cumsum(0.5 * (probs[:, 1:] + probs[:, :-1]), axis=1, out=cdf[:, 1:])
            h = self.c_grid[1] - self.c_grid[0]
            cdf *= h
            mass = cdf[:, -1]
            if np.max(np.abs(mass - 1.0)) > 1e-6:
                raise NormalizationLoss(
                    f"outcome density integrates to 1 {np.max(np.abs(mass - 1.0)):.2e} off"
                )
            target = u * mass
            pos = (cdf < target[:, None]).sum(axis=1)
            pos = np.clip(pos, 1, cdf.shape[1] - 1)
            rows = np.arange(probs.shape[0])
            c_lo, c_hi = cdf[rows, pos - 1], cdf[rows, pos]
            frac = np.where(c_hi > c_lo, (target - c_lo) / np.maximum(c_hi - c_lo, 1e-300), 0.5)
            c = self.c_grid[pos - 1] + frac * h
            psi = hermite_amplitudes(c, self.fock_kraus.shape[1])
            m_sel = np.einsum("tn,knxy->tkxy", psi, self.fock_kraus)
        tmp = np.einsum("k,tkxy,tyz->tkxz", self.weights, m_sel, r_batch)
        blocks = np.einsum("tkxz,tkwz->txw", tmp, m_sel.conj())
        norms = np.einsum("txx->t", blocks).real
        if np.any(norms <= 0):
            raise NormalizationLoss("conditioned state has nonpositive norm")
        if self.aux.kind == "qubit":
            c = self.outcomes[idx]
        return c, blocks / norms[:, None, None]


@dataclass(frozen=True)
class TrajectoryState:
    s: np.ndarray        # integrated outputs, length N
    r: np.ndarray        # conditioned density matrix, trace 1
    time: float = 0.0


class StepContext:
    """Everything precomputed for stepping trajectories of one separated setup."""

    def __init__(self, separated: SeparatedSetup, dt: float, aux="qubit"):
        self.separated = separated
        self.dt = dt
        self.aux = make_aux(aux)
        setup = separated.base
        d = setup.dim
        self.dim = d
        self.unitary = expm(-1j * np.asarray(setup.hamiltonian, dtype=complex) * dt)
        residual = residual_lindblad_set(setup)
        if residual:
            gen = superop_matrix(np.zeros((d, d), dtype=complex), residual, d)
            self.residual_channel = expm(dt * gen)
        else:
            self.residual_channel = None
        self.detectors = [
            DetectorUpdate(b, dt, separated.noise_scale, self.aux) for b in separated.B_ops
        ]
        self.sqrt_sdt = np.sqrt(separated.noise_scale * dt)


def step_context(separated, dt, aux="qubit") -> StepContext:
    return StepContext(separated, dt, aux)


def _min_eig_batch(r: np.ndarray) -> np.ndarray:
    if r.shape[-1] == 2:
        tr = np.einsum("txx->t", r).real
        det = (r[:, 0, 0] * r[:, 1, 1] - r[:, 0, 1] * r[:, 1, 0]).real
        half = 0.5 * tr
        gap = np.sqrt(np.maximum(half**2 - det, 0.0))
        return half - gap
    return np.linalg.eigvalsh(r)[:, 0]


def _advance(ctx: StepContext, r: np.ndarray, s: np.ndarray, uniforms: np.ndarray):
    """One full step on a batch: unitary, detectors in index order, residual channel."""
    u_h = ctx.unitary
    r = u_h @ r @ u_h.conj().T
    for i, det in enumerate(ctx.detectors):
        c, r = det.sample_and_apply(r, uniforms[:, i])
        s[:, i] += ctx.sqrt_sdt * c
    if ctx.residual_channel is not None:
        n, d = r.shape[0], ctx.dim
        r = (r.reshape(n, d * d) @ ctx.residual_channel.T).reshape(n, d, d)
    r = 0.5 * (r + dagger(r))
    min_eig = _min_eig_batch(r)
    tr = np.einsum("txx->t", r).real
    r = r / tr[:, None, None]
    return r, s, min_eig


def trajectory_step(
    state: TrajectoryState,
    separated: SeparatedSetup,
    dt: float,
    rng,
    aux="qubit",
    ctx: StepContext | None = None,
) -> TrajectoryState:
    """Advance one trajectory by dt; consumes one uniform per detector."""
    if ctx is None:
        ctx = StepContext(separated, dt, aux)
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    uniforms = gen.random((1, len(ctx.detectors)))
    r = np.asarray(state.r, dtype=complex)[None]
    s = np.array(state.s, dtype=float)[None].copy()
    r, s, min_eig = _advance(ctx, r, s, uniforms)
    if min_eig[0] < -1e-6:
        raise PositivityLoss(f"conditioned state eigenvalue {min_eig[0]:.2e} < -1e-6")
    return TrajectoryState(s=s[0], r=r[0], time=state.time + dt)


def conditional_map(r, b_op, dt, noise_scale, aux, c) -> np.ndarray:
    """Unnormalized conditioned block L_c r for outcome c of one detector."""
    upd = DetectorUpdate(np.asarray(b_op, dtype=complex), dt, noise_scale, make_aux(aux))
    return upd.conditional(np.asarray(r, dtype=complex), float(c))


def sample_outcome(r, b_op, dt, noise_scale, aux, rng) -> float:
    """Draw one outcome c from P(c) = Tr[L_c r]; consumes one uniform."""
    upd = DetectorUpdate(np.asarray(b_op, dtype=complex), dt, noise_scale, make_aux(aux))
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    u = np.atleast_1d(gen.random())
    c, _ = upd.sample_and_apply(np.asarray(r, dtype=complex)[None], u)
    return float(c[0])


def expected_measurement_map(separated, dt, aux="qubit"):
    """Outcome-averaged one-step map of the detector updates alone (no H, no residual)."""
    ctx = StepContext(separated, dt, aux)

    def apply(r):
        out = np.asarray(r, dtype=complex)
        for det in ctx.detectors:
            out = det.expected_map(out)
        return out

    return apply


@dataclass(frozen=True)
class EnsembleResult:
    s_grid: UniformGrid
    counts: np.ndarray          # integer histogram of final outputs
    n_traj: int
    seed: int
    aborted: int
    mean_final_state: np.ndarray
    final_samples: np.ndarray | None = None
    purity_mean: np.ndarray | None = None   # per recorded step
    purity_std: np.ndarray | None = None
    purity_max_deviation: float | None = None
    meta: dict = field(default_factory=dict)

    def histogram_table(self) -> DistributionTable:
        cell = float(np.prod(self.s_grid.spacings))
        completed = max(self.n_traj - self.aborted, 1)
        density = self.counts / (completed * cell)
        meta = {"engine": "trajectories", "n_traj": self.n_traj, "seed": self.seed}
        meta.update(self.meta)
        return DistributionTable(axes=tuple(self.s_grid.axes), values=density, meta=meta)


def _run_chunk(separated, dt, aux, r0, seed, start, stop, n_steps, record_purity):
    ctx = StepContext(separated, dt, aux)
    n = stop - start
    n_det = len(ctx.detectors)
    uniforms = np.empty((n, n_steps, n_det))
    for j in range(n):
        gen = RngStream(seed, start + j).generator()
        uniforms[j] = gen.random((n_steps, n_det))
    r = np.broadcast_to(np.asarray(r0, dtype=complex), (n, ctx.dim, ctx.dim)).copy()
    s = np.zeros((n, n_det))
    alive = np.ones(n, dtype=bool)
    purity0 = float(np.einsum("xy,yx->", r[0], r[0]).real)
    purity_sum = np.zeros(n_steps + 1)
    purity_sq = np.zeros(n_steps + 1)
    purity_sum[0] = purity0 * n
    purity_sq[0] = purity0**2 * n
    purity_dev = 0.0
    for step in range(n_steps):
        r, s, min_eig = _advance(ctx, r, s, uniforms[:, step])
        alive &= min_eig >= -1e-6
        if record_purity:
            pur = np.einsum("txy,tyx->t", r, r).real
            purity_sum[step + 1] = pur.sum()
            purity_sq[step + 1] = np.square(pur).sum()
            purity_dev = max(purity_dev, float(np.max(np.abs(pur - purity0))))
    r_sum = r[alive].sum(axis=0)
    return s, alive, r_sum, purity_sum, purity_sq, purity_dev


def run_ensemble(
    separated: SeparatedSetup,
    r0,
    t: float,
    dt: float,
    n_traj: int,
    aux="qubit",
    seed: int = 0,
    s_grid: UniformGrid | None = None,
    keep_samples: bool = False,
    record_purity: bool = False,
    chunk_size: int = 16384,
    workers: int | None = None,
) -> EnsembleResult:
    """Simulate n_traj independent trajectories and histogram the final outputs.

    Trajectory i is driven by the random stream (seed, i); the histogram uses
    integer bin counts merged in chunk order, so results do not depend on the
    worker count (CWLM_THREADS or ``workers``).
    """
    n_steps = max(int(round(t / dt)), 1)
    aux = make_aux(aux)
    if s_grid is None:
        s_grid = _default_ensemble_grid(separated, t)
    if workers is None:
        workers = int(os.environ.get("CWLM_THREADS", "1"))
    ranges = [(a, min(a + chunk_size, n_traj)) for a in range(0, n_traj, chunk_size)]
    args = [
        (separated, dt, aux, np.asarray(r0, dtype=complex), seed, a, b, n_steps, record_purity)
        for a, b in ranges
    ]
    if workers > 1 and len(ranges) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk_star, args))
    else:
        results = [_run_chunk(*a) for a in args]

    n_det = separated.n_detectors
    samples = np.empty((n_traj, n_det))
    alive = np.empty(n_traj, dtype=bool)
    r_sum = np.zeros((separated.base.dim, separated.base.dim), dtype=complex)
    purity_sum = np.zeros(n_steps + 1)
    purity_sq = np.zeros(n_steps + 1)
    purity_dev = 0.0
    for (a, b), (s, ok, rs, ps, psq, pdev) in zip(ranges, results):
        samples[a:b] = s
        alive[a:b] = ok
        r_sum += rs
        purity_sum += ps
        purity_sq += psq
        purity_dev = max(purity_dev, pdev)
    aborted = int(n_traj - alive.sum())
    if aborted > max(1e-3 * n_traj, 0):
        raise PositivityLoss(f"{aborted} of {n_traj} trajectories lost positivity")
    edges = []
    for k in range(s_grid.ndim):
        ax = s_grid.axis(k)
        h = s_grid.spacings[k]
        edges.append(np.concatenate([ax - 0.5 * h, [ax[-1] + 0.5 * h]]))
    counts, _ = np.histogramdd(samples[alive], bins=edges)
    mean_purity = purity_sum / n_traj
    std_purity = np.sqrt(np.maximum(purity_sq / n_traj - mean_purity**2, 0.0))
    return EnsembleResult(
        s_grid=s_grid,
        counts=counts.astype(np.int64),
        n_traj=n_traj,
        seed=seed,
        aborted=aborted,
        mean_final_state=r_sum / max(int(alive.sum()), 1),
        final_samples=samples if keep_samples else None,
        purity_mean=mean_purity if record_purity else None,
        purity_std=std_purity if record_purity else None,
        purity_max_deviation=purity_dev if record_purity else None,
        meta={"t": t, "dt": dt, "aux": aux.kind},
    )


def _run_chunk_star(args):
    return _run_chunk(*args)


def _default_ensemble_grid(separated, t: float, points: int = 201) -> UniformGrid:
    setup = separated.base
    noise = setup.noise
    drift = 0.0
    for i in range(noise.n_detectors):
        drift = max(
            drift,
            sum(
                abs(noise.a_cross[i, a]) * np.linalg.norm(setup.measured_ops[a], 2)
                for a in range(noise.n_operators)
            ),
        )
    extent = drift * t + 6.0 * np.sqrt(separated.noise_scale * t)
    return UniformGrid.make(extent, points, ndim=noise.n_detectors)


def closed_form_updates(kind: str, limit: str, r, c: float, dt: float, noise_scale: float, eigs):
    """Closed-form one-detector update (r_new, P(c)) in the two solvable limits.

    ``eigs`` are the eigenvalues of D (no-cross-noise limit, B = -iD/2S) or of
    R (no-susceptibility limit, B = R/2S) in the shared eigenbasis of r.  The
    phase factor in the no-susceptibility limit is exp(i c sqrt(dt/S)
    (R_a - R_b)/2); unitary for every outcome, so the conditioned state keeps
    its purity and the measurement can be undone.
    """
    r = np.asarray(r, dtype=complex)
    eigs = np.asarray(eigs, dtype=float)
    kappa = np.sqrt(dt / noise_scale)
    if kind not in ("qubit", "oscillator"):
        raise LimitNotApplicable(f"unknown auxiliary kind {kind!r}")
    if limit == "no_susceptibility":
        phase = np.exp(0.5j * c * kappa * (eigs[:, None] - eigs[None, :]))
        if kind == "oscillator":
            p = float(gaussian_outcome_density(c))
        else:
            p = 0.5
        return r * phase, p
    if limit != "no_cross_noise":
        raise LimitNotApplicable(f"unknown limit {limit!r}")
    theta = kappa * eigs
    pops = np.real(np.diag(r))
    if kind == "oscillator":
        g = gaussian_outcome_density(c - theta)
        p = float(pops @ g)
        weight = np.sqrt(np.outer(g, g)) / p
    else:
        if c not in (1.0, -1.0):
            raise ValueError("qubit outcomes are +1 or -1")
        p = float(pops @ (0.5 * (1.0 + c * np.sin(theta))))
        half_diff = 0.5 * (theta[:, None] - theta[None, :])
        half_sum = 0.5 * (theta[:, None] + theta[None, :])
        weight = (np.cos(half_diff) + c * np.sin(half_sum)) / (2.0 * p)
    return r * weight, p
