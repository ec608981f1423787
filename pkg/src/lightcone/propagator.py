"""Time evolution for ``i d/dt psi = (omega(-i grad) + V_t) psi``.

One Strang step is ``e^{-i dt/2 V} e^{-i dt omega} e^{-i dt/2 V}`` with the
potential sampled at the step midpoint. Every factor is unitary, so the
discrete propagator is unitary up to roundoff.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NumericalBreakdown
from .potentials import Zero, evaluate
from .spectral import Grid, WaveFunction, dispersion, l2_norm

log = logging.getLogger(__name__)

DENSE_LIMIT = 4096
EXP_LIMIT = 700.0


@dataclass
class EvolutionConfig:
    dt: float
    T: float
    m: float = 1.0
    c: float = 1.0
    snapshot_every: int | None = None
    snapshot_times: tuple | None = None
    max_steps: int = 10_000_000
    drift_abort: float = 1e-8
    margin_dist: float = 0.0
    margin_extra: float = 5.0

    def __post_init__(self):
        if not self.dt > 0 or not math.isfinite(self.dt):
            raise ValueError("time step must be positive")
        if not self.T >= 0 or not math.isfinite(self.T):
            raise ValueError("final time must be nonnegative")
        if self.m <= 0 or self.c <= 0:
            raise ValueError("mass and speed must be positive")
        if self.n_steps > self.max_steps:
            raise ValueError(f"{self.n_steps} steps exceed the budget of {self.max_steps}")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.T / self.dt - 1e-9)) if self.T > 0 else 0

    @property
    def step(self) -> float:
        """Actual step: ``dt`` shrunk so an integer number of steps lands on ``T``."""
        return self.T / self.n_steps if self.n_steps else self.dt

    def snapshot_steps(self) -> list[int]:
        n = self.n_steps
        steps = {0, n}
        if self.snapshot_every:
            steps.update(range(0, n + 1, self.snapshot_every))
        for t in self.snapshot_times or ():
            k = int(round(t / self.step)) if n else 0
            if abs(k * self.step - t) > 1e-9 * max(1.0, abs(t)) or not 0 <= k <= n:
                raise ValueError(f"snapshot time {t} is not on the step lattice of [0, {self.T}]")
            steps.add(k)
        return sorted(steps)


@dataclass
class Trajectory:
    times: list
    states: list
    norms: np.ndarray
    warnings: list = field(default_factory=list)

    @property
    def final(self) -> WaveFunction:
        return self.states[-1]

    def at(self, t: float) -> WaveFunction:
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"no snapshot at t={t}")
        return self.states[i]

    @property
    def max_drift(self) -> float:
        n0 = self.norms[0]
        return float(np.max(np.abs(self.norms - n0)) / n0) if n0 else 0.0


def kinetic_phase(grid: Grid, dt: float, m: float = 1.0, c: float = 1.0) -> np.ndarray:
    return np.exp(-1j * dt * dispersion(grid.xi_sq, m, c))


def free_step(wf: WaveFunction, dt: float, m: float = 1.0, c: float = 1.0) -> WaveFunction:
    """Exact free evolution ``e^{-i dt omega(-i grad)}``; ``dt`` may be negative."""
    if dt == 0:
        return wf
    phase = kinetic_phase(wf.grid, dt, m, c)
    return wf.with_values(np.fft.ifftn(phase * np.fft.fftn(wf.values)))


def strang_step(wf: WaveFunction, t: float, dt: float, V=None, m: float = 1.0,
                c: float = 1.0) -> WaveFunction:
    V = Zero() if V is None else V
    half = np.exp(-0.5j * dt * evaluate(V, wf.grid, t + 0.5 * dt))
    psi = half * wf.values
    psi = np.fft.ifftn(kinetic_phase(wf.grid, dt, m, c) * np.fft.fftn(psi))
    return wf.with_values(half * psi)


class _Strang:
    """Precomputed factors for repeated steps on one grid."""

    def __init__(self, grid: Grid, V, dt: float, m: float, c: float):
        self.grid, self.V, self.dt = grid, (Zero() if V is None else V), dt
        self.kin = kinetic_phase(grid, dt, m, c)
        self.static = getattr(self.V, "is_static", False)
        self._half = None
        if self.static:
            self._half = np.exp(-0.5j * dt * evaluate(self.V, grid, 0.0))
        self.free = self.static and not np.any(evaluate(self.V, grid, 0.0))

    def half(self, k: int) -> np.ndarray:
        if self._half is not None:
            return self._half
        return np.exp(-0.5j * self.dt * evaluate(self.V, self.grid, (k + 0.5) * self.dt))

    def forward(self, psi, k):
        if self.free:
            return np.fft.ifftn(self.kin * np.fft.fftn(psi))
        h = self.half(k)
        return h * np.fft.ifftn(self.kin * np.fft.fftn(h * psi))

    def backward(self, psi, k):
        """Adjoint of step ``k``."""
        if self.free:
            return np.fft.ifftn(np.conj(self.kin) * np.fft.fftn(psi))
        h = np.conj(self.half(k))
        return h * np.fft.ifftn(np.conj(self.kin) * np.fft.fftn(h * psi))


def propagate(values: np.ndarray, grid: Grid, V, T: float, dt: float, m: float = 1.0,
              c: float = 1.0, adjoint: bool = False) -> np.ndarray:
    """Array-level ``U_T psi`` (or ``U_T^* psi`` with ``adjoint=True``).

    The step is shrunk exactly as in :class:`EvolutionConfig` so forward and
    adjoint runs use the same factors.
    """
    cfg = EvolutionConfig(dt=dt, T=T, m=m, c=c)
    n = cfg.n_steps
    if n == 0:
        return np.array(values, dtype=complex)
    st = _Strang(grid, V, cfg.step, m, c)
    if st.free:
        # static free generator: one exact multiplier
        phase = kinetic_phase(grid, -T if adjoint else T, m, c)
        return np.fft.ifftn(phase * np.fft.fftn(values))
    psi = np.array(values, dtype=complex)
    ks = range(n - 1, -1, -1) if adjoint else range(n)
    step = st.backward if adjoint else st.forward
    for k in ks:
        psi = step(psi, k)
    return psi


def support_radius(wf: WaveFunction, rel_tol: float = 1e-10) -> np.ndarray:
    """Per-axis extent of ``|psi| > rel_tol max|psi|`` measured from the box center."""
    a = np.abs(wf.values)
    mask = a > rel_tol * a.max() if a.max() > 0 else np.zeros(a.shape, bool)
    if not mask.any():
        return np.zeros(wf.grid.d)
    return np.array([np.max(np.abs(x[mask] - c)) for x, c in zip(wf.grid.coords, wf.grid.center)])


def margin_violations(wf: WaveFunction, config: EvolutionConfig) -> list[str]:
    """Box-margin policy: ``support + c T + dist + extra <= L/2`` on every axis."""
    rad = support_radius(wf)
    out = []
    for i, (r, L) in enumerate(zip(rad, wf.grid.length)):
        need = r + config.c * config.T + config.margin_dist + config.margin_extra
        if need > L / 2:
            out.append(f"box margin violated on axis {i}: need {need:.3g} <= L/2 = {L / 2:.3g}")
    return out


def evolve(wf0: WaveFunction, config: EvolutionConfig, V=None) -> Trajectory:
    """Strang-split evolution from 0 to ``config.T`` with snapshots and a norm log.

    Raises :class:`NumericalBreakdown` if the norm drifts by more than
    ``config.drift_abort`` (relative). Box-margin violations are recorded in
    ``Trajectory.warnings`` and logged, not raised.
    """
    grid = wf0.grid
    warnings = margin_violations(wf0, config)
    for w in warnings:
        log.warning(w)
    n = config.n_steps
    keep = set(config.snapshot_steps())
    st = _Strang(grid, V, config.step, config.m, config.c)
    psi = wf0.values.copy()
    norm0 = l2_norm(wf0)
    norms = np.empty(n + 1)
    norms[0] = norm0
    times, states = [0.0], [wf0]
    scale = math.sqrt(grid.cell_volume)
    for k in range(n):
        psi = st.forward(psi, k)
        nk = float(np.linalg.norm(psi) * scale)
        norms[k + 1] = nk
        if norm0 and abs(nk - norm0) > config.drift_abort * norm0:
            raise NumericalBreakdown(f"norm drift {abs(nk - norm0) / norm0:.2e} at step {k + 1}")
        if not math.isfinite(nk):
            raise NumericalBreakdown(f"non-finite state at step {k + 1}")
        if k + 1 in keep:
            times.append((k + 1) * st.dt)
            states.append(WaveFunction(grid, psi.copy()))
    if n:
        times[-1] = config.T
    return Trajectory(times, states, norms, warnings)


def kinetic_matrix(grid: Grid, m: float = 1.0, c: float = 1.0) -> np.ndarray:
    """Dense ``F^-1 diag(omega) F`` in flattened C order."""
    N = grid.size
    eye = np.eye(N).reshape((N,) + grid.shape)
    axes = tuple(range(1, grid.d + 1))
    cols = np.fft.ifftn(dispersion(grid.xi_sq, m, c) * np.fft.fftn(eye, axes=axes), axes=axes)
    return cols.reshape(N, N).T


def dense_propagator(grid: Grid, T: float, V=None, substeps: int = 1, m: float = 1.0,
                     c: float = 1.0) -> np.ndarray:
    """Time-ordered product of ``expm(-i dt H(t_k + dt/2))`` as a dense matrix."""
    if grid.size > DENSE_LIMIT:
        raise ValueError(f"dense oracle limited to {DENSE_LIMIT} points, grid has {grid.size}")
    V = Zero() if V is None else V
    K = kinetic_matrix(grid, m, c)
    if getattr(V, "is_static", False):
        H = K + np.diag(evaluate(V, grid, 0.0).ravel())
        return scipy.linalg.expm(-1j * T * H)
    dt = T / substeps
    U = np.eye(grid.size, dtype=complex)
    for k in range(substeps):
        H = K + np.diag(evaluate(V, grid, (k + 0.5) * dt).ravel())
        U = scipy.linalg.expm(-1j * dt * H) @ U
    return U


def dense_oracle_evolve(wf0: WaveFunction, T: float, V=None, substeps: int = 1,
                        m: float = 1.0, c: float = 1.0) -> WaveFunction:
    grid = wf0.grid
    if grid.size > DENSE_LIMIT:
        raise ValueError(f"dense oracle limited to {DENSE_LIMIT} points, grid has {grid.size}")
    V = Zero() if V is None else V
    K = kinetic_matrix(grid, m, c)
    psi = wf0.values.ravel().astype(complex)
    if getattr(V, "is_static", False):
        H = K + np.diag(evaluate(V, grid, 0.0).ravel())
        psi = scipy.linalg.expm(-1j * T * H) @ psi
    else:
        dt = T / substeps
        for k in range(substeps):
            H = K + np.diag(evaluate(V, grid, (k + 0.5) * dt).ravel())
            psi = scipy.linalg.expm(-1j * dt * H) @ psi
    return WaveFunction(grid, psi.reshape(grid.shape))


def weight_span(ell, grid: Grid) -> float:
    vals = ell.on_grid(grid)
    return float(vals.max() - vals.min())


def conjugated_evolve(wf0: WaveFunction, ell, config: EvolutionConfig, V=None,
                      support_tol: float = 1e-14):
    """``e^{-ell} U_T e^{ell} psi0`` and its norm relative to ``psi0``.

    Both weights are shifted by ``max ell`` over the support of ``psi0``; the
    shift cancels in the product. Raises :class:`NumericalBreakdown` when the
    outgoing weight would overflow on this box.
    """
    grid = wf0.grid
    lg = ell.on_grid(grid)
    a = np.abs(wf0.values)
    supp = a > support_tol * a.max()
    if not supp.any():
        raise ValueError("initial state is zero")
    shift = float(lg[supp].max())
    if shift - lg.min() > EXP_LIMIT:
        raise NumericalBreakdown(
            f"weight range {shift - lg.min():.1f} overflows on this box; shrink the box")
    w_in = np.exp(np.minimum(lg - shift, EXP_LIMIT))
    phi = np.where(supp, w_in * wf0.values, 0.0)
    traj = evolve(wf0.with_values(phi), config, V)
    out = np.exp(-(lg - shift)) * traj.final.values
    if not np.all(np.isfinite(out)):
        raise NumericalBreakdown("conjugated state overflowed")
    res = WaveFunction(grid, out)
    return res, l2_norm(res) / l2_norm(wf0)
