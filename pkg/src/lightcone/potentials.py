"""Time-dependent potential families and the propagator admissibility check.

The check covers three conditions on a split ``V_t = V_B,t + V_inf,t``:

1. ``||<grad>^-1/2 V_B,t <grad>^-1/2|| < 1`` for every sampled ``t``;
2. ``sup_t ||V_inf,t||_inf < inf``;
3. ``sup_t ||d/dt V_t||`` finite, in the sum norm of the two spaces.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .power import PowerResult, power_iteration
from .spectral import Grid, apply_symbol, make_grid

log = logging.getLogger(__name__)

INCONCLUSIVE_BAND = 1e-3


def _gauss(grid: Grid, amplitude, center, width):
    r2 = sum((x - c) ** 2 for x, c in zip(grid.coords, center))
    return amplitude * np.exp(-r2 / width**2)


def _center(center, d):
    center = np.asarray(center, dtype=float).reshape(-1)
    if center.size == 1 and d > 1:
        center = np.full(d, center[0])
    if center.size != d:
        raise ValueError(f"potential center has {center.size} components, grid has dimension {d}")
    return center


def _finite(*vals):
    for v in vals:
        if not np.all(np.isfinite(v)):
            raise ValueError("potential parameters must be finite")


@dataclass(frozen=True)
class Zero:
    is_static = True

    def __call__(self, grid: Grid, t: float = 0.0) -> np.ndarray:
        return np.zeros(grid.shape)

    def to_json(self):
        return {"zero": {}}


@dataclass(frozen=True)
class Constant:
    value: float
    is_static = True

    def __post_init__(self):
        _finite(self.value)

    def __call__(self, grid, t=0.0):
        return np.full(grid.shape, float(self.value))

    def to_json(self):
        return {"constant": {"value": self.value}}


@dataclass(frozen=True)
class StaticBump:
    """``amplitude * exp(-|x - center|^2 / width^2)``."""

    amplitude: float
    center: tuple
    width: float
    is_static = True

    def __post_init__(self):
        _finite(self.amplitude, self.center, self.width)
        if not self.width > 0:
            raise ValueError("bump width must be positive")

    def __call__(self, grid, t=0.0):
        return _gauss(grid, self.amplitude, _center(self.center, grid.d), self.width)

    def to_json(self):
        return {"static_bump": {"amplitude": self.amplitude, "center": list(np.ravel(self.center)),
                                "width": self.width}}


@dataclass(frozen=True)
class MovingBump:
    """Gaussian bump whose center moves as ``center + velocity * t``."""

    amplitude: float
    center: tuple
    width: float
    velocity: tuple
    is_static = False

    def __post_init__(self):
        _finite(self.amplitude, self.center, self.width, self.velocity)
        if not self.width > 0:
            raise ValueError("bump width must be positive")

    def __call__(self, grid, t=0.0):
        c = _center(self.center, grid.d) + t * _center(self.velocity, grid.d)
        return _gauss(grid, self.amplitude, c, self.width)

    def to_json(self):
        return {"moving_bump": {"amplitude": self.amplitude, "center": list(np.ravel(self.center)),
                                "width": self.width, "velocity": list(np.ravel(self.velocity))}}


@dataclass(frozen=True)
class Oscillating:
    """Static profile modulated by ``cos(omega t)``."""

    profile: object
    omega: float
    is_static = False

    def __post_init__(self):
        _finite(self.omega)
        if not getattr(self.profile, "is_static", False):
            raise ValueError("oscillating potential needs a static profile")

    def __call__(self, grid, t=0.0):
        return self.profile(grid, 0.0) * np.cos(self.omega * t)

    def to_json(self):
        return {"oscillating": {"profile": self.profile.to_json(), "omega": self.omega}}


@dataclass(frozen=True)
class Sum:
    parts: tuple

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def is_static(self):
        return all(p.is_static for p in self.parts)

    def __call__(self, grid, t=0.0):
        out = np.zeros(grid.shape)
        for p in self.parts:
            out = out + p(grid, t)
        return out

    def to_json(self):
        return {"sum": [p.to_json() for p in self.parts]}


PotentialSpec = Union[Zero, Constant, StaticBump, MovingBump, Oscillating, Sum]


def potential_from_json(obj) -> PotentialSpec:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ValueError(f"potential must be an object with exactly one tag, got {obj!r}")
    (tag, body), = obj.items()
    if tag == "zero":
        return Zero()
    if tag == "constant":
        return Constant(float(body["value"]))
    if tag == "static_bump":
        return StaticBump(float(body["amplitude"]), tuple(body["center"]), float(body["width"]))
    if tag == "moving_bump":
        return MovingBump(float(body["amplitude"]), tuple(body["center"]), float(body["width"]),
                          tuple(body["velocity"]))
    if tag == "oscillating":
        return Oscillating(potential_from_json(body["profile"]), float(body["omega"]))
    if tag == "sum":
        return Sum(tuple(potential_from_json(o) for o in body))
    raise ValueError(f"unknown potential tag {tag!r}")


def evaluate(V, grid: Grid, t: float = 0.0) -> np.ndarray:
    field_ = np.asarray(V(grid, t), dtype=float)
    if field_.shape != grid.shape or not np.all(np.isfinite(field_)):
        raise ValueError(f"potential {V!r} did not produce a finite real field at t={t}")
    return field_


# -- form-boundedness norm -------------------------------------------------

def klmn_operator(V: np.ndarray, grid: Grid):
    """Return ``v -> A v`` for ``A = <grad>^-1/2 V <grad>^-1/2``."""
    half = (1.0 + grid.xi_sq) ** -0.25

    def apply(v):
        return apply_symbol(V * apply_symbol(v, half), half)

    return apply


def klmn_estimate(V: np.ndarray, grid: Grid, tol: float = 1e-12, max_iter: int = 50_000,
                  seed: int = 0) -> PowerResult:
    """Power iteration on ``A^2``; ``result.sqrt_value`` is the norm of ``A``."""
    V = np.asarray(V, dtype=float)
    if V.shape != grid.shape:
        raise ValueError("potential field does not match the grid")
    if not np.any(V):
        return PowerResult(0.0, np.zeros(grid.shape, complex), 0, True, [0.0])
    A = klmn_operator(V, grid)
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(grid.shape)
    return power_iteration(lambda v: A(A(v)), v0, tol=tol, max_iter=max_iter)


def klmn_norm(V: np.ndarray, grid: Grid, tol: float = 1e-12, max_iter: int = 50_000,
              seed: int = 0) -> float:
    """Discrete ``||<grad>^-1/2 V <grad>^-1/2||``, a lower bound from below."""
    return klmn_estimate(V, grid, tol, max_iter, seed).sqrt_value


@dataclass
class AdmissibilityReport:
    decomposition: str
    times: list
    klmn_per_time: list
    klmn_sup: float
    klmn_diagnostics: list
    linf_sup: float
    dtv_sup: float
    refinement_delta: float | None
    conditions: dict
    notes: list = field(default_factory=list)

    @property
    def status(self) -> str:
        c1 = self.conditions["form_bound"]
        if c1 == "fail" or "fail" in self.conditions.values():
            return "fail"
        if c1 == "inconclusive":
            return "inconclusive"
        return "pass"

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_json(self):
        return {"decomposition": self.decomposition, "times": self.times,
                "klmn_per_time": self.klmn_per_time, "klmn_sup": self.klmn_sup,
                "klmn_diagnostics": self.klmn_diagnostics, "linf_sup": self.linf_sup,
                "dtv_sup": self.dtv_sup, "refinement_delta": self.refinement_delta,
                "conditions": self.conditions, "status": self.status, "passed": self.passed,
                "notes": self.notes}


def _coarsened(grid: Grid):
    if any(N // 2 < 8 for N in grid.n):
        return None
    return make_grid(grid.d, tuple(N // 2 for N in grid.n), grid.length, grid.origin)


def admissibility_report(V, grid: Grid, T: float, n_times: int = 11,
                         decomposition: str = "form", tol: float = 1e-12,
                         refine_check: bool = True) -> AdmissibilityReport:
    """Check the three propagator conditions on ``n_times`` samples of ``[0, T]``.

    ``decomposition="form"`` puts all of ``V`` in the form-bounded part;
    ``"bounded"`` puts it in the ``L^inf`` part, which makes condition 1
    vacuous. Violations are reported, never raised.
    """
    if decomposition not in ("form", "bounded"):
        raise ValueError("decomposition must be 'form' or 'bounded'")
    if T < 0:
        raise ValueError("final time must be nonnegative")
    static = getattr(V, "is_static", False)
    times = [0.0] if T == 0 else list(np.linspace(0.0, T, max(n_times, 2)))
    fields = [evaluate(V, grid, t) for t in times]

    klmn_vals, diags = [], []
    if decomposition == "form":
        cache = None
        for f in fields:
            if static and cache is not None:
                res = cache
            else:
                res = klmn_estimate(f, grid, tol=tol)
                cache = res
            klmn_vals.append(res.sqrt_value)
            diags.append(res.diagnostics())
        linf_sup = 0.0
    else:
        klmn_vals = [0.0] * len(times)
        linf_sup = float(max(np.max(np.abs(f)) for f in fields))
    klmn_sup = float(max(klmn_vals))

    step = T / 1e4 if T > 0 else 1e-6
    dtv = 0.0
    if not static:
        for t in times:
            d = (evaluate(V, grid, t + step) - evaluate(V, grid, t - step)) / (2 * step)
            dtv = max(dtv, float(np.max(np.abs(d))))

    notes = ["form-bound estimates come from a finite lattice and converge to the "
             "continuum norm from below"]
    delta = None
    if decomposition == "form" and refine_check:
        coarse = _coarsened(grid)
        if coarse is not None:
            delta = float(klmn_vals[0] - klmn_norm(evaluate(V, coarse, times[0]), coarse, tol=tol))

    if decomposition == "bounded":
        c1 = "vacuous"
    elif abs(klmn_sup - 1.0) <= INCONCLUSIVE_BAND:
        c1 = "inconclusive"
    else:
        c1 = "pass" if klmn_sup < 1.0 else "fail"
    conditions = {
        "form_bound": c1,
        "bounded_part": "pass" if np.isfinite(linf_sup) else "fail",
        "time_derivative": "pass" if np.isfinite(dtv) else "fail",
    }
    notes.append("time-derivative norm bounded above by its sup norm")
    return AdmissibilityReport(decomposition, [float(t) for t in times], klmn_vals, klmn_sup,
                               diags, linf_sup, dtv, delta, conditions, notes)
