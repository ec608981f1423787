"""Matrix-free power iteration for positive semidefinite operators."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError

log = logging.getLogger(__name__)


@dataclass
class PowerResult:
    """Largest eigenvalue estimate of a PSD map, plus diagnostics.

    ``value`` is the Rayleigh quotient; ``sqrt_value`` its square root, which
    is the spectral norm when the map is ``A* A``.
    """

    value: float
    vector: np.ndarray
    iterations: int
    converged: bool
    history: list = field(default_factory=list)

    @property
    def sqrt_value(self) -> float:
        return float(np.sqrt(max(self.value, 0.0)))

    def diagnostics(self) -> dict:
        return {"iterations": self.iterations, "converged": self.converged,
                "last_rel_change": _last_change(self.history)}


def _last_change(h):
    if len(h) < 2 or h[-1] == 0:
        return 0.0
    return abs(h[-1] - h[-2]) / abs(h[-1])


def power_iteration(apply_psd, v0, tol=1e-10, max_iter=10_000, raise_on_fail=True) -> PowerResult:
    """Iterate ``v <- B v / |B v|`` until successive Rayleigh quotients agree.

    ``apply_psd`` must be Hermitian positive semidefinite. The Rayleigh
    quotients are then nondecreasing, so every iterate is a lower bound.
    """
    v = np.asarray(v0, dtype=complex)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("initial vector is zero")
    v = v / nrm
    history = []
    for it in range(1, max_iter + 1):
        w = apply_psd(v)
        rho = float(np.real(np.vdot(v, w)))
        history.append(rho)
        wn = np.linalg.norm(w)
        if wn == 0:
            return PowerResult(0.0, v, it, True, history)
        if it > 1 and abs(rho - history[-2]) <= tol * abs(rho):
            return PowerResult(rho, v, it, True, history)
        v = w / wn
    if raise_on_fail:
        raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations "
                               f"(last relative change {_last_change(history):.2e})")
    log.warning("power iteration stopped unconverged after %d iterations", max_iter)
    return PowerResult(history[-1], v, max_iter, False, history)
