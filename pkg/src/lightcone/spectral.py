"""Periodic grids, Fourier multipliers and discrete norms.

Arrays are stored in ``ij`` index order with frequencies in FFT order, so a
multiplier is applied as ``ifftn(symbol * fftn(values))``. The forward
transform is unnormalized and the inverse carries the ``1/N``; every public
operation is a sandwich of the two, so the convention never leaks out.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

MAX_POINTS = 2**24


def _is_pow2(k: int) -> bool:
    return k > 0 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Cell-centered periodic box ``origin + [0, L)`` per axis.

    Point ``j`` on axis ``i`` sits at ``origin_i + (j + 1/2) h_i``. When no
    origin is given the box is centered on zero.
    """

    n: tuple[int, ...]
    length: tuple[float, ...]
    origin: tuple[float, ...]

    @property
    def d(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(L / N for L, N in zip(self.length, self.n))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin, dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return self.lower + np.asarray(self.length, dtype=float)

    @property
    def center(self) -> np.ndarray:
        return self.lower + 0.5 * np.asarray(self.length, dtype=float)

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(o + (np.arange(N) + 0.5) * h
                     for o, N, h in zip(self.origin, self.n, self.h))

    @cached_property
    def freq_axes(self) -> tuple[np.ndarray, ...]:
        # fftfreq puts the Nyquist mode at -N/2, the negative representative.
        return tuple(2 * np.pi * np.fft.fftfreq(N, d=L / N)
                     for N, L in zip(self.n, self.length))

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def freqs(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.freq_axes, indexing="ij"))

    @cached_property
    def xi_sq(self) -> np.ndarray:
        return sum(k**2 for k in self.freqs)

    def points(self) -> np.ndarray:
        """All cell centers as an ``(size, d)`` array, C order."""
        return np.stack([c.ravel() for c in self.coords], axis=-1)

    def describe(self) -> dict:
        return {"d": self.d, "n": list(self.n), "length": list(self.length),
                "origin": list(self.origin)}


def make_grid(d: int, n, length, origin=None, max_points: int = MAX_POINTS) -> Grid:
    """Validate and build a :class:`Grid`. ``n``/``length`` may be scalars."""
    if d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
    n = _per_axis(n, d, "n")
    length = _per_axis(length, d, "length")
    for N in n:
        if int(N) != N or not _is_pow2(int(N)) or N < 8:
            raise ValueError(f"points per axis must be a power of two >= 8, got {N}")
    for L in length:
        if not np.isfinite(L) or L <= 0:
            raise ValueError(f"box length must be positive, got {L}")
    n = tuple(int(N) for N in n)
    length = tuple(float(L) for L in length)
    if int(np.prod(n)) > max_points:
        raise ValueError(f"{int(np.prod(n))} grid points exceed the budget of {max_points}")
    if origin is None:
        origin = tuple(-L / 2 for L in length)
    else:
        origin = tuple(float(o) for o in _per_axis(origin, d, "origin"))
    return Grid(n, length, origin)


def _per_axis(value, d, name):
    if np.isscalar(value):
        return (value,) * d
    value = tuple(value)
    if len(value) != d:
        raise ValueError(f"{name} has {len(value)} entries for dimension {d}")
    return value


@dataclass(frozen=True, eq=False)
class WaveFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.grid.shape:
            raise ValueError(f"values of shape {values.shape} do not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("wavefunction has non-finite entries")
        object.__setattr__(self, "values", values)

    def with_values(self, values) -> "WaveFunction":
        return WaveFunction(self.grid, values)

    def normalized(self) -> "WaveFunction":
        nrm = l2_norm(self)
        if nrm == 0:
            raise ValueError("cannot normalize the zero wavefunction")
        return WaveFunction(self.grid, self.values / nrm)


@dataclass(frozen=True, eq=False)
class MultiplierSymbol:
    grid: Grid
    values: np.ndarray
    tag: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.shape(self.values) != self.grid.shape:
            raise ValueError("symbol shape does not match grid")

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values) or not np.any(np.imag(self.values))

    def __mul__(self, other: "MultiplierSymbol") -> "MultiplierSymbol":
        _same_grid(self.grid, other.grid)
        return MultiplierSymbol(self.grid, self.values * other.values,
                                {"product": [self.tag, other.tag]})


def _same_grid(a: Grid, b: Grid):
    if a != b:
        raise ValueError("objects live on different grids")


def constant_symbol(grid: Grid, value) -> MultiplierSymbol:
    return MultiplierSymbol(grid, np.full(grid.shape, value), {"family": "constant", "value": value})


def dispersion(xi_sq, m: float = 1.0, c: float = 1.0):
    """``sqrt(c^2 |xi|^2 + m^2 c^4) - m c^2`` on an array of ``|xi|^2``.

    Written as ``c^2 |xi|^2 / (sqrt(...) + m c^2)`` to avoid cancellation at
    small frequencies.
    """
    mc2 = m * c * c
    return c * c * xi_sq / (np.sqrt(c * c * xi_sq + mc2 * mc2) + mc2)


def kinetic_symbol(grid: Grid, m: float = 1.0, c: float = 1.0) -> MultiplierSymbol:
    if m <= 0 or c <= 0:
        raise ValueError(f"mass and speed must be positive, got m={m}, c={c}")
    return MultiplierSymbol(grid, dispersion(grid.xi_sq, m, c),
                            {"family": "kinetic", "m": m, "c": c})


def japanese_symbol(grid: Grid, power: float = 1.0) -> MultiplierSymbol:
    """``<xi>**power`` with ``<xi> = sqrt(1 + |xi|^2)``."""
    return MultiplierSymbol(grid, (1.0 + grid.xi_sq) ** (0.5 * power),
                            {"family": "bracket", "power": power})


def theta1_symbol(grid: Grid) -> MultiplierSymbol:
    """Velocity component ``xi_1 / <xi>`` along the first axis."""
    return MultiplierSymbol(grid, grid.freqs[0] / np.sqrt(1.0 + grid.xi_sq),
                            {"family": "theta1"})


def _unit(n, d) -> np.ndarray:
    n = np.asarray(n, dtype=float).reshape(-1)
    if n.shape != (d,):
        raise ValueError(f"direction has {n.size} components for dimension {d}")
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValueError(f"direction must be a unit vector, |n| = {np.linalg.norm(n)!r}")
    return n


def f_pm_symbol(grid: Grid, n, sign: int = +1) -> MultiplierSymbol:
    """Principal root of ``|xi|^2 + 2i sign (n . xi)``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    n = _unit(n, grid.d)
    n_xi = sum(nk * k for nk, k in zip(n, grid.freqs))
    vals = np.sqrt(grid.xi_sq + 2j * sign * n_xi)
    return MultiplierSymbol(grid, vals, {"family": "f_pm", "n": n.tolist(), "sign": sign})


def im_sqrt(lam, mu):
    """Imaginary part of the principal square root of ``lam + i mu``.

    Uses ``sign(mu)/sqrt2 * (|z| - lam)^(1/2)`` for ``lam <= 0`` and the
    algebraically equal ``|mu| / sqrt2 / (|z| + lam)^(1/2)`` otherwise, which
    does not cancel. Points on the cut ``lam < 0, mu = 0`` raise.
    """
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    lam, mu = np.broadcast_arrays(lam, mu)
    if np.any((lam < 0) & (mu == 0)):
        raise ValueError("argument lies on the branch cut (negative real axis)")
    r = np.hypot(lam, mu)
    with np.errstate(divide="ignore", invalid="ignore"):
        neg = np.sqrt(np.maximum(r - lam, 0.0)) / np.sqrt(2.0)
        pos = np.abs(mu) / np.sqrt(2.0) / np.sqrt(r + lam)
    out = np.sign(mu) * np.where(lam > 0, pos, neg)
    out = np.where(r == 0, 0.0, out)
    return out[()] if out.ndim == 0 else out


def im_f_pm_quotient(xi_sq, n_xi):
    """Closed form ``sqrt2 |n.xi| / (sqrt(|xi|^4 + 4 (n.xi)^2) + |xi|^2)^(1/2)``."""
    xi_sq = np.asarray(xi_sq, dtype=float)
    n_xi = np.asarray(n_xi, dtype=float)
    den = np.sqrt(np.sqrt(xi_sq**2 + 4 * n_xi**2) + xi_sq)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sqrt(2.0) * np.abs(n_xi) / den
    return np.where(den == 0, 0.0, out)


def apply_multiplier(wf: WaveFunction, symbol: MultiplierSymbol) -> WaveFunction:
    _same_grid(wf.grid, symbol.grid)
    return WaveFunction(wf.grid, apply_symbol(wf.values, symbol.values))


def apply_symbol(values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
    """Array-level multiplier sandwich used in inner loops."""
    return np.fft.ifftn(symbol * np.fft.fftn(values))


def inner_product(a: WaveFunction, b: WaveFunction) -> complex:
    """``<a, b>``, antilinear in ``a``."""
    _same_grid(a.grid, b.grid)
    return complex(np.vdot(a.values, b.values) * a.grid.cell_volume)


def l2_norm(wf: WaveFunction) -> float:
    return float(np.linalg.norm(wf.values) * np.sqrt(wf.grid.cell_volume))


def fourier_l2_norm(wf: WaveFunction, weight=None) -> float:
    """L2 norm evaluated in frequency space, optionally with ``|weight|^2``."""
    coeffs = np.fft.fftn(wf.values)
    w = 1.0 if weight is None else np.abs(weight) ** 2
    return float(np.sqrt(np.sum(w * np.abs(coeffs) ** 2) * wf.grid.cell_volume / wf.grid.size))


def h_half_norm(wf: WaveFunction) -> float:
    """Sobolev norm with weight ``<xi>^(1/2)``."""
    return fourier_l2_norm(wf, (1.0 + wf.grid.xi_sq) ** 0.25)


def plane_wave(grid: Grid, k_index: Sequence[int]) -> WaveFunction:
    """Unit-norm Fourier mode with lattice frequency index ``k_index``."""
    xi = [2 * np.pi * k / L for k, L in zip(k_index, grid.length)]
    phase = sum(x_i * c for x_i, c in zip(xi, grid.coords))
    vol = float(np.prod(grid.length))
    return WaveFunction(grid, np.exp(1j * phase) / np.sqrt(vol))
