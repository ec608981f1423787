"""Convex primitives, nearest-point projections and distance geometry.

Supported convex sets are closed half-spaces ``n.x <= b``, closed balls,
closed axis-aligned boxes and finite intersections of those. A
:class:`Region` is a finite union of convex sets. Projections act on arrays
of points with shape ``(..., d)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConvergenceError

GEOM_TOL = 1e-10
MAX_ITER = 100_000


def _vec(v, name="vector") -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    return v


@dataclass(frozen=True, eq=False)
class HalfSpace:
    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = _vec(self.normal, "normal")
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("half-space normal must have unit length")
        if not math.isfinite(self.offset):
            raise ValueError("half-space offset must be finite")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self) -> int:
        return self.normal.size

    def contains(self, pts, tol=0.0):
        return np.asarray(pts) @ self.normal <= self.offset + tol

    def project(self, pts):
        pts = np.asarray(pts, dtype=float)
        excess = np.maximum(pts @ self.normal - self.offset, 0.0)
        return pts - excess[..., None] * self.normal

    def bbox(self):
        # only axis-aligned half-spaces bound one side
        lo = np.full(self.dim, -np.inf)
        hi = np.full(self.dim, np.inf)
        k = np.flatnonzero(np.abs(self.normal) == 1.0)
        if k.size == 1:
            i = k[0]
            if self.normal[i] > 0:
                hi[i] = self.offset
            else:
                lo[i] = -self.offset
        return lo, hi

    def translate(self, v):
        v = _vec(v)
        return HalfSpace(self.normal, self.offset + self.normal @ v)

    def to_json(self):
        return {"halfspace": {"normal": self.normal.tolist(), "offset": self.offset}}


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center, "center"))
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.size

    def contains(self, pts, tol=0.0):
        return np.linalg.norm(np.asarray(pts) - self.center, axis=-1) <= self.radius + tol

    def project(self, pts):
        pts = np.asarray(pts, dtype=float)
        off = pts - self.center
        r = np.linalg.norm(off, axis=-1)
        scale = np.where(r > self.radius, self.radius / np.where(r > 0, r, 1.0), 1.0)
        return self.center + off * scale[..., None]

    def bbox(self):
        return self.center - self.radius, self.center + self.radius

    def translate(self, v):
        return Ball(self.center + _vec(v), self.radius)

    def to_json(self):
        return {"ball": {"center": self.center.tolist(), "radius": self.radius}}


@dataclass(frozen=True, eq=False)
class AxisBox:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo, hi = _vec(self.lo, "lo"), _vec(self.hi, "hi")
        if lo.shape != hi.shape or not np.all(lo < hi):
            raise ValueError("box corners must satisfy lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    def contains(self, pts, tol=0.0):
        pts = np.asarray(pts)
        return np.all((pts >= self.lo - tol) & (pts <= self.hi + tol), axis=-1)

    def project(self, pts):
        return np.clip(np.asarray(pts, dtype=float), self.lo, self.hi)

    def bbox(self):
        return self.lo.copy(), self.hi.copy()

    def translate(self, v):
        v = _vec(v)
        return AxisBox(self.lo + v, self.hi + v)

    def to_json(self):
        return {"box": {"lo": self.lo.tolist(), "hi": self.hi.tolist()}}


@dataclass(frozen=True, eq=False)
class Intersection:
    parts: tuple
    tol: float = GEOM_TOL
    max_iter: int = MAX_ITER

    def __post_init__(self):
        flat = []
        for p in self.parts:
            flat.extend(p.parts if isinstance(p, Intersection) else [p])
        if not flat:
            raise ValueError("intersection needs at least one set")
        if len({p.dim for p in flat}) != 1:
            raise ValueError("intersected sets have different dimensions")
        object.__setattr__(self, "parts", tuple(flat))

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    def contains(self, pts, tol=0.0):
        out = self.parts[0].contains(pts, tol)
        for p in self.parts[1:]:
            out = out & p.contains(pts, tol)
        return out

    def project(self, pts):
        """Dykstra's alternating projection, run until every point settles."""
        pts = np.asarray(pts, dtype=float)
        if len(self.parts) == 1:
            return self.parts[0].project(pts)
        x = pts.copy()
        incr = [np.zeros_like(x) for _ in self.parts]
        for _ in range(self.max_iter):
            x_old = x
            for i, part in enumerate(self.parts):
                y = x + incr[i]
                x = part.project(y)
                incr[i] = y - x
            step = np.max(np.abs(x - x_old)) if x.size else 0.0
            if step < 0.1 * self.tol and np.all(self.contains(x, self.tol)):
                return x
        raise ConvergenceError(
            f"Dykstra projection did not converge in {self.max_iter} cycles "
            "(ill-conditioned or empty intersection?)")

    def bbox(self):
        lo = np.full(self.dim, -np.inf)
        hi = np.full(self.dim, np.inf)
        for p in self.parts:
            plo, phi = p.bbox()
            lo, hi = np.maximum(lo, plo), np.minimum(hi, phi)
        return lo, hi

    def translate(self, v):
        return Intersection(tuple(p.translate(v) for p in self.parts), self.tol, self.max_iter)

    def to_json(self):
        return {"intersection": [p.to_json() for p in self.parts]}


ConvexRegion = Union[HalfSpace, Ball, AxisBox, Intersection]


@dataclass(frozen=True, eq=False)
class Region:
    """Finite union of convex sets."""

    parts: tuple

    def __post_init__(self):
        flat = []
        for p in self.parts:
            flat.extend(p.parts if isinstance(p, Region) else [p])
        if not flat:
            raise ValueError("region needs at least one convex component")
        if len({p.dim for p in flat}) != 1:
            raise ValueError("region components have different dimensions")
        object.__setattr__(self, "parts", tuple(flat))

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    @property
    def is_convex(self) -> bool:
        return len(self.parts) == 1

    def contains(self, pts, tol=0.0):
        out = self.parts[0].contains(pts, tol)
        for p in self.parts[1:]:
            out = out | p.contains(pts, tol)
        return out

    def bbox(self):
        boxes = [p.bbox() for p in self.parts]
        return (np.min([b[0] for b in boxes], axis=0), np.max([b[1] for b in boxes], axis=0))

    def translate(self, v):
        return Region(tuple(p.translate(v) for p in self.parts))

    def to_json(self):
        if self.is_convex:
            return self.parts[0].to_json()
        return {"union": [p.to_json() for p in self.parts]}


def as_region(obj) -> Region:
    return obj if isinstance(obj, Region) else Region((obj,))


def as_convex(obj) -> ConvexRegion:
    if isinstance(obj, Region):
        if not obj.is_convex:
            raise ValueError("a convex set is required, got a union of several components")
        return obj.parts[0]
    return obj


def region_from_json(obj) -> Region:
    return as_region(_from_json(obj))


def _from_json(obj):
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ValueError(f"region must be an object with exactly one tag, got {obj!r}")
    (tag, body), = obj.items()
    if tag == "ball":
        return Ball(body["center"], body["radius"])
    if tag == "halfspace":
        return HalfSpace(body["normal"], body["offset"])
    if tag == "box":
        return AxisBox(body["lo"], body["hi"])
    if tag == "intersection":
        return Intersection(tuple(_from_json(o) for o in body))
    if tag == "union":
        return Region(tuple(_from_json(o) for o in body))
    raise ValueError(f"unknown region tag {tag!r}")


def project(point, region):
    return as_convex(region).project(point)


def _reference_point(c) -> np.ndarray:
    lo, hi = c.bbox()
    ref = np.where(np.isfinite(lo) & np.isfinite(hi), 0.5 * (lo + hi),
                   np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0)))
    return c.project(ref)


def _convex_distance(A, B, tol=GEOM_TOL, max_iter=MAX_ITER):
    a = _reference_point(A)
    b = B.project(a)
    for _ in range(max_iter):
        a_new = A.project(b)
        b_new = B.project(a_new)
        step = max(np.max(np.abs(a_new - a)), np.max(np.abs(b_new - b)))
        a, b = a_new, b_new
        if step < tol:
            return float(np.linalg.norm(a - b)), a, b
    raise ConvergenceError(f"alternating projections did not converge in {max_iter} iterations")


def distance(A, B, tol=GEOM_TOL, max_iter=MAX_ITER):
    """``(dist, a, b)`` with ``a`` in ``A`` and ``b`` in ``B`` realizing the distance.

    Works on convex sets or on unions, where the minimum over component
    pairs is taken.
    """
    best = None
    for pa in as_region(A).parts:
        for pb in as_region(B).parts:
            res = _convex_distance(pa, pb, tol, max_iter)
            if best is None or res[0] < best[0]:
                best = res
    return best


@dataclass(frozen=True)
class SeparatingFunctional:
    """Affine map ``x -> n.(x - x0)`` with a unit normal."""

    normal: np.ndarray
    base: np.ndarray

    def __post_init__(self):
        n = _vec(self.normal)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("separating functional needs a unit normal")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "base", _vec(self.base))

    def __call__(self, pts):
        return (np.asarray(pts, dtype=float) - self.base) @ self.normal

    def on_grid(self, grid) -> np.ndarray:
        return sum(n_i * (x - b) for n_i, x, b in zip(self.normal, grid.coords, self.base))

    def negated(self) -> "SeparatingFunctional":
        return SeparatingFunctional(-self.normal, self.base)

    def to_json(self):
        return {"normal": self.normal.tolist(), "base": self.base.tolist()}


def separating_functional(A, B, tol=GEOM_TOL) -> SeparatingFunctional:
    """Functional with ``ell >= dist/2`` on ``A`` and ``ell <= -dist/2`` on ``B``.

    Built from the nearest pair ``(a, b)``: the normal points from ``b`` to
    ``a`` and the base point is their midpoint.
    """
    A, B = as_convex(A), as_convex(B)
    dist, a, b = _convex_distance(A, B, tol)
    if dist <= 10 * tol:
        raise ValueError("sets are not separated (distance is zero)")
    return SeparatingFunctional((a - b) / np.linalg.norm(a - b), 0.5 * (a + b))


def indicator_mask(region, grid) -> np.ndarray:
    """Boolean field: cell center inside ``region``."""
    region = as_region(region)
    if region.dim != grid.d:
        raise ValueError(f"region has dimension {region.dim}, grid has {grid.d}")
    pts = np.stack(grid.coords, axis=-1)
    return region.contains(pts)


def distance_field(region, grid) -> np.ndarray:
    """Euclidean distance from every cell center to ``region``."""
    region = as_region(region)
    if region.dim != grid.d:
        raise ValueError(f"region has dimension {region.dim}, grid has {grid.d}")
    pts = np.stack(grid.coords, axis=-1)
    out = None
    for part in region.parts:
        dpart = np.linalg.norm(pts - part.project(pts), axis=-1)
        out = dpart if out is None else np.minimum(out, dpart)
    return out


def sample_region(region, n, rng, bbox=None, max_batches=1000) -> np.ndarray:
    """Uniform rejection samples from ``region`` (clipped to ``bbox`` if given)."""
    region = as_region(region)
    lo, hi = region.bbox() if bbox is None else (np.asarray(bbox[0], float), np.asarray(bbox[1], float))
    if bbox is not None:
        rlo, rhi = region.bbox()
        lo, hi = np.maximum(lo, rlo), np.minimum(hi, rhi)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("unbounded region: pass a bounding box to sample from")
    out, have = [], 0
    for _ in range(max_batches):
        cand = rng.uniform(lo, hi, size=(max(4 * n, 1024), lo.size))
        keep = cand[region.contains(cand)]
        out.append(keep)
        have += len(keep)
        if have >= n:
            return np.concatenate(out)[:n]
    raise ValueError("rejection sampling found too few points inside the region")


def _cube_meets(part, lo, hi, shrink) -> bool:
    """Does the half-open cube ``[lo, hi)`` meet the closed convex ``part``?"""
    if isinstance(part, AxisBox):
        return bool(np.all((lo <= part.hi) & (part.lo < hi)))
    cube = AxisBox(lo, hi - shrink)
    if isinstance(part, Ball):
        return bool(np.linalg.norm(cube.project(part.center) - part.center) <= part.radius)
    if isinstance(part, HalfSpace):
        n = part.normal
        low = np.sum(np.minimum(n * cube.lo, n * cube.hi))
        return bool(low <= part.offset)
    for p in part.parts:
        if not _cube_meets(p, lo, hi, shrink):
            return False
    dist, _, _ = _convex_distance(cube, part)
    return dist <= 10 * GEOM_TOL


def cube_tiling(region, r: float) -> list[np.ndarray]:
    """Centers ``z`` in ``(r Z)^d`` whose cubes ``z + r[-1/2, 1/2)^d`` meet ``region``."""
    if not r > 0:
        raise ValueError("cube side must be positive")
    region = as_region(region)
    shrink = 1e-9 * r
    found = set()
    for part in region.parts:
        lo, hi = part.bbox()
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("cube tiling needs bounded convex components")
        kmin = np.floor(lo / r - 0.5).astype(int) + 1
        kmax = np.floor(hi / r + 0.5).astype(int)
        ranges = [range(a, b + 1) for a, b in zip(kmin, kmax)]
        for k in itertools.product(*ranges):
            if k in found:
                continue
            z = r * np.asarray(k, dtype=float)
            if _cube_meets(part, z - r / 2, z + r / 2, shrink):
                found.add(k)
    return [r * np.asarray(k, dtype=float) for k in sorted(found)]


def _lattice_tail_bound(M: int, rate: float, d: int) -> float:
    """Majorant of ``sum_{|z|_inf > M} exp(-rate |z|)`` over ``Z^d``.

    Uses ``#{|z|_inf = j} <= 2d (2j+1)^(d-1)`` and ``|z| >= |z|_inf``; term
    ratios are then bounded by ``q = ((2M+5)/(2M+3))^(d-1) e^-rate`` and the
    tail by a geometric series.
    """
    j = M + 1
    q = ((2 * j + 3) / (2 * j + 1)) ** (d - 1) * math.exp(-rate)
    if q >= 1:
        return math.inf
    first = 2 * d * (2 * j + 1) ** (d - 1) * math.exp(-rate * j)
    return first / (1 - q)


def _shell_sum(M: int, R: float, rate: float, d: int) -> float:
    ax = np.arange(-M, M + 1, dtype=float)
    rest = np.zeros(1)
    for _ in range(d - 1):
        rest = (rest[:, None] + ax[None, :] ** 2).ravel()
    total = 0.0
    thresh = R * R * (1 - 1e-14) if R > 0 else -1.0
    for z1 in ax:
        sq = z1 * z1 + rest
        keep = sq >= thresh
        total += float(np.sum(np.exp(-rate * np.sqrt(sq[keep]))))
    return total


def tiling_constant(dist: float, r: float, d: int, rel_tol: float = 1e-10) -> float:
    """Non-convex prefactor ``e^{r sqrt d} sum_{z in Z^d, |z| >= dist/r - sqrt d} e^{-r|z|}``.

    The lattice sum is truncated at ``|z|_inf <= M`` with ``M`` grown until
    the geometric tail majorant is below ``rel_tol`` of the partial sum.
    """
    if d not in (1, 2, 3):
        raise ValueError("dimension must be 1, 2 or 3")
    if not r > 0:
        raise ValueError("cube side r must be positive")
    if not dist > r * math.sqrt(d):
        raise ValueError(f"need dist > r sqrt(d) = {r * math.sqrt(d)}, got dist = {dist}")
    R = dist / r - math.sqrt(d)
    M = max(int(math.ceil(R)) + 1, 8)
    while True:
        partial = _shell_sum(M, R, r, d)
        tail = _lattice_tail_bound(M, r, d)
        if partial > 0 and tail < rel_tol * partial:
            return math.exp(r * math.sqrt(d)) * partial
        M *= 2
