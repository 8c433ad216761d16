"""Norms, points, closed set descriptors and point/set distances.

Every descriptor exposes a parameterization of its members by a box of
parameters in [0, 1]^k.  The parameterization is affine for intervals, boxes
and segments, so convex combinations in parameter space stay inside the set;
the samplers, falsifiers and candidate search below all work in that space.

All batch methods take and return ``(m, dim)`` arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError

SEARCH_TOL = 1e-10
CANDIDATE_TOL = 1e-8
DEDUP_RESOLUTION = 1e-6
MEMBERSHIP_TOL = 1e-9

INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI2 = (3 - math.sqrt(5)) / 2


@dataclass(frozen=True)
class NormTag:
    """The p of an l_p norm; ``math.inf`` selects the supremum norm."""

    p: float = 2.0

    def __post_init__(self):
        p = float(self.p)
        if math.isnan(p) or p < 1:
            raise ValueError(f"norm exponent must be >= 1 or inf, got {self.p!r}")
        object.__setattr__(self, "p", p)

    @classmethod
    def parse(cls, value) -> "NormTag":
        if isinstance(value, NormTag):
            return value
        if isinstance(value, str):
            if value.strip().lower() in ("inf", "infinity", "sup", "max"):
                return cls(math.inf)
            return cls(float(value))
        return cls(float(value))

    @property
    def is_sup(self) -> bool:
        return math.isinf(self.p)

    def to_json(self):
        return "inf" if self.is_sup else self.p

    def __call__(self, diff) -> np.ndarray:
        """Norm of ``diff`` along its last axis."""
        diff = np.asarray(diff, dtype=float)
        if self.is_sup:
            return np.max(np.abs(diff), axis=-1)
        a = np.abs(diff)
        if self.p == 1.0:
            return np.sum(a, axis=-1)
        # scale by the largest entry so tiny or huge coordinates neither underflow nor overflow
        m = np.max(a, axis=-1, keepdims=True) if a.shape[-1] else np.zeros(a.shape[:-1] + (1,))
        r = a / np.where(m > 0, m, 1.0)
        if self.p == 2.0:
            s = np.sqrt(np.sum(r * r, axis=-1))
        else:
            s = np.sum(r ** self.p, axis=-1) ** (1.0 / self.p)
        return m[..., 0] * s

    def __str__(self):
        return "inf" if self.is_sup else f"{self.p:g}"


EUCLIDEAN = NormTag(2.0)
SUP = NormTag(math.inf)


@dataclass(frozen=True)
class Point:
    """A finite coordinate vector tagged with its ambient norm."""

    coords: tuple
    norm: NormTag = EUCLIDEAN

    def __post_init__(self):
        coords = tuple(float(c) for c in np.ravel(np.asarray(self.coords, dtype=float)))
        if not coords:
            raise ValueError("a point needs at least one coordinate")
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"non-finite coordinate in {coords}")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "norm", NormTag.parse(self.norm))

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords, dtype=float)

    def __len__(self):
        return len(self.coords)

    def __getitem__(self, i):
        return self.coords[i]


def _check_same(x: Point, y: Point):
    if x.dim != y.dim:
        raise DimensionError(f"dimension mismatch: {x.dim} vs {y.dim}")
    if x.norm != y.norm:
        raise DimensionError(f"norm mismatch: {x.norm} vs {y.norm}")


def distance(x: Point, y: Point) -> float:
    """``||x - y||_p`` for two points sharing dimension and norm."""
    _check_same(x, y)
    return float(x.norm(x.array - y.array))


# ---------------------------------------------------------------------------
# golden-section search


def golden_section(f, lo, hi, tol=SEARCH_TOL):
    """Vectorized golden-section search for convex scalar functions.

    ``f`` maps an array of abscissae (one per problem) to an array of values.
    ``lo`` and ``hi`` are arrays of bracket ends.  Returns the array of
    minimizers; the endpoints are compared against the interior result so
    that minima sitting on the bracket boundary are returned exactly.
    """
    a = np.array(lo, dtype=float, ndmin=1)
    b = np.array(hi, dtype=float, ndmin=1)
    width = float(np.max(b - a)) if a.size else 0.0
    if width <= tol:
        t = 0.5 * (a + b)
    else:
        n = int(math.ceil(math.log(tol / width) / math.log(INV_PHI)))
        h = b - a
        c = a + INV_PHI2 * h
        d = a + INV_PHI * h
        fc = f(c)
        fd = f(d)
        for _ in range(n):
            left = fc <= fd
            # shrink to [a, d] where the left probe wins, [c, b] elsewhere
            b = np.where(left, d, b)
            a = np.where(left, a, c)
            h = b - a
            new_c = np.where(left, a + INV_PHI2 * h, d)
            new_d = np.where(left, c, a + INV_PHI * h)
            probe = np.where(left, new_c, new_d)
            fp = f(probe)
            fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
            c, d = new_c, new_d
        t = 0.5 * (a + b)
    lo_arr = np.array(lo, dtype=float, ndmin=1)
    hi_arr = np.array(hi, dtype=float, ndmin=1)
    ft = f(t)
    flo = f(lo_arr)
    fhi = f(hi_arr)
    t = np.where(flo <= ft, lo_arr, t)
    ft = np.minimum(ft, flo)
    t = np.where(fhi < ft, hi_arr, t)
    return t


# ---------------------------------------------------------------------------
# set descriptors


class SetDescriptor:
    """Common interface of the closed sets handled by the package."""

    exact = True

    @property
    def dim(self) -> int:
        raise NotImplementedError

    @property
    def param_dim(self) -> int:
        raise NotImplementedError

    @property
    def sample_dim(self) -> int:
        """Dimension of the unit cube consumed by :meth:`sample_params`."""
        return self.param_dim

    def sample_params(self, unit: np.ndarray) -> np.ndarray:
        return np.asarray(unit, dtype=float)

    def from_params(self, params: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def nearest(self, points: np.ndarray):
        """Return ``(values, witnesses, params)`` for a batch of query points."""
        raise NotImplementedError

    def vertex_params(self) -> np.ndarray:
        """Parameters of distinguished extreme points (endpoints, corners)."""
        raise NotImplementedError

    def candidate_params(self, budget: int = 4096) -> np.ndarray:
        """A fixed dense parameter pool used for near-minimizer enumeration."""
        k = self.param_dim
        if k == 0:
            return np.zeros((1, 0))
        per_axis = int(math.floor(budget ** (1.0 / k)))
        if per_axis >= 3:
            axes = [np.linspace(0.0, 1.0, per_axis)] * k
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
            return grid
        from .sampling import unit_samples

        return np.vstack([self.vertex_params(), unit_samples(budget, k, seed=0)])

    def contains(self, x: Point, tol: float = MEMBERSHIP_TOL) -> bool:
        self.check_point(x)
        value = self.nearest(x.array[None, :])[0][0]
        return bool(value <= tol)

    def check_point(self, x: Point):
        if x.dim != self.dim:
            raise DimensionError(f"point has dim {x.dim}, set has dim {self.dim}")
        if x.norm != self.norm:
            raise DimensionError(f"point norm {x.norm} differs from set norm {self.norm}")

    def point(self, coords) -> Point:
        return Point(tuple(np.asarray(coords, dtype=float).ravel()), self.norm)

    def points(self, arr) -> list:
        return [self.point(row) for row in np.atleast_2d(arr)]


class _AxisAligned(SetDescriptor):
    """Shared machinery of Interval, Box and GridBox (exact clamping)."""

    @cached_property
    def lo_arr(self) -> np.ndarray:
        return np.array(self._lo_tuple(), dtype=float)

    @cached_property
    def hi_arr(self) -> np.ndarray:
        return np.array(self._hi_tuple(), dtype=float)

    @cached_property
    def free_axes(self) -> np.ndarray:
        return np.flatnonzero(self.hi_arr > self.lo_arr)

    def _validate(self):
        lo, hi = self.lo_arr, self.hi_arr
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
            raise ValueError("lo and hi must be nonempty vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("bounds must be finite")
        if np.any(lo > hi):
            raise ValueError(f"lo must not exceed hi componentwise: {lo} > {hi}")

    @property
    def dim(self) -> int:
        return self.lo_arr.size

    @property
    def param_dim(self) -> int:
        return self.free_axes.size

    def from_params(self, params):
        params = np.asarray(params, dtype=float).reshape(-1, self.param_dim)
        out = np.tile(self.lo_arr, (params.shape[0], 1))
        ax = self.free_axes
        out[:, ax] = self.lo_arr[ax] + params * (self.hi_arr[ax] - self.lo_arr[ax])
        return out

    def to_params(self, points):
        ax = self.free_axes
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        return (pts[:, ax] - self.lo_arr[ax]) / (self.hi_arr[ax] - self.lo_arr[ax])

    def nearest(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        w = np.clip(pts, self.lo_arr, self.hi_arr)
        return self.norm(pts - w), w, self.to_params(w)

    def vertex_params(self):
        k = self.param_dim
        if k == 0:
            return np.zeros((1, 0))
        if k <= 4:
            return np.array(np.meshgrid(*([[0.0, 1.0]] * k), indexing="ij")).reshape(k, -1).T
        return np.vstack([np.zeros(k), np.ones(k)])


@dataclass(frozen=True)
class Interval(_AxisAligned):
    """Closed interval [lo, hi] of the real line."""

    lo: float
    hi: float
    norm: NormTag = EUCLIDEAN

    def __post_init__(self):
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        object.__setattr__(self, "norm", NormTag.parse(self.norm))
        self._validate()

    def _lo_tuple(self):
        return (self.lo,)

    def _hi_tuple(self):
        return (self.hi,)


@dataclass(frozen=True)
class Box(_AxisAligned):
    """Axis-aligned box ``{x : lo <= x <= hi}``; degenerate axes allowed."""

    lo: tuple
    hi: tuple
    norm: NormTag = EUCLIDEAN

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in np.ravel(self.lo)))
        object.__setattr__(self, "hi", tuple(float(v) for v in np.ravel(self.hi)))
        object.__setattr__(self, "norm", NormTag.parse(self.norm))
        self._validate()

    def _lo_tuple(self):
        return self.lo

    def _hi_tuple(self):
        return self.hi


@dataclass(frozen=True)
class GridBox(Box):
    """Box of grid-sampled functions on a uniform grid of [0, 1].

    Coordinates are stored component-major: for complex-valued functions
    ``h = h1 + i h2`` the first ``grid`` coordinates hold ``h1`` and the next
    ``grid`` hold ``h2``.

    Sampling draws an amplitude ``r`` alongside the per-axis profile ``w`` and
    uses ``lo + r * w * (hi - lo)``, so small functions are represented as
    well as typical ones.
    """

    grid: int = 64

    def __post_init__(self):
        super().__post_init__()
        if int(self.grid) < 2:
            raise ValueError("grid needs at least two points")
        object.__setattr__(self, "grid", int(self.grid))
        if len(self.lo) % self.grid:
            raise ValueError(f"dimension {len(self.lo)} is not a multiple of grid {self.grid}")

    @classmethod
    def uniform(cls, grid: int, bounds: Sequence, norm=None) -> "GridBox":
        """One ``(lo, hi)`` pair per component, constant over the grid."""
        lo = np.concatenate([np.full(grid, float(b[0])) for b in bounds])
        hi = np.concatenate([np.full(grid, float(b[1])) for b in bounds])
        return cls(tuple(lo), tuple(hi), SUP if norm is None else norm, grid)

    @property
    def components(self) -> int:
        return self.dim // self.grid

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid)

    def uniform_bounds(self):
        """Per-component bounds when constant over the grid, else ``None``."""
        out = []
        for c in range(self.components):
            sl = slice(c * self.grid, (c + 1) * self.grid)
            lo, hi = self.lo_arr[sl], self.hi_arr[sl]
            if np.ptp(lo) or np.ptp(hi):
                return None
            out.append((float(lo[0]), float(hi[0])))
        return out

    @property
    def sample_dim(self) -> int:
        return self.param_dim + 1 if self.param_dim else 0

    def sample_params(self, unit):
        unit = np.asarray(unit, dtype=float)
        if self.param_dim == 0:
            return unit[:, :0]
        return unit[:, :1] * unit[:, 1:]


@dataclass(frozen=True)
class Segment(SetDescriptor):
    """Closed line segment ``{a + t (b - a) : t in [0, 1]}``."""

    a: Point
    b: Point

    exact = False

    def __post_init__(self):
        a = self.a if isinstance(self.a, Point) else Point(self.a)
        b = self.b if isinstance(self.b, Point) else Point(self.b, a.norm)
        _check_same(a, b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def norm(self) -> NormTag:
        return self.a.norm

    @property
    def dim(self) -> int:
        return self.a.dim

    @property
    def param_dim(self) -> int:
        return 1

    @cached_property
    def _a(self):
        return self.a.array

    @cached_property
    def _dir(self):
        return self.b.array - self.a.array

    @cached_property
    def length(self) -> float:
        return float(self.norm(self._dir))

    def from_params(self, params):
        t = np.asarray(params, dtype=float).reshape(-1, 1)
        return self._a + t * self._dir

    def nearest(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        m = pts.shape[0]
        if self.length == 0.0:
            t = np.zeros(m)
        else:
            rel = pts - self._a

            def f(t):
                return self.norm(rel - t[:, None] * self._dir)

            # parameter tolerance scaled so the distance error stays below SEARCH_TOL
            t = golden_section(f, np.zeros(m), np.ones(m), SEARCH_TOL / max(1.0, self.length))
        w = self._a + t[:, None] * self._dir
        return self.norm(pts - w), w, t[:, None]

    def vertex_params(self):
        return np.array([[0.0], [1.0]])

    def candidate_params(self, budget: int = 4096):
        return np.linspace(0.0, 1.0, max(budget, 2) + 1)[:, None]


@dataclass(frozen=True)
class FiniteCloud(SetDescriptor):
    """Finite nonempty set of points."""

    members: tuple

    def __post_init__(self):
        members = tuple(p if isinstance(p, Point) else Point(p) for p in self.members)
        if not members:
            raise ValueError("a finite cloud needs at least one point")
        for p in members[1:]:
            _check_same(members[0], p)
        object.__setattr__(self, "members", members)

    @property
    def norm(self) -> NormTag:
        return self.members[0].norm

    @property
    def dim(self) -> int:
        return self.members[0].dim

    @property
    def param_dim(self) -> int:
        return 1

    @cached_property
    def matrix(self) -> np.ndarray:
        return np.array([p.coords for p in self.members], dtype=float)

    def _index(self, params):
        p = np.asarray(params, dtype=float).reshape(-1)
        n = len(self.members)
        return np.clip(np.floor(p * n), 0, n - 1).astype(int)

    def from_params(self, params):
        return self.matrix[self._index(params)]

    def nearest(self, points):
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        d = self.norm(pts[:, None, :] - self.matrix[None, :, :])
        idx = np.argmin(d, axis=1)
        n = len(self.members)
        return d[np.arange(pts.shape[0]), idx], self.matrix[idx], ((idx + 0.5) / n)[:, None]

    def vertex_params(self):
        n = len(self.members)
        return ((np.arange(n) + 0.5) / n)[:, None]

    def candidate_params(self, budget: int = 4096):
        return self.vertex_params()


@dataclass(frozen=True)
class DistanceResult:
    """A distance value with the nearest point found.

    For set-to-set distances ``witness`` lies in the first set and
    ``partner`` in the second.
    """

    value: float
    witness: Optional[Point] = None
    exact: bool = True
    partner: Optional[Point] = None


def _check_set(x: Point, s: SetDescriptor):
    s.check_point(x)


def _check_sets(a: SetDescriptor, b: SetDescriptor):
    if a.dim != b.dim:
        raise DimensionError(f"set dimensions differ: {a.dim} vs {b.dim}")
    if a.norm != b.norm:
        raise DimensionError(f"set norms differ: {a.norm} vs {b.norm}")


def point_set_distance(x: Point, s: SetDescriptor) -> DistanceResult:
    """Distance from ``x`` to ``s`` with a nearest point of ``s``."""
    _check_set(x, s)
    values, witnesses, _ = s.nearest(x.array[None, :])
    return DistanceResult(float(values[0]), s.point(witnesses[0]), s.exact)


def set_distance(a: SetDescriptor, b: SetDescriptor) -> DistanceResult:
    """``inf { ||u - v|| : u in a, v in b }`` with attaining points."""
    _check_sets(a, b)
    norm = a.norm
    if isinstance(a, _AxisAligned) and isinstance(b, _AxisAligned):
        gap = np.maximum(0.0, np.maximum(a.lo_arr - b.hi_arr, b.lo_arr - a.hi_arr))
        u = np.where(a.hi_arr < b.lo_arr, a.hi_arr,
                     np.where(a.lo_arr > b.hi_arr, a.lo_arr, np.maximum(a.lo_arr, b.lo_arr)))
        v = np.clip(u, b.lo_arr, b.hi_arr)
        return DistanceResult(float(norm(gap)), a.point(u), True, b.point(v))
    if isinstance(a, FiniteCloud):
        values, w, _ = b.nearest(a.matrix)
        i = int(np.argmin(values))
        return DistanceResult(float(values[i]), a.members[i], b.exact, b.point(w[i]))
    if isinstance(b, FiniteCloud):
        values, w, _ = a.nearest(b.matrix)
        i = int(np.argmin(values))
        return DistanceResult(float(values[i]), a.point(w[i]), a.exact, b.members[i])
    if not isinstance(a, Segment):
        flipped = set_distance(b, a)
        return DistanceResult(flipped.value, flipped.partner, False, flipped.witness)

    # nested golden-section: the outer function s -> dist(a(s), b) is convex
    def outer(s):
        return b.nearest(a.from_params(s))[0]

    s = golden_section(outer, np.zeros(1), np.ones(1), SEARCH_TOL / max(1.0, a.length))
    u = a.from_params(s)
    values, v, _ = b.nearest(u)
    return DistanceResult(float(values[0]), a.point(u[0]), False, b.point(v[0]))


def project_candidates(x: Point, s: SetDescriptor, k: int, level: Optional[float] = None) -> list:
    """Up to ``k`` distinct points of ``s`` at (near-)minimal distance from ``x``.

    A point qualifies when its distance to ``x`` is within ``CANDIDATE_TOL`` of
    ``level`` (default: the point-to-set distance).  Candidates closer than
    ``DEDUP_RESOLUTION`` to an already kept one are merged.  The nearest point
    comes first; when more than ``k`` qualify, a spread-out subset is chosen by
    farthest-point selection.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    _check_set(x, s)
    best = point_set_distance(x, s)
    target = best.value if level is None else float(level)
    if best.value > target + CANDIDATE_TOL:
        return []
    pool = np.vstack([best.witness.array[None, :], s.from_params(s.candidate_params())])
    d = s.norm(pool - x.array)
    pool = pool[np.abs(d - target) <= CANDIDATE_TOL]
    # greedy dedup in pool order: each kept row absorbs everything within the resolution
    alive = np.ones(len(pool), dtype=bool)
    kept = []
    for i in range(len(pool)):
        if not alive[i]:
            continue
        kept.append(pool[i])
        alive[s.norm(pool - pool[i]) <= DEDUP_RESOLUTION] = False
    if len(kept) > k:
        kept_arr = np.array(kept)
        chosen = [0]
        gaps = s.norm(kept_arr - kept_arr[0])
        while len(chosen) < k:
            i = int(np.argmax(gaps))
            chosen.append(i)
            gaps = np.minimum(gaps, s.norm(kept_arr - kept_arr[i]))
        kept = [kept_arr[i] for i in chosen]
    return [s.point(row) for row in kept]
