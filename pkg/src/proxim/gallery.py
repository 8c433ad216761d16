"""Named built-in instances together with the values they are expected to reproduce.

Each :class:`GalleryInstance` bundles an :class:`~proxim.instance.Instance`
with a list of :class:`Expectation` entries.  :func:`run_all` recomputes
every expected quantity through the matching library operation and diffs
it against the stored value.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from . import geometry as geo
from . import maps, properties, solver
from .errors import NotFound
from .geometry import SUP, GridBox, Interval, Point, Segment
from .instance import Instance

DEFAULT_GRID = 64
DEFAULT_SEED = 42


@dataclass(frozen=True)
class Expectation:
    """One expected quantity.

    ``comparator`` is ``"eq"`` (within ``tol``), ``"ge"`` (observed >=
    value - tol) or ``"le"`` (observed <= value + tol).  Strings and booleans
    always compare for equality.  ``source`` records where the value comes
    from: ``"worked-example"``, ``"derived"`` or ``"trivial"``.
    """

    quantity: str
    value: object
    tol: float = 0.0
    source: str = "derived"
    comparator: str = "eq"
    params: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        if not self.params:
            return self.quantity
        args = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.quantity}[{args}]"

    def compare(self, observed) -> bool:
        if isinstance(self.value, (str, bool)) or isinstance(observed, (str, bool)):
            return observed == self.value
        obs = observed if isinstance(observed, (list, tuple)) else [observed]
        exp = self.value if isinstance(self.value, (list, tuple)) else [self.value]
        if len(obs) != len(exp):
            return False
        for o, e in zip(obs, exp):
            if not math.isfinite(o):
                return False
            if self.comparator == "eq" and abs(o - e) > self.tol:
                return False
            if self.comparator == "ge" and o < e - self.tol:
                return False
            if self.comparator == "le" and o > e + self.tol:
                return False
        return True


@dataclass(frozen=True)
class GalleryInstance:
    instance: Instance
    expected: tuple = ()

    @property
    def name(self) -> str:
        return self.instance.name

    @property
    def pair(self):
        return self.instance.G, self.instance.H

    @property
    def map(self):
        return self.instance.map

    @property
    def gauge(self):
        return self.instance.gauge

    def with_expected(self, expected: Sequence[Expectation]) -> "GalleryInstance":
        return replace(self, expected=tuple(expected))


# ---------------------------------------------------------------------------
# instances


def _uc_not_suc(grid):
    G = Segment(Point((0.0, 0.0), SUP), Point((0.0, 1.0), SUP))
    H = Segment(Point((0.0, 0.0), SUP), Point((1.0, 0.0), SUP))
    inst = Instance("uc-not-suc", G, H, falsifier={"delta": 1e-3, "epsilon": 0.4, "budget": 20000, "seed": DEFAULT_SEED})
    suc = {"property": "strongly-uc", "delta": 1e-3, "epsilon": 0.4}
    uc = {"property": "uc", "delta": 1e-3, "epsilon": 0.05}
    return GalleryInstance(inst, (
        Expectation("property_separation", 0.5, 0.01, "worked-example", "ge", suc),
        Expectation("property_verdict", properties.VIOLATION_CANDIDATE, source="worked-example", params=suc),
        Expectation("property_verdict", properties.NO_VIOLATION, source="worked-example", params=uc),
    ))


def _function_space(grid):
    G = GridBox.uniform(grid, [(0.0, 1.0), (0.0, 0.0)])
    H = GridBox.uniform(grid, [(0.0, 0.0), (0.0, 1.0)])
    T = maps.CyclicMap(maps.Named("function-space", "G"), maps.Named("function-space", "H"), G, H, "function-space")
    inst = Instance("function-space", G, H, T, maps.Rational(), maps.HalfImaginaryProbes(0.9))
    expected = [Expectation("contraction_verdict", maps.HOLDS, source="worked-example",
                            params={"class": "almost-cyclic-psi"})]
    for beta in (0.0, 0.25, 0.5, 0.75):
        expected.append(Expectation("contraction_verdict", maps.VIOLATED, source="worked-example",
                                    params={"class": "almost-cyclic", "beta": beta}))
    expected.append(Expectation("contractive", False, source="worked-example", params={"class": "almost-cyclic"}))
    return GalleryInstance(inst, tuple(expected))


def _intervals_psi(grid):
    G, H = Interval(1.0, 2.0), Interval(-2.0, -1.0)
    T = maps.CyclicMap(maps.Named("intervals-psi", "G"), maps.Named("intervals-psi", "H"), G, H, "intervals-psi")
    inst = Instance("intervals-psi", G, H, T, maps.AffineShift(),
                    solver={"tol": 1e-9, "max_iter": 100000, "u0": [1.7]})
    return GalleryInstance(inst, (
        Expectation("set_distance", 2.0, 0.0, "worked-example"),
        Expectation("u_star", [1.0], 1e-8, "worked-example"),
        Expectation("companion", [-1.0], 1e-8, "worked-example"),
        Expectation("identities", True, source="derived"),
        Expectation("contraction_verdict", maps.HOLDS, source="worked-example",
                    params={"class": "almost-cyclic-psi"}),
        Expectation("contraction_verdict", maps.VIOLATED, source="worked-example", params={"class": "cyclic-psi"}),
        Expectation("semi_sharp_verdict", properties.SEMI_SHARP, source="derived"),
    ))


def _midpoint_pull(grid):
    G, H = Interval(1.0, 2.0), Interval(-2.0, -1.0)
    T = maps.CyclicMap(maps.Affine(((-0.5,),), (-0.5,)), maps.Affine(((-0.5,),), (0.5,)), G, H, "midpoint-pull")
    inst = Instance("midpoint-pull", G, H, T, maps.Linear(0.5),
                    solver={"tol": 1e-9, "max_iter": 100000, "u0": [2.0]})
    return GalleryInstance(inst, (
        Expectation("min_beta", 0.5, 1e-6, "derived", params={"class": "cyclic-contraction"}),
        Expectation("u_star", [1.0], 1e-8, "derived"),
        Expectation("gap_to_infimum", 0.0, 1e-8, "derived"),
        Expectation("iterations", 70, 0.0, "derived", "le"),
        Expectation("identities", True, source="derived"),
    ))


def _fixed_point_halving(grid):
    G = H = Interval(0.0, 1.0)
    half = maps.Affine(((0.5,),), (0.0,))
    T = maps.CyclicMap(half, half, G, H, "fixed-point-halving")
    inst = Instance("fixed-point-halving", G, H, T, maps.Linear(0.5),
                    solver={"tol": 1e-9, "max_iter": 100000, "u0": [1.0]})
    return GalleryInstance(inst, (
        Expectation("fixed_point", [0.0], 1e-8, "trivial"),
        Expectation("identities", True, source="trivial", params={"mode": "fixed-point"}),
    ))


_BUILDERS = {
    "uc-not-suc": _uc_not_suc,
    "function-space": _function_space,
    "intervals-psi": _intervals_psi,
    "midpoint-pull": _midpoint_pull,
    "fixed-point-halving": _fixed_point_halving,
}


def names() -> list:
    return list(_BUILDERS)


def load(name: str, grid: int = DEFAULT_GRID) -> GalleryInstance:
    """Return the named instance; ``grid`` only affects grid-function sets."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise NotFound(f"no gallery instance named {name!r}; known: {', '.join(_BUILDERS)}") from None
    return builder(grid)


# ---------------------------------------------------------------------------
# suite


@dataclass
class _Context:
    """Lazily computed, shared results for one instance."""

    instance: Instance
    samples: int
    seed: int
    _solves: dict = field(default_factory=dict)

    def solve(self, mode="best-approximation"):
        if mode not in self._solves:
            T = self.instance.require_map()
            cfg = self.instance.solver
            u0 = self.instance.G.point(cfg["u0"])
            fn = solver.solve_fixed_point if mode == "fixed-point" else solver.solve_best_approximation
            self._solves[mode] = fn(T, u0, cfg.get("tol", solver.DEFAULT_TOL),
                                    cfg.get("max_iter", solver.DEFAULT_MAX_ITER))
        return self._solves[mode]

    def falsify(self, p):
        G, H = self.instance.G, self.instance.H
        cfg = self.instance.falsifier
        fn = properties.falsify_strongly_uc if p["property"] == "strongly-uc" else properties.falsify_uc
        return fn(G, H, p.get("delta", cfg.get("delta", properties.DEFAULT_DELTA)),
                  p.get("epsilon", cfg.get("epsilon", properties.DEFAULT_EPSILON)),
                  cfg.get("budget", 10000), cfg.get("seed", self.seed))


def _quantity(ctx: _Context, e: Expectation):
    inst, p = ctx.instance, e.params
    q = e.quantity
    if q == "set_distance":
        return geo.set_distance(inst.G, inst.H).value
    if q in ("u_star", "companion"):
        return list(getattr(ctx.solve(), q).coords)
    if q == "gap_to_infimum":
        return ctx.solve().gap_to_infimum
    if q == "iterations":
        return ctx.solve().iterations
    if q == "fixed_point":
        return list(ctx.solve("fixed-point").u_star.coords)
    if q == "identities":
        r = ctx.solve(p.get("mode", "best-approximation"))
        return r.converged and solver.verify_solution_identities(r, inst.map, seed=ctx.seed).passed
    if q == "contraction_verdict":
        return maps.verify_class(inst.require_map(), p["class"], inst.gauge, ctx.samples, ctx.seed,
                                 beta=p.get("beta"), probes=inst.probes).verdict
    if q in ("min_beta", "contractive"):
        est = maps.estimate_min_beta(inst.require_map(), p["class"], ctx.samples, ctx.seed, probes=inst.probes)
        return est.beta if q == "min_beta" else est.contractive
    if q == "property_verdict":
        return ctx.falsify(p).verdict
    if q == "property_separation":
        w = ctx.falsify(p).best_witness
        return 0.0 if w is None else w.separation
    if q == "semi_sharp_verdict":
        return properties.check_semi_sharp_proximal(inst.G, inst.H, seed=ctx.seed).verdict
    raise ValueError(f"unknown quantity {q!r}")


@dataclass(frozen=True)
class QuantityResult:
    instance: str
    quantity: str
    expected: object
    observed: object
    tol: float
    comparator: str
    source: str
    passed: bool
    error: Optional[str] = None

    def to_json(self):
        return {
            "instance": self.instance, "quantity": self.quantity, "expected": self.expected,
            "observed": self.observed, "tol": self.tol, "comparator": self.comparator,
            "source": self.source, "passed": self.passed, "error": self.error,
        }


@dataclass(frozen=True)
class SuiteReport:
    results: tuple
    wall_time_s: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def misses(self):
        return [r for r in self.results if not r.passed]

    def to_json(self):
        return {
            "passed": self.passed,
            "checked": len(self.results),
            "misses": len(self.misses),
            "results": [r.to_json() for r in self.results],
        }


def run_all(instances: Optional[Sequence[GalleryInstance]] = None, grid: int = DEFAULT_GRID,
            samples: int = 10000, seed: int = DEFAULT_SEED) -> SuiteReport:
    """Recompute every expected quantity and diff it against the stored value.

    Errors raised while computing a quantity are reported as misses rather
    than propagated.
    """
    start = time.perf_counter()
    if instances is None:
        instances = [load(n, grid) for n in names()]
    results = []
    for gi in instances:
        ctx = _Context(gi.instance, samples, seed)
        for e in gi.expected:
            try:
                observed = _quantity(ctx, e)
                results.append(QuantityResult(gi.name, e.label, e.value, observed, e.tol, e.comparator,
                                              e.source, e.compare(observed)))
            except Exception as exc:  # a crash is a miss, not a suite abort
                results.append(QuantityResult(gi.name, e.label, e.value, None, e.tol, e.comparator,
                                              e.source, False, f"{type(exc).__name__}: {exc}"))
    return SuiteReport(tuple(results), time.perf_counter() - start)
