"""Picard iteration u_{n+1} = T u_n with best-approximation diagnostics.

Starting from ``u_0`` in G the iterates alternate between G (even indices)
and H (odd indices).  Two diagnostic series are recorded:

* ``d[n] = sigma(u_n, u_{n+1})``
* ``e[m] = sigma(u_{2m+1}, G)``

For an almost cyclic psi-contraction both ``d`` and ``e`` are nonincreasing
and ``d[2m] - e[m]``, ``d[2m+1] - e[m]`` tend to zero; these drive the
stopping rule of :func:`solve_best_approximation`.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import geometry as geo
from .errors import DomainError
from .geometry import MEMBERSHIP_TOL, Point
from .instance import write_atomic
from .maps import ContractionClass, CyclicMap, apply, estimate_min_beta

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000
DIVERGENCE_SLACK = 1e-6


class StopReason(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERATIONS = "MaxIterations"
    DIVERGED = "Diverged"


@dataclass
class IterationTrace:
    iterates: list = field(default_factory=list)
    d: list = field(default_factory=list)
    e: list = field(default_factory=list)
    stop_reason: StopReason = StopReason.MAX_ITERATIONS

    def rows(self):
        """One row per iterate: ``(n, coords, d_n or None, e_{n//2} or None)``."""
        for n, u in enumerate(self.iterates):
            d = self.d[n] if n < len(self.d) else None
            e = self.e[n // 2] if n // 2 < len(self.e) else None
            yield n, u.coords, d, e


@dataclass
class SolveResult:
    u_star: Point
    companion: Point
    residual: float
    gap_to_infimum: float
    iterations: int
    trace: IterationTrace
    tol: float
    mode: str = "best-approximation"

    @property
    def stop_reason(self) -> StopReason:
        return self.trace.stop_reason

    @property
    def converged(self) -> bool:
        return self.trace.stop_reason is StopReason.CONVERGED

    def to_json(self):
        return {
            "mode": self.mode,
            "stop_reason": self.stop_reason.value,
            "u_star": list(self.u_star.coords),
            "companion": list(self.companion.coords),
            "residual": self.residual,
            "gap_to_infimum": self.gap_to_infimum,
            "iterations": self.iterations,
            "tol": self.tol,
        }


def _side(n: int) -> str:
    return "G" if n % 2 == 0 else "H"


def _require_in(T: CyclicMap, u0: Point, sides: str):
    for side in sides:
        if not T.domain(side).contains(u0, MEMBERSHIP_TOL):
            raise DomainError(f"start {u0.coords} does not lie in {side}")


class _Orbit:
    """Incrementally built trace; shared by all solvers."""

    def __init__(self, T: CyclicMap, u0: Point):
        self.T = T
        self.trace = IterationTrace(iterates=[u0])

    def step(self) -> Point:
        tr = self.trace
        n = len(tr.iterates) - 1
        u = tr.iterates[-1]
        nxt = apply(self.T, u, _side(n))
        tr.iterates.append(nxt)
        tr.d.append(geo.distance(u, nxt))
        if (n + 1) % 2 == 1:
            tr.e.append(geo.point_set_distance(nxt, self.T.G).value)
        return nxt


def iterate(T: CyclicMap, u0: Point, max_iter: int) -> IterationTrace:
    """Run exactly ``max_iter`` Picard steps from ``u0`` in G."""
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    _require_in(T, u0, "G")
    orbit = _Orbit(T, u0)
    for _ in range(max_iter):
        orbit.step()
    return orbit.trace


def solve_best_approximation(T: CyclicMap, u0: Point, tol: float = DEFAULT_TOL,
                             max_iter: int = DEFAULT_MAX_ITER) -> SolveResult:
    """Iterate from ``u0`` in G until the even iterates settle on a best approximation.

    Converged once, for some m,
    ``|d[2m] - e[m]| <= tol``, ``|d[2m+1] - e[m]| <= tol`` and
    ``sigma(u_{2m+2}, u_{2m}) <= tol``.  Diverged when an even-indexed ``d``
    grows by more than ``DIVERGENCE_SLACK``.  ``u_star`` is the last even
    iterate in every case.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    _require_in(T, u0, "G")
    orbit = _Orbit(T, u0)
    tr = orbit.trace
    reason = StopReason.MAX_ITERATIONS
    while len(tr.iterates) - 1 < max_iter:
        orbit.step()
        n = len(tr.iterates) - 1
        if n % 2 or n < 2:
            continue
        m = n // 2 - 1
        if n >= 4 and tr.d[n - 2] > tr.d[n - 4] + DIVERGENCE_SLACK:
            reason = StopReason.DIVERGED
            break
        if (abs(tr.d[2 * m] - tr.e[m]) <= tol and abs(tr.d[2 * m + 1] - tr.e[m]) <= tol
                and geo.distance(tr.iterates[n], tr.iterates[n - 2]) <= tol):
            reason = StopReason.CONVERGED
            break
    tr.stop_reason = reason
    last_even = (len(tr.iterates) - 1) // 2 * 2
    return _result(T, tr, last_even, tol)


def _result(T, tr, index, tol, mode="best-approximation"):
    u_star = tr.iterates[index]
    side = _side(index)
    companion = apply(T, u_star, side)
    d_star = geo.distance(u_star, companion)
    if mode == "fixed-point":
        residual = d_star
    else:
        residual = abs(d_star - geo.point_set_distance(companion, T.domain(side)).value)
    gap = d_star - geo.set_distance(T.G, T.H).value
    return SolveResult(u_star, companion, residual, gap, index, tr, tol, mode)


def solve_fixed_point(T: CyclicMap, u0: Point, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER) -> SolveResult:
    """Iterate from ``u0`` in G and H until consecutive iterates are ``tol`` apart.

    Every iterate is tracked (not only the even ones); ``u_star`` is the last
    iterate and the residual is ``sigma(u_star, T u_star)``.  Diverged when
    ``d`` grows by more than ``DIVERGENCE_SLACK``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    _require_in(T, u0, "GH")
    orbit = _Orbit(T, u0)
    tr = orbit.trace
    reason = StopReason.MAX_ITERATIONS
    while len(tr.iterates) - 1 < max_iter:
        orbit.step()
        if len(tr.d) >= 2 and tr.d[-1] > tr.d[-2] + DIVERGENCE_SLACK:
            reason = StopReason.DIVERGED
            break
        if tr.d[-1] <= tol:
            reason = StopReason.CONVERGED
            break
    tr.stop_reason = reason
    return _result(T, tr, len(tr.iterates) - 1, tol, mode="fixed-point")


# ---------------------------------------------------------------------------
# post-solve checks


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    lhs: float
    rhs: float
    applicable: bool
    passed: bool
    note: str = ""

    def to_json(self):
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "applicable": self.applicable,
                "passed": self.passed, "note": self.note}


@dataclass(frozen=True)
class IdentityReport:
    checks: tuple
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.applicable)

    @property
    def failures(self):
        return [c.name for c in self.checks if c.applicable and not c.passed]

    def to_json(self):
        return {"passed": self.passed, "tolerance": self.tolerance,
                "checks": [c.to_json() for c in self.checks]}


def verify_solution_identities(r: SolveResult, T: CyclicMap,
                               cyclic_contraction: Optional[bool] = None,
                               n_samples: int = 2000, seed: int = 0) -> IdentityReport:
    """Check the identities a best approximation must satisfy, each to 10 x tol.

    * ``T2-level``: ``sigma(Tu*, T^2 u*) = sigma(Tu*, G)``
    * ``T2-return``: ``T^2 u* = u*``
    * ``companion``: ``Tu*`` is a best approximation in H
    * ``proximity``: ``sigma(u*, Tu*) = sigma(G, H)``, applicable when T is a
      cyclic contraction.  Pass ``cyclic_contraction`` to skip the sampled
      estimate used to decide this.
    """
    if not r.converged:
        raise ValueError("identities are only defined for converged results")
    tol = 10 * r.tol
    u, tu = r.u_star, r.companion
    side = "G" if r.mode == "best-approximation" else ("G" if r.iterations % 2 == 0 else "H")
    other = "H" if side == "G" else "G"
    ttu = apply(T, tu, other)
    checks = []

    lhs, rhs = geo.distance(tu, ttu), geo.point_set_distance(tu, T.domain(side)).value
    checks.append(IdentityCheck("T2-level", lhs, rhs, True, abs(lhs - rhs) <= tol))

    back = geo.distance(u, ttu)
    checks.append(IdentityCheck("T2-return", back, 0.0, True, back <= tol))

    # companion c = Tu*: sigma(c, Tc) = sigma(Tc, H)
    lhs = geo.distance(tu, ttu)
    rhs = geo.point_set_distance(ttu, T.domain(other)).value
    checks.append(IdentityCheck("companion", lhs, rhs, True, abs(lhs - rhs) <= tol))

    if cyclic_contraction is None:
        cyclic_contraction = estimate_min_beta(T, ContractionClass.CYCLIC_CONTRACTION,
                                               n_samples, seed).contractive
    lhs, rhs = geo.distance(u, tu), geo.set_distance(T.G, T.H).value
    holds = abs(lhs - rhs) <= tol
    note = "" if cyclic_contraction else \
        f"informational: T is not a cyclic contraction on samples (identity {'holds' if holds else 'fails'})"
    checks.append(IdentityCheck("proximity", lhs, rhs, bool(cyclic_contraction), holds, note))
    return IdentityReport(tuple(checks), tol)


@dataclass(frozen=True)
class UniquenessReport:
    results: tuple
    spread: float
    passed: bool
    inconclusive: bool

    def to_json(self):
        return {
            "spread": self.spread,
            "passed": self.passed,
            "inconclusive": self.inconclusive,
            "u_stars": [list(r.u_star.coords) for r in self.results],
            "stop_reasons": [r.stop_reason.value for r in self.results],
        }


def uniqueness_probe(T: CyclicMap, starts: Sequence[Point], tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER) -> UniquenessReport:
    """Solve from several starts and compare the limits pairwise."""
    if len(starts) < 2:
        raise ValueError("need at least two starts")
    results = tuple(solve_best_approximation(T, u0, tol, max_iter) for u0 in starts)
    spread = max(geo.distance(a.u_star, b.u_star) for i, a in enumerate(results) for b in results[i + 1:])
    inconclusive = not all(r.converged for r in results)
    return UniquenessReport(results, spread, (not inconclusive) and spread <= 10 * tol, inconclusive)


def write_trace_csv(trace: IterationTrace, path) -> None:
    """Write ``n,coord_0..coord_k,d_n,e_half_n`` with LF line endings (atomically)."""
    dim = trace.iterates[0].dim
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", *[f"coord_{i}" for i in range(dim)], "d_n", "e_half_n"])
    for n, coords, d, e in trace.rows():
        w.writerow([n, *(repr(c) for c in coords), "" if d is None else repr(d), "" if e is None else repr(e)])
    write_atomic(path, buf.getvalue())
