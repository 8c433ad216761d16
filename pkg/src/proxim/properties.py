"""Randomized falsifiers for property UC, property strongly UC and
semi-sharp proximality of a pair of sets.

Both UC-type properties forbid triples ``(u, z, v)`` in ``G x G x H`` whose
approach defect tends to zero while ``sigma(u, z)`` stays bounded below.  The
falsifiers therefore look for a single triple with

    defect <= delta   and   separation >= epsilon,

where the defect measures how far ``u`` and ``z`` are from being nearest to
``v``: against ``sigma(v, G)`` for strongly UC and against ``sigma(G, H)`` for
UC.  A ``NoViolationFound`` verdict is one-sided evidence only.

Search outline, all in the descriptors' parameter spaces:

1. seeded multistart (replayed witnesses, vertex triples, low-discrepancy
   triples);
2. pull each start toward a zero-defect anchor triple by bisection, keeping
   the farthest feasible point on that ray;
3. per-coordinate hill climbing with step halving on the best starts,
   maximizing separation (then minimizing defect) under ``defect <= delta``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import CANDIDATE_TOL, Point, SetDescriptor, distance, point_set_distance, project_candidates, set_distance
from .sampling import unit_samples

UC = "UC"
STRONGLY_UC = "StronglyUC"
VIOLATION_CANDIDATE = "ViolationCandidate"
NO_VIOLATION = "NoViolationFound"
SEMI_SHARP = "SemiSharpOnSamples"
COUNTEREXAMPLE = "CounterexampleFound"

DEFAULT_DELTA = 1e-3
DEFAULT_EPSILON = 1e-2
PROXIMAL_TOL = 1e-6

_BISECTION_STEPS = 40
_REFINE_STARTS = 16
_ROUNDS = 100
_VERTEX_TRIPLES = 512


@dataclass(frozen=True)
class PropertyWitness:
    u: Point
    z: Point
    v: Point
    defect: float
    separation: float
    property: str

    def to_json(self):
        return {
            "u": list(self.u.coords),
            "z": list(self.z.coords),
            "v": list(self.v.coords),
            "defect": self.defect,
            "separation": self.separation,
            "property": self.property,
        }


@dataclass(frozen=True)
class PropertyReport:
    property: str
    verdict: str
    best_witness: Optional[PropertyWitness]
    search_budget: int
    delta: float
    epsilon: float
    seed: int

    @property
    def thresholds(self):
        return self.delta, self.epsilon

    def to_json(self):
        return {
            "property": self.property,
            "verdict": self.verdict,
            "best_witness": None if self.best_witness is None else self.best_witness.to_json(),
            "search_budget": self.search_budget,
            "thresholds": {"delta": self.delta, "epsilon": self.epsilon},
            "seed": self.seed,
        }


def witness_defect(G: SetDescriptor, H: SetDescriptor, u: Point, z: Point, v: Point, prop: str):
    """Recompute ``(defect, separation)`` of a triple from its coordinates."""
    anchor = point_set_distance(v, G).value if prop == STRONGLY_UC else set_distance(G, H).value
    defect = max(distance(u, v) - anchor, distance(z, v) - anchor, 0.0)
    return defect, distance(u, z)


class _Triples:
    """Vectorized defect/separation of parameterized triples."""

    def __init__(self, G, H, prop):
        self.G, self.H, self.prop = G, H, prop
        self.kG, self.kH = G.param_dim, H.param_dim
        self.gap = set_distance(G, H).value if prop == UC else None

    def split(self, theta):
        kG = self.kG
        return theta[:, :kG], theta[:, kG:2 * kG], theta[:, 2 * kG:]

    def anchors(self, V):
        if self.prop == STRONGLY_UC:
            return self.G.nearest(V)[0]
        return np.full(V.shape[0], self.gap)

    def evaluate(self, theta, anchor=None):
        pu, pz, pv = self.split(theta)
        U, Z, V = self.G.from_params(pu), self.G.from_params(pz), self.H.from_params(pv)
        if anchor is None:
            anchor = self.anchors(V)
        norm = self.G.norm
        defect = np.maximum(np.maximum(norm(U - V), norm(Z - V)) - anchor, 0.0)
        return defect, norm(U - Z)


def _order(sep, defect):
    """Indices sorted by separation (desc), then defect (asc), then index."""
    return np.lexsort((np.arange(sep.size), defect, -sep))


def _starts(G, H, budget, seed, replay):
    kG, kH = G.param_dim, H.param_dim
    rows = []
    for w in replay:
        rows.append(np.concatenate([G.nearest(w.u.array[None])[2][0], G.nearest(w.z.array[None])[2][0],
                                    H.nearest(w.v.array[None])[2][0]]))
    VG, VH = G.vertex_params(), H.vertex_params()
    iu, iz, iv = np.meshgrid(np.arange(len(VG)), np.arange(len(VG)), np.arange(len(VH)), indexing="ij")
    n_vert = min(iu.size, _VERTEX_TRIPLES, budget)
    iu, iz, iv = iu.ravel()[:n_vert], iz.ravel()[:n_vert], iv.ravel()[:n_vert]
    vert = np.hstack([VG[iu], VG[iz], VH[iv]])
    sG, sH = G.sample_dim, H.sample_dim
    unit = unit_samples(budget - n_vert, 2 * sG + sH, seed)
    lds = np.hstack([G.sample_params(unit[:, :sG]), G.sample_params(unit[:, sG:2 * sG]),
                     H.sample_params(unit[:, 2 * sG:])])
    parts = [np.array(rows) if rows else np.zeros((0, 2 * kG + kH)), vert, lds]
    return np.vstack(parts)


def _pull(problem: _Triples, theta, delta):
    """Move each start toward a zero-defect triple; keep the farthest feasible point."""
    G, H = problem.G, problem.H
    pu, pz, pv = problem.split(theta)
    if problem.prop == STRONGLY_UC:
        V = H.from_params(pv)
        w = G.nearest(V)[2]
        base = np.hstack([w, w, pv])
        anchor = G.nearest(V)[0]
    else:
        best = set_distance(G, H)
        a = G.nearest(best.witness.array[None])[2][0]
        b = H.nearest(best.partner.array[None])[2][0]
        base = np.tile(np.concatenate([a, a, b]), (theta.shape[0], 1))
        anchor = None
    direction = theta - base
    defect, _ = problem.evaluate(theta, anchor)
    lo = np.where(defect <= delta, 1.0, 0.0)
    hi = np.ones(theta.shape[0])
    todo = lo < 1.0
    for _ in range(_BISECTION_STEPS):
        if not todo.any():
            break
        mid = 0.5 * (lo + hi)
        d, _ = problem.evaluate(base + mid[:, None] * direction, anchor)
        ok = d <= delta
        lo = np.where(todo & ok, mid, lo)
        hi = np.where(todo & ~ok, mid, hi)
    return base + lo[:, None] * direction


def _climb(problem: _Triples, theta, delta):
    """Per-coordinate hill climbing with step halving, all starts at once."""
    n, K = theta.shape
    if K == 0:
        return theta
    defect, sep = problem.evaluate(theta)
    step = np.full(n, 0.25)
    eye = np.eye(K)
    moves = np.vstack([eye, -eye])  # (2K, K)
    for _ in range(_ROUNDS):
        live = step > 1e-12
        if not live.any():
            break
        cand = np.clip(theta[:, None, :] + step[:, None, None] * moves[None], 0.0, 1.0)
        d, s = problem.evaluate(cand.reshape(-1, K))
        d, s = d.reshape(n, 2 * K), s.reshape(n, 2 * K)
        ok = (d <= delta) & ((s > sep[:, None]) | ((s == sep[:, None]) & (d < defect[:, None])))
        s_ok = np.where(ok, s, -np.inf)
        top = s_ok.max(axis=1)
        pick = np.argmin(np.where(ok & (s_ok == top[:, None]), d, np.inf), axis=1)
        better = ok.any(axis=1) & live
        rows = np.flatnonzero(better)
        theta[rows] = cand[rows, pick[rows]]
        sep[rows] = s[rows, pick[rows]]
        defect[rows] = d[rows, pick[rows]]
        step = np.where(better | ~live, step, 0.5 * step)
    return theta


def _falsify(G, H, prop, delta, epsilon, budget, seed, replay):
    if delta <= 0 or epsilon <= 0:
        raise ValueError("delta and epsilon must be positive")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    problem = _Triples(G, H, prop)
    theta = _pull(problem, _starts(G, H, budget, seed, replay), delta)
    defect, sep = problem.evaluate(theta)
    top = _order(sep, defect)[:_REFINE_STARTS]
    refined = _climb(problem, theta[top].copy(), delta)
    theta = np.vstack([theta, refined])
    defect, sep = problem.evaluate(theta)
    feasible = defect <= delta
    order = [i for i in _order(np.where(feasible, sep, -np.inf), defect) if feasible[i]]
    witness = None
    if order and sep[order[0]] > 0:
        i = order[0]
        pu, pz, pv = problem.split(theta[i:i + 1])
        witness = PropertyWitness(
            u=G.point(G.from_params(pu)[0]),
            z=G.point(G.from_params(pz)[0]),
            v=H.point(H.from_params(pv)[0]),
            defect=float(defect[i]),
            separation=float(sep[i]),
            property=prop,
        )
    found = witness is not None and witness.defect <= delta and witness.separation >= epsilon
    return PropertyReport(prop, VIOLATION_CANDIDATE if found else NO_VIOLATION, witness,
                          int(budget), float(delta), float(epsilon), int(seed))


def falsify_strongly_uc(G: SetDescriptor, H: SetDescriptor, delta: float = DEFAULT_DELTA,
                        epsilon: float = DEFAULT_EPSILON, budget: int = 10000, seed: int = 42,
                        replay: Sequence[PropertyWitness] = ()) -> PropertyReport:
    """Search for ``u, z in G``, ``v in H`` with both ``sigma(., v) - sigma(v, G) <= delta``
    and ``sigma(u, z) >= epsilon``.

    ``replay`` witnesses from earlier runs are evaluated first, so a rerun
    with a larger ``delta`` cannot lose them.
    """
    return _falsify(G, H, STRONGLY_UC, delta, epsilon, budget, seed, replay)


def falsify_uc(G: SetDescriptor, H: SetDescriptor, delta: float = DEFAULT_DELTA,
               epsilon: float = DEFAULT_EPSILON, budget: int = 10000, seed: int = 42,
               replay: Sequence[PropertyWitness] = ()) -> PropertyReport:
    """Same search as :func:`falsify_strongly_uc` with the defect measured
    against ``sigma(G, H)``."""
    return _falsify(G, H, UC, delta, epsilon, budget, seed, replay)


# ---------------------------------------------------------------------------
# semi-sharp proximality


@dataclass(frozen=True)
class SemiSharpReport:
    verdict: str
    level: float
    resolution: float
    samples_checked: int
    point: Optional[Point] = None
    partners: tuple = ()

    def to_json(self):
        return {
            "verdict": self.verdict,
            "level": self.level,
            "resolution": self.resolution,
            "samples_checked": self.samples_checked,
            "witness": None if self.point is None else {
                "point": list(self.point.coords),
                "partners": [list(p.coords) for p in self.partners],
            },
        }


def _sample_points(A: SetDescriptor, n: int, seed: int):
    params = np.vstack([A.vertex_params(), A.sample_params(unit_samples(n, A.sample_dim, seed))])
    return A.from_params(params)


def check_semi_sharp_proximal(G: SetDescriptor, H: SetDescriptor, resolution: float = 1e-3,
                              n_samples: int = 256, seed: int = 42, k: int = 8) -> SemiSharpReport:
    """Look for a point with two partners at distance ``sigma(G, H)`` in the other set.

    Sampled points of G are checked against H, then sampled points of H
    against G.  Partners closer than ``resolution`` count as one.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    level = set_distance(G, H).value
    checked = 0
    for A, B in ((G, H), (H, G)):
        X = _sample_points(A, n_samples, seed)
        checked += X.shape[0]
        near = B.nearest(X)[0] <= level + CANDIDATE_TOL
        for row in X[near]:
            x = A.point(row)
            partners = project_candidates(x, B, k, level=level)
            if len(partners) < 2:
                continue
            arr = np.array([p.coords for p in partners])
            spread = B.norm(arr[:, None, :] - arr[None, :, :]).max()
            if spread > resolution:
                return SemiSharpReport(COUNTEREXAMPLE, level, resolution, checked, x, tuple(partners))
    return SemiSharpReport(SEMI_SHARP, level, resolution, checked)


# ---------------------------------------------------------------------------
# UC + proximal => strongly UC


@dataclass(frozen=True)
class ProximalProbeReport:
    premise_holds: bool
    applicable: bool
    contradiction: bool
    premise_witness: Optional[Point] = None
    uc: Optional[PropertyReport] = None
    strongly_uc: Optional[PropertyReport] = None

    def to_json(self):
        return {
            "premise_holds": self.premise_holds,
            "applicable": self.applicable,
            "contradiction": self.contradiction,
            "premise_witness": None if self.premise_witness is None else list(self.premise_witness.coords),
            "uc": None if self.uc is None else self.uc.to_json(),
            "strongly_uc": None if self.strongly_uc is None else self.strongly_uc.to_json(),
        }


def proximal_on_samples(G: SetDescriptor, H: SetDescriptor, n_samples: int = 256, seed: int = 42):
    """Return ``None`` if every sampled point attains ``sigma(G, H)`` against the
    other set (within ``PROXIMAL_TOL``), else the first point that does not."""
    level = set_distance(G, H).value
    for A, B in ((G, H), (H, G)):
        X = _sample_points(A, n_samples, seed)
        bad = np.flatnonzero(B.nearest(X)[0] > level + PROXIMAL_TOL)
        if bad.size:
            return A.point(X[bad[0]])
    return None


def uc_implies_suc_probe(G: SetDescriptor, H: SetDescriptor, budget: int = 10000, seed: int = 42,
                         delta: float = DEFAULT_DELTA, epsilon: float = DEFAULT_EPSILON,
                         n_samples: int = 256) -> ProximalProbeReport:
    """On proximal pairs, silence of the UC falsifier must imply silence of the
    strongly-UC falsifier; ``contradiction`` flags a breach."""
    bad = proximal_on_samples(G, H, n_samples, seed)
    if bad is not None:
        return ProximalProbeReport(False, False, False, premise_witness=bad)
    uc = falsify_uc(G, H, delta, epsilon, budget, seed)
    if uc.verdict != NO_VIOLATION:
        return ProximalProbeReport(True, False, False, uc=uc)
    suc = falsify_strongly_uc(G, H, delta, epsilon, budget, seed)
    return ProximalProbeReport(True, True, suc.verdict == VIOLATION_CANDIDATE, uc=uc, strongly_uc=suc)
