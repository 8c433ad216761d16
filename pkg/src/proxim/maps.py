"""Cyclic maps, gauge functions and sampled checks of contraction classes.

A cyclic map is given by two branches, one applied on G (with images in H)
and one applied on H (with images in G).  Branches are vectorized: they map
an ``(m, dim)`` array of points to an ``(m, dim)`` array of images.

The class checks are *sampled*: ``HoldsOnSamples`` means no sampled pair
violated the inequality, which is evidence and not a proof.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geometry as geo
from .errors import ConfigError, CyclicityError, DimensionError, DomainError
from .expr import compile_expr
from .geometry import MEMBERSHIP_TOL, GridBox, Point, SetDescriptor
from .sampling import unit_samples, vertex_pairs

VIOLATION_TOL = 1e-9
NOT_CONTRACTIVE_TOL = 1e-9
CAVEAT = ("HoldsOnSamples is evidence from finitely many sampled pairs, "
          "not a proof that the inequality holds everywhere.")


# ---------------------------------------------------------------------------
# gauges


class Gauge:
    """A strictly increasing continuous map psi on [0, inf)."""

    kind = ""

    def __call__(self, s):
        raise NotImplementedError

    def to_json(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class Linear(Gauge):
    """psi(s) = (1 - beta) s."""

    beta: float
    kind = "linear"

    def __post_init__(self):
        if not 0.0 <= float(self.beta) < 1.0:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")
        object.__setattr__(self, "beta", float(self.beta))

    def __call__(self, s):
        return (1.0 - self.beta) * np.asarray(s, dtype=float)

    def to_json(self):
        return {"kind": self.kind, "beta": self.beta}


@dataclass(frozen=True)
class AffineShift(Gauge):
    """psi(s) = s + 1."""

    kind = "affine-shift"

    def __call__(self, s):
        return np.asarray(s, dtype=float) + 1.0


@dataclass(frozen=True)
class Rational(Gauge):
    """psi(s) = s^2 / (1 + s)."""

    kind = "rational"

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return s * s / (1.0 + s)


@dataclass(frozen=True)
class Tabulated(Gauge):
    """Piecewise-linear interpolation of a strictly increasing table.

    The table must start at s = 0; beyond the last knot the final slope is
    continued so the gauge stays strictly increasing on [0, inf).
    """

    s: tuple
    psi: tuple
    kind = "tabulated"

    def __post_init__(self):
        s = tuple(float(v) for v in self.s)
        psi = tuple(float(v) for v in self.psi)
        if len(s) < 2 or len(s) != len(psi):
            raise ValueError("a tabulated gauge needs >= 2 knots with matching values")
        if s[0] != 0.0:
            raise ValueError("the first knot must be s = 0")
        if psi[0] < 0:
            raise ValueError("psi must be nonnegative")
        if any(b <= a for a, b in zip(s, s[1:])) or any(b <= a for a, b in zip(psi, psi[1:])):
            raise ValueError("knots and values must be strictly increasing")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "psi", psi)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        xs, ys = np.array(self.s), np.array(self.psi)
        slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        return np.where(s <= xs[-1], np.interp(s, xs, ys), ys[-1] + slope * (s - xs[-1]))

    def to_json(self):
        return {"kind": self.kind, "s": list(self.s), "psi": list(self.psi)}


def gauge_eval(g: Gauge, s: float):
    """Return ``(psi(s), s - psi(s))``; the second value may be negative."""
    s = float(s)
    if not s >= 0:
        raise DomainError(f"gauge argument must be >= 0, got {s}")
    psi = float(g(s))
    return psi, s - psi


# ---------------------------------------------------------------------------
# branches


class Branch:
    """One half of a cyclic map."""

    def __call__(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(Branch):
    value: tuple

    def __post_init__(self):
        object.__setattr__(self, "value", tuple(float(v) for v in np.ravel(self.value)))

    def __call__(self, X):
        X = np.atleast_2d(X)
        return np.tile(np.array(self.value), (X.shape[0], 1))

    def to_json(self):
        return {"kind": "constant", "value": list(self.value)}


@dataclass(frozen=True)
class Affine(Branch):
    """x -> M x + c."""

    matrix: tuple
    offset: tuple

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        c = np.ravel(np.asarray(self.offset, dtype=float))
        if m.shape != (c.size, c.size):
            raise ValueError(f"matrix shape {m.shape} does not match offset length {c.size}")
        object.__setattr__(self, "matrix", tuple(tuple(r) for r in m.tolist()))
        object.__setattr__(self, "offset", tuple(c.tolist()))

    def __call__(self, X):
        X = np.atleast_2d(X)
        return X @ np.array(self.matrix).T + np.array(self.offset)

    def to_json(self):
        return {"kind": "affine", "matrix": [list(r) for r in self.matrix], "offset": list(self.offset)}


@dataclass(frozen=True)
class Expr(Branch):
    """Componentwise formulas, one expression string per output coordinate."""

    exprs: tuple

    def __post_init__(self):
        exprs = tuple(str(e) for e in self.exprs)
        object.__setattr__(self, "exprs", exprs)
        object.__setattr__(self, "_compiled", tuple(compile_expr(e, len(exprs)) for e in exprs))

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.stack([f(X) for f in self._compiled], axis=1)

    def to_json(self):
        return {"kind": "expr", "exprs": list(self.exprs)}


def _function_space_g(X):
    n = X.shape[1] // 2
    f1, f2 = X[:, :n], X[:, n:]
    shrink = 1.0 / (1.0 + np.max(np.abs(f1), axis=1, keepdims=True))
    return np.hstack([f2, shrink * f1])


def _function_space_h(X):
    n = X.shape[1] // 2
    f1, f2 = X[:, :n], X[:, n:]
    shrink = 1.0 / (1.0 + np.max(np.abs(f2), axis=1, keepdims=True))
    return np.hstack([shrink * f2, f1])


NAMED_MAPS = {
    # complex grid functions h = h1 + i h2 stored as [h1 | h2]
    "function-space": (_function_space_g, _function_space_h),
    "intervals-psi": (lambda X: np.full_like(X, -1.0), lambda X: -X),
}


@dataclass(frozen=True)
class Named(Branch):
    """A built-in map; ``side`` selects the branch used on G or on H."""

    name: str
    side: str = "G"

    def __post_init__(self):
        if self.name not in NAMED_MAPS:
            raise ValueError(f"unknown named map {self.name!r}; known: {sorted(NAMED_MAPS)}")
        if self.side not in ("G", "H"):
            raise ValueError("side must be 'G' or 'H'")

    def __call__(self, X):
        g, h = NAMED_MAPS[self.name]
        return g(np.atleast_2d(np.asarray(X, dtype=float))) if self.side == "G" else \
            h(np.atleast_2d(np.asarray(X, dtype=float)))

    def to_json(self):
        return {"kind": "named", "name": self.name}


@dataclass(frozen=True)
class CyclicMap:
    """A map T on G u H given by its branch on G and its branch on H."""

    forward: Branch
    backward: Branch
    G: SetDescriptor
    H: SetDescriptor
    name: str = ""

    def __post_init__(self):
        if self.G.dim != self.H.dim or self.G.norm != self.H.norm:
            raise DimensionError("G and H must share dimension and norm")

    @property
    def norm(self):
        return self.G.norm

    @property
    def dim(self):
        return self.G.dim

    def branch(self, side: str) -> Branch:
        return self.forward if side == "G" else self.backward

    def target(self, side: str) -> SetDescriptor:
        return self.H if side == "G" else self.G

    def domain(self, side: str) -> SetDescriptor:
        return self.G if side == "G" else self.H


CyclicMapSpec = CyclicMap


def apply(T: CyclicMap, x: Point, side: Optional[str] = None) -> Point:
    """Image of ``x`` under the branch of the set containing it.

    When ``x`` lies in both sets the G branch is used unless ``side`` says
    otherwise.
    """
    T.G.check_point(x)
    if side is None:
        if T.G.contains(x):
            side = "G"
        elif T.H.contains(x):
            side = "H"
        else:
            raise DomainError(f"{x.coords} lies in neither G nor H")
    elif not T.domain(side).contains(x):
        raise DomainError(f"{x.coords} does not lie in {side}")
    image = T.branch(side)(x.array[None, :])[0]
    off = T.target(side).nearest(image[None, :])[0][0]
    if off > MEMBERSHIP_TOL:
        other = "H" if side == "G" else "G"
        raise CyclicityError(f"image {image.tolist()} of {side}-point is {off:.3g} away from {other}")
    return T.G.point(image)


# ---------------------------------------------------------------------------
# contraction classes


class ContractionClass(str, enum.Enum):
    CYCLIC = "cyclic"
    RELATIVELY_NONEXPANSIVE = "relatively-nonexpansive"
    CYCLIC_CONTRACTION = "cyclic-contraction"
    ALMOST_CYCLIC_CONTRACTION = "almost-cyclic"
    CYCLIC_PSI = "cyclic-psi"
    ALMOST_CYCLIC_PSI = "almost-cyclic-psi"

    @property
    def needs_beta(self):
        return self in (ContractionClass.CYCLIC_CONTRACTION, ContractionClass.ALMOST_CYCLIC_CONTRACTION)

    @property
    def needs_gauge(self):
        return self in (ContractionClass.CYCLIC_PSI, ContractionClass.ALMOST_CYCLIC_PSI)


HOLDS = "HoldsOnSamples"
VIOLATED = "ViolatedWithWitness"


@dataclass(frozen=True)
class VerificationReport:
    class_name: ContractionClass
    samples_checked: int
    worst_margin: float
    verdict: str
    witness: Optional[tuple] = None
    beta: Optional[float] = None
    gauge: Optional[dict] = None
    caveat: str = CAVEAT

    def to_json(self):
        return {
            "class": self.class_name.value,
            "beta": self.beta,
            "gauge": self.gauge,
            "samples_checked": self.samples_checked,
            "worst_margin": self.worst_margin,
            "verdict": self.verdict,
            "witness": None if self.witness is None else
            {"u": list(self.witness[0].coords), "v": list(self.witness[1].coords)},
            "caveat": self.caveat,
        }


def _resolve(cls, gauge, beta):
    cls = ContractionClass(cls)
    if cls.needs_gauge and gauge is None:
        raise ConfigError(f"class {cls.value} needs a gauge")
    if cls.needs_beta:
        if beta is None:
            raise ConfigError(f"class {cls.value} needs beta")
        if not 0.0 <= float(beta) < 1.0:
            raise ConfigError(f"beta must lie in [0, 1), got {beta}")
        beta = float(beta)
    return cls, beta


def _sides(T: CyclicMap, cls: ContractionClass, X, Y, gauge, beta, gap):
    """Left- and right-hand sides of the class inequality for pairs (X[i], Y[i])."""
    TX, TY = T.forward(X), T.backward(Y)
    if cls is ContractionClass.CYCLIC:
        lhs = np.maximum(T.H.nearest(TX)[0], T.G.nearest(TY)[0])
        return lhs, np.zeros_like(lhs)
    lhs = T.norm(TX - TY)
    s = T.norm(X - Y)
    if cls is ContractionClass.RELATIVELY_NONEXPANSIVE:
        rhs = s
    elif cls is ContractionClass.CYCLIC_CONTRACTION:
        rhs = beta * s + (1.0 - beta) * gap
    elif cls is ContractionClass.ALMOST_CYCLIC_CONTRACTION:
        rhs = beta * s + (1.0 - beta) * T.G.nearest(Y)[0]
    elif cls is ContractionClass.CYCLIC_PSI:
        rhs = s - gauge(s) + gauge(np.full_like(s, gap))
    else:
        rhs = s - gauge(s) + gauge(T.G.nearest(Y)[0])
    return lhs, rhs


def class_margin(T: CyclicMap, cls, u: Point, v: Point, gauge=None, beta=None) -> float:
    """RHS - LHS of the class inequality for one pair, from point distances only."""
    cls, beta = _resolve(cls, gauge, beta)
    tu, tv = apply_raw(T, u, "G"), apply_raw(T, v, "H")
    if cls is ContractionClass.CYCLIC:
        return -max(geo.point_set_distance(tu, T.H).value, geo.point_set_distance(tv, T.G).value)
    lhs = geo.distance(tu, tv)
    s = geo.distance(u, v)
    if cls is ContractionClass.RELATIVELY_NONEXPANSIVE:
        rhs = s
    elif cls is ContractionClass.CYCLIC_CONTRACTION:
        rhs = beta * s + (1 - beta) * geo.set_distance(T.G, T.H).value
    elif cls is ContractionClass.ALMOST_CYCLIC_CONTRACTION:
        rhs = beta * s + (1 - beta) * geo.point_set_distance(v, T.G).value
    else:
        psi_s, i_minus = gauge_eval(gauge, s)
        anchor = geo.set_distance(T.G, T.H).value if cls is ContractionClass.CYCLIC_PSI \
            else geo.point_set_distance(v, T.G).value
        rhs = i_minus + gauge_eval(gauge, anchor)[0]
    return rhs - lhs


def apply_raw(T: CyclicMap, x: Point, side: str) -> Point:
    """Branch image without membership or cyclicity checks."""
    return T.G.point(T.branch(side)(x.array[None, :])[0])


# ---------------------------------------------------------------------------
# probes


@dataclass(frozen=True)
class HalfImaginaryProbes:
    """Pairs (f, i f / 2) of grid functions with a ramp profile f(s) = A s.

    For a given beta the amplitude is ``fraction * (1 - beta) / (1 + beta)``;
    without beta a geometric ladder of amplitudes ``fraction * 10^-k``,
    ``k = 0..12``, is used.
    """

    fraction: float = 0.9
    family = "half-imaginary"

    def amplitudes(self, beta=None):
        if beta is not None:
            return [self.fraction * (1 - beta) / (1 + beta)]
        return [self.fraction * 10.0 ** -k for k in range(13)]

    def pairs(self, T: CyclicMap, beta=None):
        G = T.G
        if not isinstance(G, GridBox) or G.components != 2:
            raise ConfigError("half-imaginary probes need complex grid functions")
        ramp = G.nodes
        zeros = np.zeros(G.grid)
        out = []
        for amp in self.amplitudes(beta):
            u = np.concatenate([amp * ramp, zeros])
            v = np.concatenate([zeros, 0.5 * amp * ramp])
            out.append((G.point(u), G.point(v)))
        return out

    def to_json(self):
        return {"family": self.family, "fraction": self.fraction}


@dataclass(frozen=True)
class ExplicitProbes:
    """Fixed (u, v) pairs checked regardless of beta."""

    items: tuple = field(default=())
    family = "explicit"

    def pairs(self, T, beta=None):
        return list(self.items)

    def to_json(self):
        return {"family": self.family,
                "pairs": [{"u": list(u.coords), "v": list(v.coords)} for u, v in self.items]}


# ---------------------------------------------------------------------------
# sampling and verification


def sample_pairs(G: SetDescriptor, H: SetDescriptor, n: int, seed: int, sampler: str = "halton"):
    """``n`` pairs from G x H: vertex pairs first, then low-discrepancy samples."""
    pg, ph = vertex_pairs(G.vertex_params(), H.vertex_params(), min(n, 256))
    unit = unit_samples(n - len(pg), G.sample_dim + H.sample_dim, seed, sampler)
    sg = G.sample_dim
    PG = np.vstack([pg, G.sample_params(unit[:, :sg])])
    PH = np.vstack([ph, H.sample_params(unit[:, sg:])])
    return G.from_params(PG), H.from_params(PH)


def _pairs_with_probes(T, n_samples, seed, sampler, probes, beta):
    X, Y = sample_pairs(T.G, T.H, n_samples, seed, sampler)
    if probes is not None:
        extra = probes.pairs(T, beta)
        if extra:
            X = np.vstack([np.array([u.coords for u, _ in extra]), X])
            Y = np.vstack([np.array([v.coords for _, v in extra]), Y])
    return X, Y


def verify_class(T: CyclicMap, cls, gauge: Optional[Gauge] = None, n_samples: int = 10000,
                 seed: int = 42, beta: Optional[float] = None, sampler: str = "halton",
                 probes=None) -> VerificationReport:
    """Check a contraction-class inequality on seeded sample pairs (u, v) in G x H.

    ``worst_margin`` is the minimum of RHS - LHS.  Pairs are evaluated in the
    order probes, vertex pairs, low-discrepancy samples, and the witness is
    the first pair whose margin is below ``-VIOLATION_TOL``.
    """
    cls, beta = _resolve(cls, gauge, beta)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    X, Y = _pairs_with_probes(T, n_samples, seed, sampler, probes, beta)
    gap = geo.set_distance(T.G, T.H).value if cls in (
        ContractionClass.CYCLIC_CONTRACTION, ContractionClass.CYCLIC_PSI) else 0.0
    lhs, rhs = _sides(T, cls, X, Y, gauge, beta, gap)
    margin = rhs - lhs
    worst = float(np.min(margin))
    violated = worst < -VIOLATION_TOL
    witness = None
    if violated:
        # pairs are ordered probes, vertex pairs, samples; report the first breach
        i = int(np.flatnonzero(margin < -VIOLATION_TOL)[0])
        witness = (T.G.point(X[i]), T.H.point(Y[i]))
    return VerificationReport(
        class_name=cls,
        samples_checked=int(X.shape[0]),
        worst_margin=worst,
        verdict=VIOLATED if violated else HOLDS,
        witness=witness,
        beta=beta,
        gauge=None if gauge is None else gauge.to_json(),
    )


@dataclass(frozen=True)
class BetaEstimate:
    """Smallest beta consistent with all sampled pairs.

    ``contractive`` is False when some pair forces beta within
    ``NOT_CONTRACTIVE_TOL`` of 1 (or above); ``witness`` is the binding pair.
    """

    beta: float
    contractive: bool
    samples_checked: int
    witness: Optional[tuple] = None

    def to_json(self):
        return {
            "beta": self.beta if math.isfinite(self.beta) else "inf",
            "contractive": self.contractive,
            "samples_checked": self.samples_checked,
            "witness": None if self.witness is None else
            {"u": list(self.witness[0].coords), "v": list(self.witness[1].coords)},
        }


NotContractive = False  # sentinel value of BetaEstimate.contractive


def estimate_min_beta(T: CyclicMap, cls, n_samples: int = 10000, seed: int = 42,
                      sampler: str = "halton", probes=None) -> BetaEstimate:
    """Tightest beta of the (almost) cyclic contraction inequality on samples.

    Each pair with ``sigma(u, v) > anchor`` requires
    ``beta >= (LHS - anchor) / (sigma(u, v) - anchor)``; pairs whose
    denominator vanishes only constrain through ``LHS <= anchor``.
    """
    cls = ContractionClass(cls)
    if not cls.needs_beta:
        raise ConfigError("estimate_min_beta applies to cyclic-contraction and almost-cyclic")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    X, Y = _pairs_with_probes(T, n_samples, seed, sampler, probes, None)
    lhs = T.norm(T.forward(X) - T.backward(Y))
    s = T.norm(X - Y)
    if cls is ContractionClass.CYCLIC_CONTRACTION:
        anchor = np.full_like(s, geo.set_distance(T.G, T.H).value)
    else:
        anchor = T.G.nearest(Y)[0]
    den = s - anchor
    # relative cut: small-scale pairs (probes near 0) still carry information
    live = (s > 0) & (den > VIOLATION_TOL * s)
    required = np.zeros_like(s)
    required[live] = (lhs[live] - anchor[live]) / den[live]
    # pairs on the anchor level admit no beta when LHS exceeds the anchor
    stuck = (s > 0) & ~live & (lhs > anchor + VIOLATION_TOL)
    required[stuck] = np.inf
    i = int(np.argmax(required))
    beta = max(0.0, float(required[i]))
    contractive = beta < 1.0 - NOT_CONTRACTIVE_TOL
    witness = (T.G.point(X[i]), T.H.point(Y[i])) if required[i] > 0 else None
    return BetaEstimate(beta, contractive, int(X.shape[0]), witness)
