import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from proxim import geometry as geo
from proxim.errors import DimensionError
from proxim.geometry import (EUCLIDEAN, SUP, Box, FiniteCloud, GridBox, Interval, NormTag, Point, Segment,
                             distance, golden_section, point_set_distance, project_candidates, set_distance)

NORMS = [NormTag(1), EUCLIDEAN, NormTag(3), SUP]


def P(*c, norm=EUCLIDEAN):
    return Point(c, norm)


def test_norm_tag_parse():
    assert NormTag.parse("inf").is_sup
    assert NormTag.parse(2) == EUCLIDEAN
    assert SUP.to_json() == "inf"
    with pytest.raises(ValueError):
        NormTag(0.5)


def test_distance_examples():
    assert distance(P(0, 0.5, norm=SUP), P(1, 0, norm=SUP)) == 1.0
    assert distance(P(1), P(-2)) == 3.0
    x = P(0.3, -7.1)
    assert distance(x, x) == 0.0


def test_distance_mismatch():
    with pytest.raises(DimensionError):
        distance(P(1), P(1, 2))
    with pytest.raises(DimensionError):
        distance(P(1, norm=SUP), P(1))


def test_point_rejects_nonfinite():
    with pytest.raises(ValueError):
        Point((float("nan"),))
    with pytest.raises(ValueError):
        Point(())


@pytest.mark.parametrize("norm", NORMS)
def test_triangle_inequality_sampled(norm):
    rng = np.random.default_rng(7)
    X, Y, Z = (rng.normal(size=(10_000, 3)) * 10 for _ in range(3))
    assert np.all(norm(X - Z) <= norm(X - Y) + norm(Y - Z) + 1e-12)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=6, max_size=6), st.sampled_from(NORMS))
def test_distance_symmetric(c, norm):
    x, y = Point(tuple(c[:3]), norm), Point(tuple(c[3:]), norm)
    assert distance(x, y) == distance(y, x)
    assert (distance(x, y) == 0) == (x.coords == y.coords)


def test_golden_section_convex():
    centers = np.array([0.0, 0.2, 0.77, 1.0, 3.0])
    t = golden_section(lambda s: np.abs(s - centers), np.zeros(5), np.ones(5))
    assert np.allclose(t, np.clip(centers, 0, 1), atol=1e-9)


def test_point_interval_examples():
    G = Interval(1, 2)
    r = point_set_distance(P(-2), G)
    assert r.value == 3.0 and r.witness.coords == (1.0,) and r.exact
    r = point_set_distance(P(1.5), G)
    assert r.value == 0.0 and r.witness.coords == (1.5,)


def test_point_segment_sup():
    S = Segment(P(0, 0, norm=SUP), P(0, 1, norm=SUP))
    r = point_set_distance(P(1, 0, norm=SUP), S)
    assert not r.exact
    assert r.value == pytest.approx(1.0, abs=1e-10)
    t = np.random.default_rng(0).uniform(size=1_000_000)
    brute = np.min(np.maximum(1.0, np.abs(t)))
    assert abs(r.value - brute) <= 1e-6


def _brute(x, S, n):
    P_ = S.from_params(np.random.default_rng(1).uniform(size=(n, S.param_dim)))
    P_ = np.vstack([P_, S.from_params(S.vertex_params())])
    return float(np.min(S.norm(P_ - x.array)))


@pytest.mark.parametrize("norm", NORMS)
def test_oracle_equivalence(norm):
    rng = np.random.default_rng(3)
    sets = [
        Box((0, 0, 0), (1, 2, 0.5), norm),
        Segment(Point((0, 0, 0), norm), Point((1, 2, -1), norm)),
        FiniteCloud(tuple(Point(tuple(r), norm) for r in rng.normal(size=(20, 3)))),
    ]
    for S in sets:
        for x in rng.normal(size=(5, 3)) * 3:
            x = Point(tuple(x), norm)
            exact = point_set_distance(x, S)
            assert abs(float(norm(exact.witness.array - x.array)) - exact.value) <= 1e-12
            # sampled minimum can only be larger; the gap shrinks with spacing
            brute = _brute(x, S, 100_000)
            spacing = 100_000 ** (-1 / max(S.param_dim, 1))
            assert exact.value <= brute + 1e-12
            assert brute - exact.value <= 2 * spacing * S.dim * 4


def test_set_distance_examples():
    assert set_distance(Interval(1, 2), Interval(-2, -1)).value == 2.0
    B = Box((0, 0), (1, 1))
    assert set_distance(B, B).value == 0.0
    G = Segment(P(0, 0, norm=SUP), P(0, 1, norm=SUP))
    H = Segment(P(0, 0, norm=SUP), P(1, 0, norm=SUP))
    r = set_distance(G, H)
    s = np.linspace(0, 1, 1001)
    brute = np.min(np.maximum(s[:, None], s[None, :]))
    assert r.value == pytest.approx(brute, abs=1e-10)


def test_set_distance_symmetric():
    rng = np.random.default_rng(11)
    for norm in NORMS:
        for _ in range(5):
            a, b, c, d = (Point(tuple(r), norm) for r in rng.normal(size=(4, 2)) * 3)
            A, B = Segment(a, b), Segment(c, d)
            assert abs(set_distance(A, B).value - set_distance(B, A).value) <= 1e-10
            box = Box((0, 0), (1, 1), norm)
            assert abs(set_distance(A, box).value - set_distance(box, A).value) <= 1e-10


def test_set_distance_segments_brute():
    rng = np.random.default_rng(5)
    for norm in NORMS:
        a, b, c, d = (Point(tuple(r), norm) for r in rng.normal(size=(4, 2)) * 2)
        A, B = Segment(a, b), Segment(c, d)
        s = np.linspace(0, 1, 1001)
        pa, pb = A.from_params(s[:, None]), B.from_params(s[:, None])
        brute = np.min(norm(pa[:, None, :] - pb[None, :, :]))
        got = set_distance(A, B)
        assert got.value <= brute + 1e-12
        assert brute - got.value <= 1e-2
        assert abs(distance(got.witness, got.partner) - got.value) <= 1e-12


def test_zero_distance_iff_member():
    rng = np.random.default_rng(2)
    S = Segment(P(0, 0), P(2, 1))
    for t in rng.uniform(size=20):
        assert point_set_distance(S.point(S.from_params(np.array([[t]]))[0]), S).value <= 1e-10
    assert point_set_distance(P(0, 1), S).value > 1e-3
    B = Box((0, 0), (1, 1))
    assert point_set_distance(P(1, 0.3), B).value == 0.0
    assert B.contains(P(0.5, 0.5)) and not B.contains(P(1.1, 0.5))


def test_project_candidates_examples():
    S = Segment(P(0, 0, norm=SUP), P(0, 1, norm=SUP))
    cands = project_candidates(P(1, 0, norm=SUP), S, 5)
    assert len(cands) == 5
    assert all(abs(distance(c, P(1, 0, norm=SUP)) - 1.0) <= 1e-8 for c in cands)
    assert all(abs(c.coords[0]) <= 1e-12 for c in cands)
    B = Box((0, 0), (1, 1))
    assert [c.coords for c in project_candidates(P(0.4, 0.6), B, 3)] == [(0.4, 0.6)]
    assert [c.coords for c in project_candidates(P(-2), Interval(1, 2), 3)] == [(1.0,)]


def test_project_candidates_dedup_resolution():
    cands = project_candidates(P(1, 0, norm=SUP), Segment(P(0, 0, norm=SUP), P(0, 1, norm=SUP)), 100)
    arr = np.array([c.coords for c in cands])
    gaps = np.max(np.abs(arr[:, None] - arr[None, :]), axis=-1) + np.eye(len(arr))
    assert gaps.min() > geo.DEDUP_RESOLUTION


def test_gridbox_layout():
    G = GridBox.uniform(8, [(0, 1), (0, 0)])
    assert G.dim == 16 and G.components == 2 and G.norm == SUP
    assert G.param_dim == 8
    assert G.uniform_bounds() == [(0.0, 1.0), (0.0, 0.0)]
    X = G.from_params(G.sample_params(np.random.default_rng(0).uniform(size=(50, G.sample_dim))))
    assert np.all(X[:, 8:] == 0) and np.all((X[:, :8] >= 0) & (X[:, :8] <= 1))


def test_invalid_descriptors():
    with pytest.raises(ValueError):
        Interval(2, 1)
    with pytest.raises(DimensionError):
        set_distance(Interval(0, 1), Box((0, 0), (1, 1)))
    with pytest.raises(ValueError):
        FiniteCloud(())
