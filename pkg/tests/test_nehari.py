import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from graphkirchhoff import fixtures as fx
from graphkirchhoff.energy import Problem, gateaux
from graphkirchhoff.graph_core import ValidationError, neg_part, pos_part
from graphkirchhoff.nehari import (DegenerateError, G_map, H_map, PairProfile, ProjectionError, RayProfile,
                                   box_edge_signs, f_ray, find_root, pair_maximality_gap, pair_project,
                                   ray_maximality_gap, scalar_project)
from graphkirchhoff.verify import uniqueness_spread

from conftest import P3_T0, make_random

seeds = st.integers(0, 2**32 - 1)


def bisection_oracle(func, lo, hi, iters=200):
    """Plain bisection for a decreasing sign change, independent of the package."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if func(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.fixture
def p5_problem(p5):
    return Problem(p5, fx.BASIC_PARAMS)


@pytest.fixture
def decoupled(p5):
    return p5.function({"v1": 1.0, "v2": 0.0, "v3": -1.0})


class TestRay:
    def test_closed_form(self, p3_problem, p3):
        u = p3.indicator("v1")
        assert f_ray(p3_problem, u, 1.0) == 2.0
        assert f_ray(p3_problem, u, 0.1) == pytest.approx(0.02 - 1e-5 * math.log(0.1), rel=1e-13)
        assert f_ray(p3_problem, u, 3.0) == pytest.approx(18 - 243 * math.log(3), rel=1e-13)
        assert f_ray(p3_problem, u, 3.0) < 0

    def test_errors(self, p3_problem, p3):
        with pytest.raises(ValidationError):
            f_ray(p3_problem, p3.zeros(), 1.0)
        with pytest.raises(ValidationError):
            scalar_project(p3_problem, p3.zeros())
        with pytest.raises(ValueError):
            f_ray(p3_problem, p3.indicator("v1"), 0.0)

    @pytest.mark.parametrize("method", ["brent", "bisect"])
    def test_p3_root(self, p3_problem, p3, method):
        oracle = bisection_oracle(lambda t: 2 - t**3 * math.log(t), 1.0, 2.0)
        proj = scalar_project(p3_problem, p3.indicator("v1"), method=method)
        assert proj.t0 == pytest.approx(oracle, abs=1e-9)
        assert proj.t0 == pytest.approx(P3_T0, abs=1e-9)
        assert proj.bracket[0] < proj.t0 < proj.bracket[1]

    def test_already_on_nehari(self, p3_problem, p3):
        proj = scalar_project(p3_problem, P3_T0 * p3.indicator("v1"))
        assert proj.t0 == pytest.approx(1.0, abs=1e-10)

    def test_find_root_needs_sign_change(self):
        with pytest.raises(ProjectionError):
            find_root(lambda t: 1.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            find_root(lambda t: 1 - t, 0.0, 2.0, method="newton")


class TestPair:
    def test_one_signed_refused(self, p5_problem, p5):
        u = p5.function({"v1": 1.0, "v2": 2.0})
        with pytest.raises(DegenerateError):
            pair_project(p5_problem, u)
        with pytest.raises(DegenerateError):
            G_map(p5_problem, u, 1.0, 1.0)

    def test_decoupled_g_ignores_t(self, p5_problem, decoupled):
        g = [G_map(p5_problem, decoupled, 1.3, t) for t in (0.1, 1.0, 7.0)]
        assert g[0] == g[1] == g[2]

    def test_decoupled_projection(self, p5_problem, p5, decoupled):
        proj = pair_project(p5_problem, decoupled)
        sp = scalar_project(p5_problem, pos_part(decoupled)).t0
        sm = scalar_project(p5_problem, neg_part(decoupled)).t0
        assert proj.s0 == pytest.approx(sp, abs=1e-9)
        assert proj.t0 == pytest.approx(sm, abs=1e-9)
        assert proj.s0 == pytest.approx(P3_T0, abs=1e-9)
        assert proj.box[0] < min(proj.s0, proj.t0) and max(proj.s0, proj.t0) < proj.box[1]

    def test_projection_of_member_is_identity(self, p5_problem, decoupled):
        member = P3_T0 * decoupled
        assert G_map(p5_problem, member, 1.0, 1.0) == pytest.approx(0.0, abs=1e-12)
        assert H_map(p5_problem, member, 1.0, 1.0) == pytest.approx(0.0, abs=1e-12)
        proj = pair_project(p5_problem, member)
        assert proj.s0 == pytest.approx(1.0, abs=1e-10) and proj.t0 == pytest.approx(1.0, abs=1e-10)

    def test_sign_symmetry(self, p4):
        problem = Problem(p4, fx.DOUBLING_PARAMS)
        u = p4.function({"v1": 0.7, "v2": -1.9})
        a, b = pair_project(problem, u), pair_project(problem, -u)
        assert a.s0 == pytest.approx(b.t0, rel=1e-12) and a.t0 == pytest.approx(b.s0, rel=1e-12)


@given(seeds)
def test_scalar_projection_properties(seed):
    problem, u = make_random(seed)
    proj = scalar_project(problem, u)
    w = proj.t0 * u
    assert abs(gateaux(problem, w, w)) <= 1e-10 * RayProfile(problem, w).scale(1.0)
    gap, scale = ray_maximality_gap(problem, u, proj.t0)
    assert gap <= 1e-10 * scale
    kappa = 3.7
    assert scalar_project(problem, kappa * u).t0 == pytest.approx(proj.t0 / kappa, rel=1e-10)
    assert scalar_project(problem, w).t0 == pytest.approx(1.0, abs=1e-10)


def _sign_changing(seed):
    problem, u = make_random(seed)
    if not (np.any(u > 0) and np.any(u < 0)):
        u = u.copy()
        idx = problem.gd.interior_idx
        if idx.size < 2:
            return None
        u[idx[0]], u[idx[-1]] = 1.0, -1.0
    return problem, u


@given(seeds)
def test_pair_projection_properties(seed):
    case = _sign_changing(seed)
    if case is None:
        return
    problem, u = case
    proj = pair_project(problem, u)
    assert box_edge_signs(problem, u, *proj.box)
    w = proj.s0 * pos_part(u) + proj.t0 * neg_part(u)
    scale = PairProfile(problem, w).scale(1.0, 1.0)
    assert abs(gateaux(problem, w, pos_part(w))) <= 1e-10 * scale
    assert abs(gateaux(problem, w, neg_part(w))) <= 1e-10 * scale
    gap, escale = pair_maximality_gap(problem, u, proj.s0, proj.t0, proj.box)
    assert gap <= 1e-10 * escale
    again = pair_project(problem, w)
    assert again.s0 == pytest.approx(1.0, abs=1e-9) and again.t0 == pytest.approx(1.0, abs=1e-9)


@given(seeds, st.floats(0.05, 5), st.floats(0.05, 5))
def test_closed_forms_match_gateaux(seed, s, t):
    case = _sign_changing(seed)
    if case is None:
        return
    problem, u = case
    prof = PairProfile(problem, u)
    w = s * pos_part(u) + t * neg_part(u)
    scale = prof.scale(s, t)
    assert abs(prof.G(s, t) - gateaux(problem, w, s * pos_part(u))) <= 1e-10 * scale
    assert abs(prof.H(s, t) - gateaux(problem, w, t * neg_part(u))) <= 1e-10 * scale
    assert abs(prof.G(s, s) + prof.H(s, s) - f_ray(problem, u, s)) <= 1e-10 * prof.scale(s, s)


@given(seeds)
def test_uniqueness_probe(seed):
    case = _sign_changing(seed)
    if case is None:
        return
    assert uniqueness_spread(*case) <= 1e-9
