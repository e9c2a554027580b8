import json
import math

import numpy as np
import pytest

from graphkirchhoff import fixtures as fx
from graphkirchhoff.energy import ModelParams, Problem, I, max_residual
from graphkirchhoff.graph_core import ValidationError
from graphkirchhoff.solver import (GROUND, NODAL, ConvergenceError, SolveConfig, SolveReport, check_doubling,
                                   descend, membership_residuals, minimize_ground, minimize_nodal, solve)

from conftest import P3_T0

P3_LEVEL = P3_T0**2 + P3_T0**5 / 25 - P3_T0**5 * math.log(P3_T0) / 5
FAST = SolveConfig(seeds=4)


class TestConfig:
    @pytest.mark.parametrize("field,value", [("seeds", 0), ("step_init", 0.0), ("armijo_c", 1.0),
                                             ("shrink", 0.0), ("grad_tol", -1.0), ("proj_tol", 0.0),
                                             ("max_iters", 0)])
    def test_rejects(self, field, value):
        with pytest.raises(ValidationError):
            SolveConfig(**{field: value})

    def test_defaults(self):
        cfg = SolveConfig()
        assert (cfg.seeds, cfg.step_init, cfg.armijo_c, cfg.shrink) == (16, 1.0, 1e-4, 0.5)


def test_check_doubling():
    assert check_doubling(SolveReport(c_level=1.0, m_level=2.5), 1e-8)
    assert not check_doubling(SolveReport(c_level=1.0, m_level=1.9), 1e-8)
    with pytest.raises(ValueError):
        check_doubling(SolveReport(c_level=1.0))


class TestDescend:
    def test_start_at_critical_point(self, p3_problem, p3):
        traj = descend(p3_problem, FAST, P3_T0 * p3.indicator("v1"), GROUND)
        assert traj.converged and len(traj.energies) == 1

    def test_nodal_needs_both_signs(self, p4):
        problem = Problem(p4, fx.DOUBLING_PARAMS)
        with pytest.raises(ValidationError):
            descend(problem, FAST, p4.function({"v1": 1.0, "v2": 1.0}), NODAL)

    @pytest.mark.parametrize("target", [GROUND, NODAL])
    def test_energies_non_increasing(self, target):
        gd = fx.grid(4)
        problem = Problem(gd, fx.DOUBLING_PARAMS)
        rng = np.random.default_rng(3)
        traj = descend(problem, FAST, gd.interior_function(rng.standard_normal(16)), target)
        e = np.array(traj.energies)
        assert traj.converged and len(e) > 2
        # equal-energy steps are accepted only within roundoff
        assert np.all(np.diff(e) <= 1e-12 * np.abs(e[1:]))

    def test_p3_closed_form_level(self, p3_problem):
        c, u_bar, outcomes = minimize_ground(p3_problem, FAST)
        assert c == pytest.approx(P3_LEVEL, abs=1e-8)
        assert abs(u_bar[1]) == pytest.approx(P3_T0, abs=1e-8)
        assert all(o.status == "converged" for o in outcomes)

    def test_all_seeds_failing(self, p4):
        problem = Problem(p4, fx.DOUBLING_PARAMS)
        with pytest.raises(ConvergenceError):
            minimize_ground(problem, SolveConfig(seeds=2, max_iters=1, grad_tol=1e-300))


class TestMinimizers:
    def test_nodal_interior_too_small(self, p3_problem):
        with pytest.raises(ValidationError, match="interior too small"):
            minimize_nodal(p3_problem, FAST)
        with pytest.raises(ValidationError, match="interior too small"):
            solve(p3_problem, FAST, mode="nodal")

    def test_p5_nodal_below_decoupled_candidate(self, p5):
        problem = Problem(p5, fx.BASIC_PARAMS)
        m, u_tilde, _ = minimize_nodal(problem, FAST)
        candidate = p5.function({"v1": P3_T0, "v3": -P3_T0})
        assert m <= I(problem, candidate) + 1e-8
        assert u_tilde.min() < 0 < u_tilde.max()
        assert max(membership_residuals(problem, u_tilde, NODAL)) <= 1e-10

    def test_larger_a_raises_ground_level(self, p4):
        base = Problem(p4, fx.DOUBLING_PARAMS)
        stiffer = Problem(p4, ModelParams(**{**fx.DOUBLING_PARAMS.__dict__, "a": 2 * fx.DOUBLING_PARAMS.a}))
        assert minimize_ground(stiffer, FAST)[0] > minimize_ground(base, FAST)[0]

    def test_report(self, p5):
        problem = Problem(p5, fx.DOUBLING_PARAMS)
        rep = solve(problem, FAST)
        assert rep.c_level > 0 and rep.m_level > 0
        assert rep.doubling_ok and rep.ratio == rep.m_level / rep.c_level
        assert rep.residual_max_ground <= 1e-8 and rep.residual_max_nodal <= 1e-8
        nodal = np.array(list(rep.nodal_state.values()))
        assert nodal.min() < 0 < nodal.max()
        doc = json.loads(json.dumps(rep.to_json()))
        assert doc["levels_are_upper_bounds"] is True
        assert len(doc["per_seed_levels"]["ground"]) == FAST.seeds
        u = p5.function(doc["ground_state"])
        assert max(membership_residuals(problem, u, GROUND)) <= 1e-10
        assert max_residual(problem, u) == rep.residual_max_ground

    def test_mode_ground_only(self, p3_problem):
        rep = solve(p3_problem, FAST, mode="ground")
        assert rep.m_level is None and rep.doubling_ok is None
        with pytest.raises(ValueError):
            solve(p3_problem, FAST, mode="sideways")

    def test_deterministic_across_workers(self, monkeypatch):
        problem = Problem(fx.star5(), fx.DOUBLING_PARAMS)
        serial = solve(problem, FAST, workers=1).to_json()
        assert solve(problem, FAST, workers=1).to_json() == serial
        monkeypatch.setenv("GRAPHKIRCHHOFF_THREADS", "2")
        assert solve(problem, FAST).to_json() == serial
