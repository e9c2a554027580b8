import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from graphkirchhoff import fixtures as fx
from graphkirchhoff.energy import (ModelParams, Problem, decomposition_gaps, energy, gateaux, gradient, I,
                                   master_surplus, max_residual, nodal_ratio, ray_surplus, residual)
from graphkirchhoff.graph_core import IngestError, ValidationError
from graphkirchhoff.verify import GRID, fd_error

from conftest import make_random, random_direction

seeds = st.integers(0, 2**32 - 1)
grid_values = st.sampled_from(GRID) | st.floats(0, 5)


class TestParams:
    def test_valid(self):
        assert fx.BASIC_PARAMS.violations() == []
        assert fx.BASIC_PARAMS.q == 4.0

    @pytest.mark.parametrize("field,value", [("a", 0.0), ("b", -1.0), ("lam", -0.1), ("p", 4.0), ("r", 0.5),
                                             ("k", 0), ("m", 1.5)])
    def test_invalid(self, field, value):
        prm = ModelParams(**{**fx.BASIC_PARAMS.__dict__, field: value})
        assert prm.violations()

    def test_exponent_window(self):
        assert ModelParams(1, 0, 0, 5.0, 1, k=1, m=2).violations()  # 2k/m = 1
        assert ModelParams(1, 0, 0, 5.0, 1, k=3, m=1).violations()  # 2k/m = 6 > p
        assert not ModelParams(1, 0, 0, 5.0, 1, k=5, m=2).violations()  # 2k/m = p

    def test_json_round_trip(self):
        prm = ModelParams(2.0, 0.5, 0.25, 6.5, 2.0, 3, 2, Q={"v1": 2.0}, g=3.0)
        assert ModelParams.from_json(json.dumps(prm.to_json())) == prm

    def test_json_errors(self):
        with pytest.raises(IngestError):
            ModelParams.from_json("{")
        with pytest.raises(IngestError):
            ModelParams.from_json({"a": 1})
        doc = fx.BASIC_PARAMS.to_json()
        doc["k"] = 2.0
        with pytest.raises(IngestError):
            ModelParams.from_json(doc)

    def test_problem_rejects_bad_fields(self, p3):
        with pytest.raises(ValidationError):
            Problem(p3, ModelParams(**{**fx.BASIC_PARAMS.__dict__, "a": -1.0}))
        with pytest.raises(ValidationError):
            Problem(p3, ModelParams(**{**fx.BASIC_PARAMS.__dict__, "Q": {"v0": 1.0}}))
        with pytest.raises(ValidationError):
            Problem(p3, ModelParams(**{**fx.BASIC_PARAMS.__dict__, "g": {"v1": 0.0}}))


class TestP3:
    def test_energy(self, p3_problem, p3):
        u = p3.indicator("v1")
        assert I(p3_problem, u) == pytest.approx(1.04, rel=1e-15)
        assert I(p3_problem, p3.zeros()) == 0.0
        assert I(p3_problem, 2 * u) == pytest.approx(4 + 32 / 25 - 32 / 5 * math.log(2), rel=1e-14)

    def test_breakdown_total(self, p3_problem, p3):
        e = energy(p3_problem, 2 * p3.indicator("v1"))
        assert e.total == e.dirichlet + e.kirchhoff + e.potential + e.log_quartic - e.log_main

    def test_derivative(self, p3_problem, p3):
        u = p3.indicator("v1")
        assert gateaux(p3_problem, u, u) == 2.0
        assert gateaux(p3_problem, u, p3.zeros()) == 0.0
        assert gradient(p3_problem, u)[p3.index["v1"]] == 2.0
        assert residual(p3_problem, u)[p3.index["v1"]] == 2.0
        assert np.all(gradient(p3_problem, p3.zeros()) == 0)
        assert np.all(residual(p3_problem, p3.zeros()) == 0)

    def test_ray_surplus(self, p3_problem, p3):
        u = p3.indicator("v1")
        for t in (0.0, 0.5, 2.0, 4.0):
            assert ray_surplus(p3_problem, u, t) >= 0
        assert ray_surplus(p3_problem, u, 1.0) == 0.0
        assert ray_surplus(p3_problem, p3.zeros(), 3.0) == 0.0


class TestP4:
    @pytest.fixture
    def setup(self, p4):
        return Problem(p4, fx.DOUBLING_PARAMS), p4.function({"v1": 1.0, "v2": -1.0})

    def test_decomposition(self, setup):
        problem, u = setup
        assert all(abs(g) <= 1e-12 for g in decomposition_gaps(problem, u))
        assert all(abs(g) <= 1e-12 for g in decomposition_gaps(problem, np.abs(u)))

    def test_master_grid(self, setup):
        problem, u = setup
        for s in (0, 0.5, 1, 1.5, 3):
            for t in (0, 0.5, 1, 1.5, 3):
                assert master_surplus(problem, u, s, t) >= 0
        assert abs(master_surplus(problem, u, 1, 1)) <= 1e-12
        assert master_surplus(problem, 0 * u, 2.0, 0.5) == 0.0
        with pytest.raises(ValueError):
            master_surplus(problem, u, -1.0, 1.0)


class TestNodalRatio:
    def test_values(self):
        assert nodal_ratio(0.1, 7, 5) == pytest.approx(5 * 0.1**3 * math.log(0.1), rel=1e-14)
        assert nodal_ratio(0.1, 7, 5) > nodal_ratio(0.5, 7, 5)
        assert nodal_ratio(1.0, 7, 5) == 0.0
        assert nodal_ratio(-2.0, 6, 1) == pytest.approx(4.0 * math.log(2.0), rel=1e-14)
        with pytest.raises(ValueError):
            nodal_ratio(0.0, 7, 5)


@given(seeds)
def test_finite_differences(seed):
    problem, u = make_random(seed)
    for k in range(3):
        assert fd_error(problem, u, random_direction(problem, seed + k + 1)) < 1e-6


@given(seeds)
def test_gradient_and_residual_agree_with_gateaux(seed):
    problem, u = make_random(seed)
    gd = problem.gd
    grad = gradient(problem, u)
    res = residual(problem, u)
    for x in gd.domain.interior:
        i = gd.index[x]
        direct = gateaux(problem, u, gd.indicator(x))
        assert grad[i] == pytest.approx(direct, rel=1e-12, abs=1e-12 * (1 + abs(direct)))
        assert res[i] * gd.mu[i] == pytest.approx(grad[i], rel=1e-12, abs=1e-12 * np.abs(grad).max())


@given(seeds)
def test_energy_even(seed):
    problem, u = make_random(seed)
    assert I(problem, -u) == I(problem, u)


@given(seeds)
def test_decomposition_identities(seed):
    problem, u = make_random(seed)
    gaps, scale = decomposition_gaps(problem, u, return_scale=True)
    assert max(map(abs, gaps)) <= 1e-10 * scale


@given(seeds, grid_values, grid_values)
def test_master_inequality(seed, s, t):
    problem, u = make_random(seed)
    val, scale = master_surplus(problem, u, s, t, return_scale=True)
    assert val >= -1e-10 * scale
    one, scale1 = master_surplus(problem, u, 1.0, 1.0, return_scale=True)
    assert abs(one) <= 1e-10 * scale1


@given(seeds, grid_values)
def test_ray_inequality(seed, t):
    problem, u = make_random(seed)
    val, scale = ray_surplus(problem, u, t, return_scale=True)
    assert val >= -1e-10 * scale
    assert ray_surplus(problem, u, 1.0) == pytest.approx(0.0, abs=1e-10 * scale)


def test_converged_state_has_small_residual(p3_problem, p3):
    from conftest import P3_T0
    assert max_residual(p3_problem, P3_T0 * p3.indicator("v1")) < 1e-12
