"""Randomized property suite for the identities and inequalities of the model.

Each trial draws a random instance from its own stream
``default_rng([seed, trial])`` and runs every check on it. A failing check
stores the instance as JSON so it can be re-run with :func:`recheck`.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import graph_core
from .energy import ModelParams, Problem, energy, gateaux, master_surplus, ray_surplus
from .energy import decomposition_gaps, _pairing_scale
from .graph_core import Domain, GraphDomain, WeightedGraph, edge_key
from .nehari import (ProjectionError, RayProfile, PairProfile, box_edge_signs, initial_box, pair_maximality_gap,
                     pair_project, ray_maximality_gap, scalar_project)

GRID = (0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0)
Q_VALUES = (1.0, 2.0, 4.0, math.inf)
REL_TOL = 1e-10
ABS_TOL = 1e-8
FD_STEP = 1e-5
FD_TOL = 1e-6


class Instance(NamedTuple):
    graph: WeightedGraph
    dom: Domain
    u: dict[str, float]
    params: ModelParams

    def build(self) -> tuple[Problem, np.ndarray]:
        gd = GraphDomain(self.graph, self.dom)
        return Problem(gd, self.params), gd.function(self.u)

    def to_json(self) -> dict:
        return {"graph": graph_core.dump_graph(self.graph, self.dom), "params": self.params.to_json(),
                "u": dict(sorted(self.u.items()))}

    @classmethod
    def from_json(cls, data: dict) -> "Instance":
        graph, dom = graph_core.load_graph(data["graph"])
        return cls(graph, dom, {str(k): float(v) for k, v in data["u"].items()},
                   ModelParams.from_json(data["params"]))


def random_instance(rng: np.random.Generator, size_range: tuple[int, int] = (3, 40)) -> Instance:
    """A connected working graph with random measure, weights, parameters and u.

    ``size_range`` bounds the number of working vertices (interior plus
    boundary) and must lie within [3, 64].
    """
    lo, hi = size_range
    if not 3 <= lo <= hi <= 64:
        raise ValueError(f"size_range must satisfy 3 <= lo <= hi <= 64, got {size_range}")
    n = int(rng.integers(lo, hi + 1))
    n_b = int(rng.integers(1, max(1, n // 3) + 1))
    n_i = n - n_b
    inner = [f"i{k}" for k in range(n_i)]
    outer = [f"b{k}" for k in range(n_b)]
    mu = {v: float(rng.uniform(0.1, 4.0)) for v in inner + outer}

    weights = {}
    # random spanning tree on the interior, then hang each boundary vertex on it
    for k in range(1, n_i):
        weights[edge_key(inner[k], inner[int(rng.integers(0, k))])] = float(rng.uniform(0.1, 4.0))
    for b in outer:
        weights[edge_key(b, inner[int(rng.integers(0, n_i))])] = float(rng.uniform(0.1, 4.0))
    for _ in range(int(rng.integers(0, n_i + 1))):
        x = inner[int(rng.integers(0, n_i))]
        y = (inner + outer)[int(rng.integers(0, n))]
        if x != y:
            weights.setdefault(edge_key(x, y), float(rng.uniform(0.1, 4.0)))

    p = float(rng.uniform(4.0, 9.0))
    while p <= 4.0:
        p = float(rng.uniform(4.0, 9.0))
    m = int(rng.integers(1, 5))
    ks = [k for k in range(1, 10 * m) if 1 < 2 * k / m <= p]
    k = int(ks[int(rng.integers(0, len(ks)))])
    params = ModelParams(
        a=float(rng.uniform(0.1, 4.0)), b=float(rng.uniform(0.0, 2.0)), lam=float(rng.uniform(0.0, 2.0)),
        p=p, r=float(rng.uniform(1.0, 6.0)), k=k, m=m,
        Q={v: float(rng.uniform(0.1, 4.0)) for v in inner},
        g={v: float(rng.uniform(0.1, 4.0)) for v in inner},
    )
    u = {v: float(x) for v, x in zip(inner, rng.standard_normal(n_i))}
    return Instance(WeightedGraph(mu, weights), Domain(frozenset(inner), frozenset(outer)), u, params)


# ---------------------------------------------------------------------------
# scalar facts


def _phi(x: float) -> float:
    """e^x (x - 1) + 1, accurate near 0."""
    if abs(x) < 0.1:
        term, total = x, 0.0
        for n in range(2, 16):
            term *= x / n
            total += (n - 1) * term
        return total
    return math.exp(x) * (x - 1.0) + 1.0


def appendix1_check(tau: float, p: float, r: float) -> float:
    """r (1 - tau^p) + p tau^p ln(tau^r); positive for tau != 1, exactly 0 at tau = 1.

    Evaluated as r * phi(p ln tau) with phi(x) = e^x (x - 1) + 1, which
    avoids the cancellation between the two terms near tau = 1.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if not p > 2 or not r >= 1:
        raise ValueError(f"need p > 2 and r >= 1, got p={p}, r={r}")
    return r * _phi(p * math.log(tau))


def _secant_slope(base: float, x: float) -> float:
    """(1 - base^x) / x without cancellation."""
    return -math.expm1(x * math.log(base)) / x


def appendix2_check(base: float, x1: float, x2: float) -> bool:
    """True iff (1 - base^x1)/x1 > (1 - base^x2)/x2 for 0 < x1 < x2."""
    if not (base > 0 and base != 1):
        raise ValueError(f"base must be positive and != 1, got {base}")
    if not 0 < x1 < x2:
        raise ValueError(f"need 0 < x1 < x2, got {x1}, {x2}")
    return _secant_slope(base, x1) > _secant_slope(base, x2)


def sample_appendix1(rng: np.random.Generator) -> tuple[float, float, float]:
    tau = 1.0
    while tau == 1.0:
        tau = float(np.exp(rng.uniform(-math.log(1e3), math.log(1e3))))
    return tau, float(rng.uniform(2.0, 12.0)) or 12.0, float(rng.uniform(1.0, 6.0))


def sample_appendix2(rng: np.random.Generator) -> tuple[float, float, float]:
    base = 1.0
    while abs(math.log(base)) < 1e-2:
        base = float(np.exp(rng.uniform(-math.log(100.0), math.log(100.0))))
    x1, x2 = sorted(float(x) for x in np.exp(rng.uniform(math.log(1e-3), math.log(20.0), size=2)))
    return base, x1, x2


# ---------------------------------------------------------------------------
# per-instance checks
#
# Each returns (violation, scale, detail): violation >= 0 is the amount by
# which the property is broken, scale the size of the quantities compared.


def check_decomposition(problem, u, rng):
    gaps, scale = decomposition_gaps(problem, u, return_scale=True)
    worst = max(range(3), key=lambda i: abs(gaps[i]))
    return abs(gaps[worst]), scale, {"identity": ["I", "I'(u)u+", "I'(u)u-"][worst], "gap": gaps[worst]}


def check_master_inequality(problem, u, rng):
    worst = (0.0, 1.0, {})
    for s in GRID:
        for t in GRID:
            val, scale = master_surplus(problem, u, s, t, return_scale=True)
            if -val / scale > worst[0] / worst[1]:
                worst = (-val, scale, {"s": s, "t": t, "surplus": val})
    return worst


def check_master_equality(problem, u, rng):
    val, scale = master_surplus(problem, u, 1.0, 1.0, return_scale=True)
    return abs(val), scale, {"surplus": val}


def check_ray_inequality(problem, u, rng):
    worst = (0.0, 1.0, {})
    for t in GRID:
        val, scale = ray_surplus(problem, u, t, return_scale=True)
        if -val / scale > worst[0] / worst[1]:
            worst = (-val, scale, {"t": t, "surplus": val})
    return worst


def check_ray_equality(problem, u, rng):
    val, scale = ray_surplus(problem, u, 1.0, return_scale=True)
    return abs(val), scale, {"surplus": val}


def green_defect(problem, u, phi) -> tuple[float, float]:
    """int (Lap u) phi + int Gamma(u, phi), with the sum of absolute contributions."""
    gd = problem.gd
    lap = graph_core.laplacian(gd, u)
    gam = graph_core.gamma_field(gd, u, phi)
    lhs = graph_core.integrate(gd, lap * phi, over="closure")
    rhs = graph_core.integrate(gd, gam, over="closure")
    scale = float(np.dot(gd.mu, np.abs(lap * phi)) + np.dot(gd.mu, np.abs(gam)))
    return lhs + rhs, scale


def check_green(problem, u, rng):
    phi = problem.gd.interior_function(rng.standard_normal(problem.gd.n_interior))
    val, scale = green_defect(problem, u, phi)
    return abs(val), 1.0 + scale, {"defect": val}


def _embedding(problem, u, constant):
    gd = problem.gd
    norm = graph_core.sobolev_norm(gd, u)
    worst = (0.0, 1.0, {})
    for q in Q_VALUES:
        lhs = graph_core.lq_norm(gd, u, q)
        rhs = constant(gd, q) * norm
        excess = lhs - rhs
        if excess / rhs > worst[0] / worst[1]:
            worst = (excess, rhs, {"q": str(q), "lq_norm": lhs, "bound": rhs})
    return worst


def check_embedding_published(problem, u, rng):
    return _embedding(problem, u, graph_core.embedding_constant)


def check_embedding_green(problem, u, rng):
    # the Green constant is sharp for q = inf, allow for roundoff in the inverse
    return _embedding(problem, u, lambda gd, q: (1 + 1e-12) * graph_core.green_embedding_constant(gd, q))


def fd_error(problem, u, v, h: float = FD_STEP) -> float:
    """Central-difference error of <I'(u), v>, relative to the pairing scale."""
    fd = (energy(problem, u + h * v).total - energy(problem, u - h * v).total) / (2 * h)
    an = gateaux(problem, u, v)
    return abs(fd - an) / max(abs(an), _pairing_scale(problem, u, v), 1e-300)


def check_gradient_fd(problem, u, rng, directions: int = 3):
    worst = 0.0
    for _ in range(directions):
        v = problem.gd.interior_function(rng.standard_normal(problem.gd.n_interior))
        worst = max(worst, fd_error(problem, u, v))
    return worst, 1.0, {"directions": directions}


def check_scalar_membership(problem, u, rng):
    try:
        proj = scalar_project(problem, u)
    except ProjectionError as exc:
        return math.inf, 1.0, {"error": str(exc)}
    w = proj.t0 * u
    val = gateaux(problem, w, w)
    return abs(val), RayProfile(problem, w).scale(1.0), {"t0": proj.t0, "pairing": val}


def check_scalar_maximality(problem, u, rng):
    try:
        proj = scalar_project(problem, u)
    except ProjectionError as exc:
        return math.inf, 1.0, {"error": str(exc)}
    gap, scale = ray_maximality_gap(problem, u, proj.t0)
    return max(gap, 0.0), scale, {"t0": proj.t0, "gap": gap}


def _sign_changing(u) -> bool:
    return bool(np.any(u > 0) and np.any(u < 0))


def check_pair_membership(problem, u, rng):
    if not _sign_changing(u):
        return 0.0, 1.0, {"skipped": "one-signed"}
    try:
        proj = pair_project(problem, u)
    except ProjectionError as exc:
        return math.inf, 1.0, {"error": str(exc)}
    w = proj.s0 * graph_core.pos_part(u) + proj.t0 * graph_core.neg_part(u)
    gp = gateaux(problem, w, graph_core.pos_part(w))
    gm = gateaux(problem, w, graph_core.neg_part(w))
    scale = PairProfile(problem, w).scale(1.0, 1.0)
    signs = box_edge_signs(problem, u, *proj.box)
    violation = max(abs(gp), abs(gm)) if signs else math.inf
    return violation, scale, {"s0": proj.s0, "t0": proj.t0, "pairings": [gp, gm], "box_signs": signs}


def check_pair_maximality(problem, u, rng):
    if not _sign_changing(u):
        return 0.0, 1.0, {"skipped": "one-signed"}
    try:
        proj = pair_project(problem, u)
    except ProjectionError as exc:
        return math.inf, 1.0, {"error": str(exc)}
    gap, scale = pair_maximality_gap(problem, u, proj.s0, proj.t0, proj.box)
    return max(gap, 0.0), scale, {"s0": proj.s0, "t0": proj.t0, "gap": gap}


def uniqueness_spread(problem, u, boxes: int = 8) -> float:
    """Largest relative disagreement of pair projections started from different boxes."""
    alpha, beta = initial_box(problem, u)
    ref = pair_project(problem, u)
    spread = 0.0
    for k in range(boxes):
        box = (alpha * 2.0 ** -(k % 4), beta * 2.0 ** (k // 2))
        proj = pair_project(problem, u, box=box)
        spread = max(spread, abs(proj.s0 - ref.s0) / ref.s0, abs(proj.t0 - ref.t0) / ref.t0)
    return spread


def check_pair_uniqueness(problem, u, rng):
    if not _sign_changing(u):
        return 0.0, 1.0, {"skipped": "one-signed"}
    try:
        spread = uniqueness_spread(problem, u)
    except ProjectionError as exc:
        return math.inf, 1.0, {"error": str(exc)}
    return spread, 1.0, {"spread": spread}


@dataclass(frozen=True)
class Check:
    name: str
    run: Callable
    rel_tol: float = REL_TOL
    abs_tol: float = ABS_TOL

    def fails(self, violation: float, scale: float) -> bool:
        return violation > self.abs_tol and violation > self.rel_tol * scale


INSTANCE_CHECKS = (
    Check("decomposition", check_decomposition),
    Check("master_inequality", check_master_inequality),
    Check("master_equality", check_master_equality),
    Check("ray_inequality", check_ray_inequality),
    Check("ray_equality", check_ray_equality),
    Check("green_identity", check_green),
    # the published constant is checked exactly, as stated
    Check("embedding_published", check_embedding_published, rel_tol=0.0, abs_tol=0.0),
    Check("embedding_green", check_embedding_green, rel_tol=0.0, abs_tol=0.0),
    Check("gradient_fd", check_gradient_fd, rel_tol=FD_TOL, abs_tol=FD_TOL),
    Check("scalar_membership", check_scalar_membership),
    Check("scalar_maximality", check_scalar_maximality),
    Check("pair_membership", check_pair_membership),
    Check("pair_maximality", check_pair_maximality),
    Check("pair_uniqueness", check_pair_uniqueness, rel_tol=1e-9, abs_tol=1e-9),
)
CHECKS = {c.name: c for c in INSTANCE_CHECKS}


# ---------------------------------------------------------------------------
# suite


@dataclass
class CheckResult:
    name: str
    trials: int = 0
    failures: int = 0
    worst_violation: float = 0.0  # relative to the check's scale
    counterexamples: list[dict] = field(default_factory=list)


@dataclass
class PropertyReport:
    seed: int
    trials: int
    checks: list[CheckResult]
    elapsed: float

    @property
    def failures(self) -> int:
        return sum(c.failures for c in self.checks)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def check(self, name: str) -> CheckResult:
        return next(c for c in self.checks if c.name == name)

    def to_json(self) -> dict:
        out = asdict(self)
        out["failures"] = self.failures
        out["passed"] = self.passed
        return out


def _check_rng(seed: int, trial: int, name: str) -> np.random.Generator:
    # per-check stream so a counterexample re-runs without the other checks
    return np.random.default_rng([seed, trial, sum(map(ord, name))])


def run_check(check: Check, instance: Instance, seed: int, trial: int) -> tuple[float, float, dict]:
    problem, u = instance.build()
    return check.run(problem, u, _check_rng(seed, trial, check.name))


def recheck(counterexample: dict) -> float:
    """Re-run a stored counterexample; returns the raw violation."""
    inst = Instance.from_json(counterexample["instance"])
    violation, _, _ = run_check(CHECKS[counterexample["check"]], inst, counterexample["seed"],
                                counterexample["trial"])
    return violation


def run_suite(trials: int, seed: int, size_range: tuple[int, int] = (3, 40),
              appendix_samples: int = 100, max_counterexamples: int = 5,
              checks: tuple[Check, ...] = INSTANCE_CHECKS) -> PropertyReport:
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    start = time.perf_counter()
    results = {c.name: CheckResult(c.name) for c in checks}
    app1 = CheckResult("appendix1")
    app2 = CheckResult("appendix2")

    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        inst = random_instance(rng, size_range)
        problem, u = inst.build()
        for check in checks:
            res = results[check.name]
            res.trials += 1
            try:
                violation, scale, detail = check.run(problem, u, _check_rng(seed, trial, check.name))
            except Exception as exc:  # a crash is a failure, never a silent pass
                violation, scale, detail = math.inf, 1.0, {"error": repr(exc)}
            res.worst_violation = max(res.worst_violation, violation / scale)
            if check.fails(violation, scale):
                res.failures += 1
                if len(res.counterexamples) < max_counterexamples:
                    res.counterexamples.append({"check": check.name, "seed": seed, "trial": trial,
                                                "violation": violation, "scale": scale,
                                                "detail": detail, "instance": inst.to_json()})

        for _ in range(appendix_samples):
            tau, p, r = sample_appendix1(rng)
            val = appendix1_check(tau, p, r)
            app1.trials += 1
            if not val > 0:
                app1.failures += 1
                app1.worst_violation = max(app1.worst_violation, -val)
                if len(app1.counterexamples) < max_counterexamples:
                    app1.counterexamples.append({"seed": seed, "trial": trial, "tau": tau, "p": p, "r": r,
                                                 "value": val})
            base, x1, x2 = sample_appendix2(rng)
            app2.trials += 1
            if not appendix2_check(base, x1, x2):
                app2.failures += 1
                app2.worst_violation = max(app2.worst_violation,
                                           _secant_slope(base, x2) - _secant_slope(base, x1))
                if len(app2.counterexamples) < max_counterexamples:
                    app2.counterexamples.append({"seed": seed, "trial": trial, "base": base, "x1": x1, "x2": x2})

    return PropertyReport(seed, trials, [*results.values(), app1, app2], time.perf_counter() - start)
