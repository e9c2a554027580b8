"""Projections onto the Nehari set and the nodal Nehari set.

Along a ray ``t -> t u`` and on the quadrant ``(s, t) -> s u^+ + t u^-`` the
pairings with I' reduce to closed forms in a handful of integrals of u.
The projections find the sign changes of these scalar maps by bracketing;
every root search keeps a sign-changing bracket, so the returned point is
the unique zero guaranteed inside it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import graph_core
from .energy import Problem, energy
from .graph_core import ValidationError

DEFAULT_TOL = 1e-10
MAX_BRACKET_EXP = 60
MAX_BOX_EXP = 40


class ProjectionError(RuntimeError):
    """A bracket or box could not be established, or the root missed tolerance."""

    def __init__(self, message, box=None):
        super().__init__(message)
        self.box = box


class DegenerateError(ValidationError):
    """Pair projection requested for a function without both signs."""


@dataclass(frozen=True)
class ScalarProjection:
    t0: float
    residual_f: float
    bracket: tuple[float, float]
    iterations: int


@dataclass(frozen=True)
class PairProjection:
    s0: float
    t0: float
    residual_G: float
    residual_H: float
    box: tuple[float, float]
    iterations: int


# ---------------------------------------------------------------------------
# closed forms


@dataclass(frozen=True)
class _PartIntegrals:
    norm_sq: float  # ||v||^2
    pot: float      # int g |v|^q
    mass: float     # int Q |v|^p
    logmass: float  # int Q |v|^p ln|v|^r


def _part_integrals(problem: Problem, v) -> _PartIntegrals:
    prm = problem.params
    absv = np.abs(v)
    nz = absv > 0
    logv = np.zeros_like(absv)
    logv[nz] = np.log(absv[nz])
    vp = absv**prm.p
    return _PartIntegrals(
        norm_sq=graph_core.sobolev_norm_sq(problem.gd, v),
        pot=float(np.dot(problem.mug, absv**prm.q)),
        mass=float(np.dot(problem.muQ, vp)),
        logmass=float(np.dot(problem.muQ, vp * (prm.r * logv))),
    )


class RayProfile:
    """f(t) = <I'(tu), tu> as a closed form in t."""

    def __init__(self, problem: Problem, u):
        self.prm = problem.params
        self.ints = _part_integrals(problem, u)

    def terms(self, t: float) -> tuple[float, ...]:
        prm, c = self.prm, self.ints
        tp = t**prm.p
        return (prm.a * t * t * c.norm_sq, prm.b * t**4 * c.norm_sq**2,
                prm.lam * t**prm.q * c.pot,
                -tp * c.logmass, -tp * prm.r * math.log(t) * c.mass)

    def __call__(self, t: float) -> float:
        return sum(self.terms(t))

    def scale(self, t: float) -> float:
        return max(1.0, sum(map(abs, self.terms(t))))


class PairProfile:
    """G(s,t) = <I'(su^+ + tu^-), su^+> and H(s,t) = <I'(su^+ + tu^-), tu^->."""

    def __init__(self, problem: Problem, u):
        self.prm = problem.params
        up, um = graph_core.pos_part(u), graph_core.neg_part(u)
        self.plus = _part_integrals(problem, up)
        self.minus = _part_integrals(problem, um)
        c_mp, c_pm = graph_core.cross_terms(problem.gd, u)
        self.c_mp, self.c_pm = c_mp, c_pm

    def _own(self, part: _PartIntegrals, s: float) -> tuple[float, ...]:
        prm = self.prm
        sp = s**prm.p
        return (prm.a * s * s * part.norm_sq, prm.b * s**4 * part.norm_sq**2,
                -sp * part.logmass, -sp * prm.r * math.log(s) * part.mass,
                prm.lam * s**prm.q * part.pot)

    def _coupling(self, x: float, y: float, own: _PartIntegrals, other: _PartIntegrals) -> tuple[float, ...]:
        # x scales the part being paired against, y the other part
        a, b = self.prm.a, self.prm.b
        cm, cp = self.c_mp, self.c_pm
        csum = cm + cp
        xy2 = (x * y) ** 2
        return (-a * x * y / 2 * csum,
                b * xy2 / 2 * (cm * cm + cp * cp),
                b * xy2 * own.norm_sq * other.norm_sq,
                b * xy2 * cp * cm,
                -1.5 * b * x**3 * y * own.norm_sq * csum,
                -0.5 * b * x * y**3 * other.norm_sq * csum)

    def G_terms(self, s: float, t: float) -> tuple[float, ...]:
        return self._own(self.plus, s) + self._coupling(s, t, self.plus, self.minus)

    def H_terms(self, s: float, t: float) -> tuple[float, ...]:
        return self._own(self.minus, t) + self._coupling(t, s, self.minus, self.plus)

    def G(self, s: float, t: float) -> float:
        return sum(self.G_terms(s, t))

    def H(self, s: float, t: float) -> float:
        return sum(self.H_terms(s, t))

    def scale(self, s: float, t: float) -> float:
        return max(1.0, sum(map(abs, self.G_terms(s, t))), sum(map(abs, self.H_terms(s, t))))


def _require_nonzero(u):
    if not np.any(np.asarray(u) != 0):
        raise ValidationError("projection needs a nonzero function")


def f_ray(problem: Problem, u, t: float) -> float:
    u = problem.gd.check(u)
    _require_nonzero(u)
    if not t > 0:
        raise ValueError("t must be positive")
    return RayProfile(problem, u)(t)


def _pair_profile(problem: Problem, u) -> PairProfile:
    u = problem.gd.check(u)
    if not (np.any(u > 0) and np.any(u < 0)):
        raise DegenerateError("pair projection needs u^+ != 0 and u^- != 0")
    return PairProfile(problem, u)


def G_map(problem: Problem, u, s: float, t: float) -> float:
    return _pair_profile(problem, u).G(s, t)


def H_map(problem: Problem, u, s: float, t: float) -> float:
    return _pair_profile(problem, u).H(s, t)


# ---------------------------------------------------------------------------
# root finding


@dataclass
class _Counter:
    calls: int = 0


def _bisect(func, lo, hi, flo, tol, max_iter=200, counter=None):
    best_x, best_f = lo, flo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        fm = func(mid)
        if counter is not None:
            counter.calls += 1
        if abs(fm) < abs(best_f):
            best_x, best_f = mid, fm
        if abs(fm) <= tol:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return best_x


def find_root(func, lo: float, hi: float, tol: float = DEFAULT_TOL, method: str = "brent",
              counter: _Counter | None = None) -> float:
    """Zero of ``func`` inside ``[lo, hi]`` where ``func(lo) > 0 > func(hi)``.

    ``brent`` is scipy's bracketed Brent iteration driven to machine precision;
    ``bisect`` halves the bracket until ``|func| <= tol`` (or 200 steps).
    """
    flo, fhi = func(lo), func(hi)
    if counter is not None:
        counter.calls += 2
    if not (flo > 0 > fhi):
        raise ProjectionError(f"no sign change on [{lo}, {hi}]: f = ({flo}, {fhi})", box=(lo, hi))
    if method == "bisect":
        return _bisect(func, lo, hi, flo, tol, counter=counter)
    if method != "brent":
        raise ValueError(f"unknown root method {method!r}")
    x, info = brentq(func, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                     maxiter=400, full_output=True)
    if counter is not None:
        counter.calls += info.function_calls
    return x


# ---------------------------------------------------------------------------
# projections


def ray_bracket(func) -> tuple[float, float, int]:
    """Double or halve from t = 1 until func changes sign; returns (lo, hi, steps)."""
    f1 = func(1.0)
    if f1 == 0:
        return 0.5, 2.0, 0
    t, steps = 1.0, 0
    if f1 > 0:
        while True:
            steps += 1
            if steps > MAX_BRACKET_EXP:
                raise ProjectionError("ray bracket expansion exceeded 2^60")
            nxt = 2.0 * t
            if func(nxt) < 0:
                return t, nxt, steps
            t = nxt
    while True:
        steps += 1
        if steps > MAX_BRACKET_EXP:
            raise ProjectionError("ray bracket contraction exceeded 2^-60")
        nxt = 0.5 * t
        if func(nxt) > 0:
            return nxt, t, steps
        t = nxt


def scalar_project(problem: Problem, u, tol: float = DEFAULT_TOL, method: str = "brent") -> ScalarProjection:
    """The unique t0 > 0 with t0 u on the Nehari set."""
    u = problem.gd.check(u)
    _require_nonzero(u)
    prof = RayProfile(problem, u)
    lo, hi, steps = ray_bracket(prof)
    if prof(1.0) == 0:
        return ScalarProjection(1.0, 0.0, (lo, hi), 0)
    counter = _Counter(calls=steps + 1)
    t0 = find_root(prof, lo, hi, tol, method, counter)
    res = abs(prof(t0))
    if res > tol * prof.scale(t0):
        raise ProjectionError(f"|f(t0)| = {res:.3e} exceeds tol {tol:.1e}", box=(lo, hi))
    if not lo < t0 < hi:
        # root sits on the bracket edge only when the edge value is ~0
        lo, hi = min(lo, 0.5 * t0), max(hi, 2.0 * t0)
    return ScalarProjection(t0, res, (lo, hi), counter.calls)


def find_box(prof: PairProfile, alpha: float, beta: float) -> tuple[float, float]:
    """Shrink alpha / grow beta dyadically until G, H > 0 at (alpha, alpha) and < 0 at (beta, beta)."""
    alpha0, beta0 = alpha, beta
    for _ in range(MAX_BOX_EXP + 1):
        if prof.G(alpha, alpha) > 0 and prof.H(alpha, alpha) > 0:
            break
        alpha *= 0.5
    else:
        raise ProjectionError("could not find a lower box corner", box=(alpha, beta))
    for _ in range(MAX_BOX_EXP + 1):
        if prof.G(beta, beta) < 0 and prof.H(beta, beta) < 0:
            break
        beta *= 2.0
    else:
        raise ProjectionError("could not find an upper box corner", box=(alpha, beta))
    if alpha < alpha0 * 2.0**-MAX_BOX_EXP or beta > beta0 * 2.0**MAX_BOX_EXP:
        raise ProjectionError("box expansion exceeded 2^40", box=(alpha, beta))
    return alpha, beta


def initial_box(problem: Problem, u, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    up, um = graph_core.pos_part(u), graph_core.neg_part(u)
    sig_p = scalar_project(problem, up, tol).t0
    sig_m = scalar_project(problem, um, tol).t0
    return 2.0**-4 * min(sig_p, sig_m), 2.0**4 * max(sig_p, sig_m)


def pair_project(problem: Problem, u, tol: float = DEFAULT_TOL, box: tuple[float, float] | None = None,
                 method: str = "brent") -> PairProjection:
    """The unique (s0, t0) with s0 u^+ + t0 u^- on the nodal Nehari set.

    Nested root search on the box [alpha, beta]^2: for fixed t the map
    s -> G(s, t) is positive at alpha and negative at beta, and
    t -> H(s*(t), t) likewise, whatever s in the box.
    """
    prof = _pair_profile(problem, u)
    if box is None:
        box = initial_box(problem, u, tol)
    alpha, beta = find_box(prof, *box)
    counter = _Counter()
    inner_tol = 0.1 * tol

    def s_star(t):
        return find_root(lambda s: prof.G(s, t), alpha, beta, inner_tol, method, counter)

    def outer(t):
        return prof.H(s_star(t), t)

    t0 = find_root(outer, alpha, beta, tol, method, counter)
    s0 = s_star(t0)
    rg, rh = prof.G(s0, t0), prof.H(s0, t0)
    if max(abs(rg), abs(rh)) > tol * prof.scale(s0, t0):
        raise ProjectionError(f"pair residuals ({rg:.3e}, {rh:.3e}) exceed tol {tol:.1e}", box=(alpha, beta))
    return PairProjection(s0, t0, rg, rh, (alpha, beta), counter.calls)


# ---------------------------------------------------------------------------
# diagnostics


def box_edge_signs(problem: Problem, u, alpha: float, beta: float, samples: int = 17) -> bool:
    """Check the corner and edge sign pattern of (G, H) on [alpha, beta]^2."""
    prof = _pair_profile(problem, u)
    if not (prof.G(alpha, alpha) > 0 and prof.H(alpha, alpha) > 0
            and prof.G(beta, beta) < 0 and prof.H(beta, beta) < 0):
        return False
    for x in np.linspace(alpha, beta, samples):
        if not (prof.G(alpha, x) > 0 and prof.G(beta, x) < 0
                and prof.H(x, alpha) > 0 and prof.H(x, beta) < 0):
            return False
    return True


def ray_maximality_gap(problem: Problem, u, t0: float, points: int = 64) -> tuple[float, float]:
    """max over t in (0, 2 t0] of I(tu) - I(t0 u), with the energy scale at t0."""
    e0 = energy(problem, t0 * u)
    worst = max(energy(problem, t * u).total for t in 2.0 * t0 * np.arange(1, points + 1) / points)
    return worst - e0.total, e0.scale


def pair_maximality_gap(problem: Problem, u, s0: float, t0: float, box: tuple[float, float],
                        points: int = 16) -> tuple[float, float]:
    """max over a grid on the box of I(su^+ + tu^-) - I(s0 u^+ + t0 u^-)."""
    up, um = graph_core.pos_part(u), graph_core.neg_part(u)
    e0 = energy(problem, s0 * up + t0 * um)
    grid = np.linspace(box[0], box[1], points)
    worst = max(energy(problem, s * up + t * um).total for s in grid for t in grid)
    return worst - e0.total, e0.scale
