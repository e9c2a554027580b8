"""The energy functional, its derivative, the pointwise residual, and the
sign-splitting identities/inequalities they satisfy.

Power convention: ``u^(2k/m)`` is taken as ``|u|^(2k/m)`` and ``u^(2k/m - 1)``
as ``|u|^(2k/m - 2) u`` (zero at ``u = 0``). The log integrand
``Q |u|^p ln|u|^r`` is exactly 0 where ``u = 0``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from . import graph_core
from .graph_core import GraphDomain, IngestError, ValidationError

Field = Union[float, Mapping[str, float]]


@dataclass(frozen=True)
class ModelParams:
    a: float
    b: float
    lam: float
    p: float
    r: float
    k: int
    m: int
    Q: Field = 1.0
    g: Field = 1.0

    @property
    def q(self) -> float:
        """The power-law exponent 2k/m."""
        return 2.0 * self.k / self.m

    def violations(self) -> list[str]:
        out = []
        if not self.a > 0:
            out.append(f"a must be > 0, got {self.a}")
        if not self.b >= 0:
            out.append(f"b must be >= 0, got {self.b}")
        if not self.lam >= 0:
            out.append(f"lambda must be >= 0, got {self.lam}")
        if not self.p > 4:
            out.append(f"p must be > 4, got {self.p}")
        if not self.r >= 1:
            out.append(f"r must be >= 1, got {self.r}")
        for name in ("k", "m"):
            val = getattr(self, name)
            if not (isinstance(val, (int, np.integer)) and not isinstance(val, bool) and val >= 1):
                out.append(f"{name} must be a positive integer, got {val!r}")
        if not out and not (1 < self.q <= self.p):
            out.append(f"need 1 < 2k/m <= p, got 2k/m = {self.q}")
        return out

    def field_array(self, gd: GraphDomain, name: str) -> np.ndarray:
        spec = getattr(self, name)
        arr = gd.zeros()
        if isinstance(spec, Mapping):
            missing = sorted(v for v in gd.domain.interior if v not in spec)
            if missing:
                raise ValidationError(f"{name} missing for interior vertices {missing}")
            for v in gd.domain.interior:
                arr[gd.index[v]] = float(spec[v])
        else:
            arr[gd.interior_idx] = float(spec)
        bad = gd.interior_idx[~(arr[gd.interior_idx] > 0)]
        if bad.size:
            raise ValidationError(f"{name} must be positive on the interior (vertex {gd.vertices[bad[0]]})")
        return arr

    def to_json(self) -> dict:
        def enc(f):
            return dict(sorted(f.items())) if isinstance(f, Mapping) else f

        return {"a": self.a, "b": self.b, "lambda": self.lam, "p": self.p, "r": self.r,
                "k": self.k, "m": self.m, "Q": enc(self.Q), "g": enc(self.g)}

    @classmethod
    def from_json(cls, data) -> "ModelParams":
        if isinstance(data, (str, bytes)):
            try:
                data = json.loads(data)
            except json.JSONDecodeError as exc:
                raise IngestError(f"params file is not valid JSON: {exc}") from exc

        def dec(f):
            if isinstance(f, Mapping):
                return {str(k): float(v) for k, v in f.items()}
            return float(f)

        try:
            k, m = data["k"], data["m"]
            if not (isinstance(k, int) and isinstance(m, int)):
                raise IngestError(f"k and m must be integers, got {k!r}, {m!r}")
            return cls(a=float(data["a"]), b=float(data["b"]), lam=float(data["lambda"]),
                       p=float(data["p"]), r=float(data["r"]), k=k, m=m,
                       Q=dec(data.get("Q", 1.0)), g=dec(data.get("g", 1.0)))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, IngestError):
                raise
            raise IngestError(f"malformed params document: {exc!r}") from exc


class Problem:
    """A graph domain together with validated model parameters."""

    def __init__(self, gd: GraphDomain, params: ModelParams):
        problems = params.violations()
        if problems:
            raise ValidationError(problems)
        self.gd = gd
        self.params = params
        self.Q = params.field_array(gd, "Q")
        self.g = params.field_array(gd, "g")
        # mu-weighted coefficient fields
        self.muQ = gd.mu * self.Q
        self.mug = gd.mu * self.g


@dataclass(frozen=True)
class EnergyBreakdown:
    dirichlet: float
    kirchhoff: float
    potential: float
    log_quartic: float
    log_main: float

    @property
    def total(self) -> float:
        return self.dirichlet + self.kirchhoff + self.potential + self.log_quartic - self.log_main

    @property
    def scale(self) -> float:
        return (abs(self.dirichlet) + abs(self.kirchhoff) + abs(self.potential)
                + abs(self.log_quartic) + abs(self.log_main))


def _abs_log(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    absu = np.abs(u)
    logu = np.zeros_like(absu)
    nz = absu > 0
    logu[nz] = np.log(absu[nz])
    return absu, logu


def power_term(u, q: float) -> np.ndarray:
    """|u|^(q-2) u, set to 0 where u = 0."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    nz = u != 0
    out[nz] = np.abs(u[nz]) ** (q - 2.0) * u[nz]
    return out


def log_term(u, p: float, r: float) -> np.ndarray:
    """|u|^(p-2) u ln|u|^r, set to 0 where u = 0."""
    u = np.asarray(u, dtype=float)
    absu, logu = _abs_log(u)
    return absu ** (p - 2.0) * u * (r * logu)


def energy(problem: Problem, u) -> EnergyBreakdown:
    gd, prm = problem.gd, problem.params
    u = gd.check(u)
    nsq = graph_core.sobolev_norm_sq(gd, u)
    absu, logu = _abs_log(u)
    up = absu**prm.p
    return EnergyBreakdown(
        dirichlet=0.5 * prm.a * nsq,
        kirchhoff=0.25 * prm.b * nsq * nsq,
        potential=prm.lam / prm.q * float(np.dot(problem.mug, absu**prm.q)),
        log_quartic=prm.r / prm.p**2 * float(np.dot(problem.muQ, up)),
        log_main=float(np.dot(problem.muQ, up * (prm.r * logu))) / prm.p,
    )


def I(problem: Problem, u) -> float:
    return energy(problem, u).total


def gateaux(problem: Problem, u, v) -> float:
    """Directional derivative <I'(u), v>."""
    gd, prm = problem.gd, problem.params
    u = gd.check(u)
    v = gd.check(v)
    nsq = graph_core.sobolev_norm_sq(gd, u)
    form = graph_core.dirichlet_form(gd, u, v)
    pot = float(np.dot(problem.mug, power_term(u, prm.q) * v))
    log = float(np.dot(problem.muQ, log_term(u, prm.p, prm.r) * v))
    return (prm.a + prm.b * nsq) * form + prm.lam * pot - log


def gradient(problem: Problem, u) -> np.ndarray:
    """Vector of <I'(u), e_x> over the working set (zero on the boundary)."""
    gd, prm = problem.gd, problem.params
    u = gd.check(u)
    nsq = graph_core.sobolev_norm_sq(gd, u)
    ku = np.zeros(gd.n)
    np.add.at(ku, gd.arc_src, gd.arc_w * (u[gd.arc_src] - u[gd.arc_dst]))
    out = (prm.a + prm.b * nsq) * ku
    out += prm.lam * problem.mug * power_term(u, prm.q)
    out -= problem.muQ * log_term(u, prm.p, prm.r)
    out[~gd.interior_mask] = 0.0
    return out


def residual(problem: Problem, u) -> np.ndarray:
    """Pointwise defect of the equation at every interior vertex (0 on the boundary)."""
    gd, prm = problem.gd, problem.params
    u = gd.check(u)
    nsq = graph_core.sobolev_norm_sq(gd, u)
    res = (-(prm.a + prm.b * nsq) * graph_core.laplacian(gd, u)
           + prm.lam * problem.g * power_term(u, prm.q)
           - problem.Q * log_term(u, prm.p, prm.r))
    res[~gd.interior_mask] = 0.0
    return res


def max_residual(problem: Problem, u) -> float:
    return float(np.max(np.abs(residual(problem, u)), initial=0.0))


# ---------------------------------------------------------------------------
# sign-splitting identities and inequalities


@dataclass(frozen=True)
class _Split:
    up: np.ndarray
    um: np.ndarray
    A: float  # ||u+||^2
    B: float  # ||u-||^2
    c_mp: float
    c_pm: float


def _split(problem: Problem, u) -> _Split:
    gd = problem.gd
    up, um = graph_core.pos_part(u), graph_core.neg_part(u)
    c_mp, c_pm = graph_core.cross_terms(gd, u)
    return _Split(up, um, graph_core.sobolev_norm_sq(gd, up), graph_core.sobolev_norm_sq(gd, um),
                  c_mp, c_pm)


def decomposition_gaps(problem: Problem, u, return_scale: bool = False):
    """Defects of the three sign-splitting identities for I(u) and <I'(u), u^+->.

    Each gap is (direct evaluation) - (value rebuilt from u^+, u^- and the
    cross sums); all vanish up to roundoff. With ``return_scale`` the sum of
    absolute contributions is returned as well, for relative comparisons.
    """
    prm = problem.params
    a, b = prm.a, prm.b
    u = problem.gd.check(u)
    sp = _split(problem, u)
    cm, cp = sp.c_mp, sp.c_pm

    e_u = energy(problem, u)
    e_p, e_m = energy(problem, sp.up), energy(problem, sp.um)
    extra_I = [
        -a / 2 * cm, -a / 2 * cp,
        b / 4 * cm**2, b / 4 * cp**2,
        b / 2 * sp.A * sp.B, b / 2 * cm * cp,
        -b / 2 * sp.A * cm, -b / 2 * sp.A * cp,
        -b / 2 * sp.B * cm, -b / 2 * sp.B * cp,
    ]
    gap_I = e_u.total - (e_p.total + e_m.total + sum(extra_I))
    scale = e_u.scale + e_p.scale + e_m.scale + sum(map(abs, extra_I))

    gaps = [gap_I]
    for part, own, other in ((sp.up, sp.A, sp.B), (sp.um, sp.B, sp.A)):
        lhs = gateaux(problem, u, part)
        self_pair = gateaux(problem, part, part)
        extra = [
            -a / 2 * cm, -a / 2 * cp,
            b / 2 * cm**2, b / 2 * cp**2,
            b * sp.A * sp.B, b * cp * cm,
            -1.5 * b * own * cm, -1.5 * b * own * cp,
            -b / 2 * other * cm, -b / 2 * other * cp,
        ]
        gaps.append(lhs - (self_pair + sum(extra)))
        scale += abs(lhs) + abs(self_pair) + sum(map(abs, extra))
        scale += _pairing_scale(problem, u, part) + _pairing_scale(problem, part, part)
    if return_scale:
        return tuple(gaps), scale
    return tuple(gaps)


def _pairing_scale(problem: Problem, u, v) -> float:
    """Sum of absolute values of the pieces of <I'(u), v>."""
    gd, prm = problem.gd, problem.params
    nsq = graph_core.sobolev_norm_sq(gd, u)
    form = abs(graph_core.dirichlet_form(gd, u, v))
    pot = float(np.dot(problem.mug, np.abs(power_term(u, prm.q) * v)))
    log = float(np.dot(problem.muQ, np.abs(log_term(u, prm.p, prm.r) * v)))
    return (prm.a + prm.b * nsq) * form + prm.lam * pot + log


def master_surplus(problem: Problem, u, s: float, t: float, return_scale: bool = False):
    """I(u) minus the full right-hand side of the two-parameter lower bound.

    The bound compares I(u) with I(s u^+ + t u^-) plus the pairings
    <I'(u), u^+->, the a- and b-corrections in ||u^+-|| and the cross-sum
    corrections. The surplus is >= 0 for every u and s, t >= 0, and 0 at
    s = t = 1.
    """
    if s < 0 or t < 0:
        raise ValueError("s and t must be nonnegative")
    prm = problem.params
    a, b, p = prm.a, prm.b, prm.p
    u = problem.gd.check(u)
    sp = _split(problem, u)
    cm, cp = sp.c_mp, sp.c_pm
    e_u = energy(problem, u)
    e_st = energy(problem, s * sp.up + t * sp.um)
    dp = gateaux(problem, u, sp.up)
    dm = gateaux(problem, u, sp.um)
    fs, ft = (1 - s**p) / p, (1 - t**p) / p
    d2 = (s**2 - t**2) ** 2
    terms = [
        e_st.total,
        fs * dp,
        ft * dm,
        a * ((1 - s**2) / 2 - fs) * sp.A,
        a * ((1 - t**2) / 2 - ft) * sp.B,
        b * ((1 - s**4) / 4 - fs) * sp.A**2,
        b * ((1 - t**4) / 4 - ft) * sp.B**2,
        b * d2 / 4 * sp.A * sp.B,
        b * d2 / 4 * cm * cp,
        -a * (s - t) ** 2 / 4 * cm,
        -a * (s - t) ** 2 / 4 * cp,
        b * d2 / 8 * cm**2,
        b * d2 / 8 * cp**2,
    ]
    surplus = e_u.total - sum(terms)
    if return_scale:
        scale = (e_u.scale + e_st.scale + sum(map(abs, terms[1:]))
                 + abs(fs) * _pairing_scale(problem, u, sp.up)
                 + abs(ft) * _pairing_scale(problem, u, sp.um))
        return surplus, scale
    return surplus


def ray_surplus(problem: Problem, u, t: float, return_scale: bool = False):
    """I(u) - [I(tu) + (1-t^p)/p <I'(u),u> + a(...)||u||^2 + b(...)||u||^4]; >= 0, 0 at t = 1."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    prm = problem.params
    a, b, p = prm.a, prm.b, prm.p
    u = problem.gd.check(u)
    nsq = graph_core.sobolev_norm_sq(problem.gd, u)
    e_u = energy(problem, u)
    e_t = energy(problem, t * u)
    ft = (1 - t**p) / p
    terms = [
        e_t.total,
        ft * gateaux(problem, u, u),
        a * ((1 - t**2) / 2 - ft) * nsq,
        b * ((1 - t**4) / 4 - ft) * nsq**2,
    ]
    surplus = e_u.total - sum(terms)
    if return_scale:
        scale = e_u.scale + e_t.scale + sum(map(abs, terms[1:])) + abs(ft) * _pairing_scale(problem, u, u)
        return surplus, scale
    return surplus


def nodal_ratio(s: float, p: float, r: float) -> float:
    """|s|^(p-2) s ln|s|^r / s^3."""
    if s == 0:
        raise ValueError("nodal_ratio is undefined at s = 0")
    return abs(s) ** (p - 2) * s * (r * math.log(abs(s))) / s**3
