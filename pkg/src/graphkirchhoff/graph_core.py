"""Weighted graphs with a Dirichlet domain, and the discrete calculus on them.

Functions on the working vertex set ``interior | boundary`` are plain numpy
vectors indexed by :attr:`GraphDomain.vertices` (sorted vertex ids). A valid
graph function vanishes on every boundary vertex.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np


class IngestError(ValueError):
    """Malformed graph/params/function input (bad JSON, duplicate edges, ...)."""


class ValidationError(ValueError):
    """Input that parses but violates the graph/domain/params invariants."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def edge_key(x: str, y: str) -> tuple[str, str]:
    return (x, y) if x <= y else (y, x)


@dataclass(frozen=True)
class WeightedGraph:
    """Vertex measures ``mu`` and symmetric edge weights.

    ``weights`` is keyed by the sorted vertex pair, so ``w_xy = w_yx`` holds by
    construction. Positivity is not enforced here; see :func:`validate`.
    """

    mu: Mapping[str, float]
    weights: Mapping[tuple[str, str], float]

    @classmethod
    def from_edges(cls, mu: Mapping[str, float], edges: Iterable[tuple[str, str, float]]):
        weights: dict[tuple[str, str], float] = {}
        for x, y, w in edges:
            key = edge_key(str(x), str(y))
            if key in weights:
                raise IngestError(f"duplicate edge {key[0]}-{key[1]}")
            weights[key] = float(w)
        return cls({str(k): float(v) for k, v in mu.items()}, weights)

    def neighbors(self, x: str) -> dict[str, float]:
        out = {}
        for (p, q), w in self.weights.items():
            if p == x:
                out[q] = w
            elif q == x:
                out[p] = w
        return out


@dataclass(frozen=True)
class Domain:
    interior: frozenset[str]
    boundary: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "interior", frozenset(map(str, self.interior)))
        object.__setattr__(self, "boundary", frozenset(map(str, self.boundary)))

    @property
    def closure(self) -> frozenset[str]:
        return self.interior | self.boundary


def validate(graph: WeightedGraph, dom: Domain) -> list[str]:
    """Return human-readable invariant violations; empty iff the pair is well formed."""
    problems: list[str] = []
    for x in sorted(graph.mu):
        m = graph.mu[x]
        if not (m > 0 and math.isfinite(m)):
            problems.append(f"vertex {x}: measure must be positive, got {m}")
    for (x, y), w in sorted(graph.weights.items()):
        if x == y:
            problems.append(f"self-loop at {x}")
        if not (w > 0 and math.isfinite(w)):
            problems.append(f"edge {x}-{y}: weight must be positive, got {w}")
        for v in (x, y):
            if v not in graph.mu:
                problems.append(f"edge {x}-{y}: unknown vertex {v}")

    if not dom.interior:
        problems.append("interior is empty")
    for v in sorted(dom.interior & dom.boundary):
        problems.append(f"vertex {v} is both interior and boundary")
    for v in sorted(dom.closure - set(graph.mu)):
        problems.append(f"domain vertex {v} is not in the graph")

    adjacency: dict[str, set[str]] = {}
    for x, y in graph.weights:
        adjacency.setdefault(x, set()).add(y)
        adjacency.setdefault(y, set()).add(x)
    closure = dom.closure
    for x in sorted(dom.interior):
        for y in sorted(adjacency.get(x, ())):
            if y not in closure:
                problems.append(f"interior vertex {x} has neighbor {y} outside interior|boundary")
    for x in sorted(dom.boundary - dom.interior):
        nbrs = adjacency.get(x, set())
        if not nbrs & dom.interior:
            problems.append(f"boundary vertex {x} has no interior neighbor")
        for y in sorted(nbrs - closure):
            problems.append(f"boundary vertex {x} has neighbor {y} outside the working set")
    return problems


class GraphDomain:
    """Validated (graph, domain) pair compiled to index arrays.

    Every sum runs over ``vertices`` in sorted-id order, and over edges in the
    lexicographic order of their (sorted) index pairs, so results are
    reproducible bit for bit.
    """

    def __init__(self, graph: WeightedGraph, dom: Domain):
        problems = validate(graph, dom)
        if problems:
            raise ValidationError(problems)
        self.graph = graph
        self.domain = dom
        self.vertices: tuple[str, ...] = tuple(sorted(dom.closure))
        self.index = {v: i for i, v in enumerate(self.vertices)}
        n = len(self.vertices)
        self.n = n
        self.mu = np.array([graph.mu[v] for v in self.vertices], dtype=float)
        self.interior_mask = np.array([v in dom.interior for v in self.vertices])
        self.interior_idx = np.flatnonzero(self.interior_mask)

        pairs = []
        for (x, y), w in graph.weights.items():
            if x in self.index and y in self.index:
                i, j = sorted((self.index[x], self.index[y]))
                pairs.append((i, j, w))
        pairs.sort()
        self.edge_i = np.array([p[0] for p in pairs], dtype=int)
        self.edge_j = np.array([p[1] for p in pairs], dtype=int)
        self.edge_w = np.array([p[2] for p in pairs], dtype=float)
        # both orientations, for per-vertex sums over y ~ x
        self.arc_src = np.concatenate([self.edge_i, self.edge_j])
        self.arc_dst = np.concatenate([self.edge_j, self.edge_i])
        self.arc_w = np.concatenate([self.edge_w, self.edge_w])

    @classmethod
    def from_json(cls, data) -> "GraphDomain":
        graph, dom = load_graph(data)
        return cls(graph, dom)

    @property
    def n_interior(self) -> int:
        return len(self.interior_idx)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.n)

    def indicator(self, x: str) -> np.ndarray:
        u = self.zeros()
        u[self.index[x]] = 1.0
        return u

    def function(self, values: Mapping[str, float], default: float | None = 0.0) -> np.ndarray:
        """Build a graph function from a vertex -> value map.

        Missing interior vertices take ``default`` (or raise if it is None).
        Nonzero values on the boundary and unknown vertex ids are rejected.
        """
        u = self.zeros()
        for v, val in values.items():
            v = str(v)
            if v not in self.index:
                raise ValidationError(f"value given for vertex {v} outside the working set")
            if v in self.domain.boundary and float(val) != 0.0:
                raise ValidationError(f"boundary vertex {v} must carry 0, got {val}")
            u[self.index[v]] = float(val)
        if default is None:
            missing = [v for v in self.domain.interior if v not in values]
            if missing:
                raise ValidationError(f"missing values for interior vertices {sorted(missing)}")
        elif default != 0.0:
            for v in self.domain.interior:
                if v not in values:
                    u[self.index[v]] = default
        return u

    def interior_function(self, values: np.ndarray) -> np.ndarray:
        u = self.zeros()
        u[self.interior_idx] = values
        return u

    def as_mapping(self, u: np.ndarray) -> dict[str, float]:
        return {v: float(u[i]) for i, v in enumerate(self.vertices)}

    def check(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n,):
            raise ValueError(f"graph function must have shape ({self.n},), got {u.shape}")
        if np.any(u[~self.interior_mask] != 0.0):
            raise ValueError("graph function must vanish on the boundary")
        return u

    def stiffness(self) -> np.ndarray:
        """Dense matrix of the form (u, v) -> integral of grad u . grad v, on the interior block."""
        k = np.zeros((self.n, self.n))
        np.add.at(k, (self.edge_i, self.edge_i), self.edge_w)
        np.add.at(k, (self.edge_j, self.edge_j), self.edge_w)
        np.add.at(k, (self.edge_i, self.edge_j), -self.edge_w)
        np.add.at(k, (self.edge_j, self.edge_i), -self.edge_w)
        idx = self.interior_idx
        return k[np.ix_(idx, idx)]

    def is_coercive(self) -> bool:
        """True when the Dirichlet energy is a norm (every component touches the boundary)."""
        k = self.stiffness()
        return bool(np.linalg.eigvalsh(k)[0] > 1e-12 * max(1.0, np.abs(k).max()))


# ---------------------------------------------------------------------------
# ingestion


def load_graph(data) -> tuple[WeightedGraph, Domain]:
    """Parse the graph JSON document (dict, JSON text, or path-like already read)."""
    if isinstance(data, (str, bytes)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise IngestError(f"graph file is not valid JSON: {exc}") from exc
    try:
        mu = {}
        for item in data["vertices"]:
            vid = str(item["id"])
            if vid in mu:
                raise IngestError(f"duplicate vertex {vid}")
            mu[vid] = float(item["mu"])
        edges = [(str(e["u"]), str(e["v"]), float(e["w"])) for e in data["edges"]]
        interior = [str(v) for v in data["interior"]]
        boundary = [str(v) for v in data.get("boundary", [])]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, IngestError):
            raise
        raise IngestError(f"malformed graph document: {exc!r}") from exc
    return WeightedGraph.from_edges(mu, edges), Domain(frozenset(interior), frozenset(boundary))


def dump_graph(graph: WeightedGraph, dom: Domain) -> dict:
    return {
        "vertices": [{"id": v, "mu": graph.mu[v]} for v in sorted(graph.mu)],
        "edges": [{"u": x, "v": y, "w": w} for (x, y), w in sorted(graph.weights.items())],
        "interior": sorted(dom.interior),
        "boundary": sorted(dom.boundary),
    }


# ---------------------------------------------------------------------------
# calculus


def laplacian(gd: GraphDomain, u) -> np.ndarray:
    """(1/mu(x)) * sum_{y~x} w_xy (u(y) - u(x)) at every working vertex.

    Only the interior entries are the operator of the equation; boundary
    entries use the neighbors inside the working set.
    """
    u = gd.check(u)
    acc = np.zeros(gd.n)
    np.add.at(acc, gd.arc_src, gd.arc_w * (u[gd.arc_dst] - u[gd.arc_src]))
    return acc / gd.mu


def gamma_field(gd: GraphDomain, u1, u2) -> np.ndarray:
    """Gamma(u1, u2) evaluated at every working vertex."""
    u1 = gd.check(u1)
    u2 = gd.check(u2)
    acc = np.zeros(gd.n)
    d1 = u1[gd.arc_dst] - u1[gd.arc_src]
    d2 = u2[gd.arc_dst] - u2[gd.arc_src]
    np.add.at(acc, gd.arc_src, gd.arc_w * (d1 * d2))  # exactly symmetric in (u1, u2)
    return acc / (2.0 * gd.mu)


def gamma(gd: GraphDomain, u1, u2, x: str) -> float:
    if x not in gd.index:
        raise KeyError(f"unknown vertex {x}")
    return float(gamma_field(gd, u1, u2)[gd.index[x]])


def grad_sq(gd: GraphDomain, u) -> np.ndarray:
    """|grad u|^2 at every working vertex."""
    return gamma_field(gd, u, u)


def integrate(gd: GraphDomain, f, over: str = "interior") -> float:
    f = np.asarray(f, dtype=float)
    if f.shape != (gd.n,):
        raise ValueError(f"integrand must have shape ({gd.n},), got {f.shape}")
    if over == "interior":
        sel = gd.interior_idx
    elif over == "closure":
        sel = slice(None)
    else:
        raise ValueError(f"over must be 'interior' or 'closure', not {over!r}")
    vals = f[sel]
    if np.any(np.isnan(vals)):
        raise ValueError("integrand has missing (NaN) values")
    return float(np.dot(gd.mu[sel], vals))


def dirichlet_form(gd: GraphDomain, u, v) -> float:
    """Integral over the closure of grad u . grad v, as an edge sum."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    du = u[gd.edge_j] - u[gd.edge_i]
    dv = v[gd.edge_j] - v[gd.edge_i]
    return float(np.dot(gd.edge_w, du * dv))


def sobolev_norm_sq(gd: GraphDomain, u) -> float:
    return dirichlet_form(gd, u, u)


def sobolev_norm(gd: GraphDomain, u) -> float:
    gd.check(u)
    return math.sqrt(sobolev_norm_sq(gd, u))


def lq_norm(gd: GraphDomain, u, q: float) -> float:
    if not q >= 1:
        raise ValueError(f"q must be >= 1 or inf, got {q}")
    u = gd.check(u)
    vals = np.abs(u[gd.interior_idx])
    if math.isinf(q):
        return float(vals.max())
    return float(np.dot(gd.mu[gd.interior_idx], vals**q) ** (1.0 / q))


def embedding_constant(gd: GraphDomain, q: float) -> float:
    """The published constant (sum of mu over the working set)^(1/q) / mu_min^(1/2).

    This is not a valid embedding constant for every weighted graph: it
    ignores edge weights and the distance to the boundary. See
    :func:`green_embedding_constant` for one that always holds.
    """
    if not q >= 1:
        raise ValueError(f"q must be >= 1 or inf, got {q}")
    total = float(gd.mu.sum())
    mu_min = float(gd.mu[gd.interior_idx].min())
    exponent = 0.0 if math.isinf(q) else 1.0 / q
    return total**exponent / math.sqrt(mu_min)


def green_embedding_constant(gd: GraphDomain, q: float) -> float:
    """A constant C with ||u||_{L^q} <= C ||u|| for every u, built from the Green matrix.

    |u(x)|^2 <= G_xx ||u||^2 with G the inverse interior stiffness matrix
    (Cauchy-Schwarz in the energy inner product, sharp for q = inf); Hoelder
    then gives the finite-q bound with the interior volume.
    """
    if not q >= 1:
        raise ValueError(f"q must be >= 1 or inf, got {q}")
    green = np.linalg.inv(gd.stiffness())
    sup = math.sqrt(float(np.max(np.diag(green))))
    if math.isinf(q):
        return sup
    volume = float(gd.mu[gd.interior_idx].sum())
    return volume ** (1.0 / q) * sup


def pos_part(u) -> np.ndarray:
    return np.maximum(np.asarray(u, dtype=float), 0.0)


def neg_part(u) -> np.ndarray:
    return np.minimum(np.asarray(u, dtype=float), 0.0)


def cross_terms(gd: GraphDomain, u) -> tuple[float, float]:
    """The two opposite-sign edge sums (C_mp, C_pm); both are <= 0.

    C_mp sums w_xy u^-(x) u^+(y) over x with u(x) < 0 and neighbors y with
    u(y) > 0; C_pm sums w_xy u^-(y) u^+(x) over x with u(x) > 0 and
    neighbors y with u(y) < 0.
    """
    u = np.asarray(u, dtype=float)
    src, dst, w = gd.arc_src, gd.arc_dst, gd.arc_w
    us, ud = u[src], u[dst]
    mp = (us < 0) & (ud > 0)
    pm = (us > 0) & (ud < 0)
    c_mp = float(np.sum(w[mp] * us[mp] * ud[mp]))
    c_pm = float(np.sum(w[pm] * ud[pm] * us[pm]))
    return c_mp, c_pm
