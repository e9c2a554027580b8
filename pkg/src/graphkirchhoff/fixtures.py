"""Small named graphs used by the tests, the acceptance run and the CLI docs.

All fixtures have unit vertex measure and unit edge weights.
"""

from __future__ import annotations

from .energy import ModelParams
from .graph_core import Domain, GraphDomain, WeightedGraph

# 1-D test problem: pure Laplacian plus log nonlinearity
BASIC_PARAMS = ModelParams(a=1.0, b=0.0, lam=0.0, p=5.0, r=1.0, k=2, m=1, Q=1.0, g=1.0)
# every term switched on, used for the doubling runs
DOUBLING_PARAMS = ModelParams(a=1.0, b=0.5, lam=0.5, p=5.0, r=1.0, k=2, m=1, Q=1.0, g=1.0)


def _build(vertices, edges, interior, boundary) -> GraphDomain:
    graph = WeightedGraph.from_edges({v: 1.0 for v in vertices}, [(x, y, 1.0) for x, y in edges])
    return GraphDomain(graph, Domain(frozenset(interior), frozenset(boundary)))


def path(n: int) -> GraphDomain:
    """Path v0 - ... - v{n-1}; the two endpoints form the boundary."""
    if n < 3:
        raise ValueError("a path fixture needs at least 3 vertices")
    names = [f"v{i}" for i in range(n)]
    edges = list(zip(names, names[1:]))
    return _build(names, edges, names[1:-1], [names[0], names[-1]])


def cycle6() -> GraphDomain:
    """6-cycle with two opposite boundary vertices (v0 and v3)."""
    names = [f"v{i}" for i in range(6)]
    edges = [(names[i], names[(i + 1) % 6]) for i in range(6)]
    return _build(names, edges, ["v1", "v2", "v4", "v5"], ["v0", "v3"])


def star5() -> GraphDomain:
    """Star with centre c and five leaves; two leaves are boundary."""
    leaves = [f"l{i}" for i in range(5)]
    edges = [("c", leaf) for leaf in leaves]
    return _build(["c", *leaves], edges, ["c", "l0", "l1", "l2"], ["l3", "l4"])


def grid(n: int = 4) -> GraphDomain:
    """n x n interior grid surrounded by a frame of 4n boundary vertices (no corners)."""
    inner = {(i, j): f"g{i}_{j}" for i in range(n) for j in range(n)}
    frame = {}
    for k in range(n):
        frame[(-1, k)] = f"g-1_{k}"
        frame[(n, k)] = f"g{n}_{k}"
        frame[(k, -1)] = f"g{k}_-1"
        frame[(k, n)] = f"g{k}_{n}"
    every = {**inner, **frame}
    edges = []
    for (i, j), name in inner.items():
        for di, dj in ((1, 0), (0, 1), (-1, 0), (0, -1)):
            other = every.get((i + di, j + dj))
            if other is not None and (other in frame.values() or (di, dj) in ((1, 0), (0, 1))):
                edges.append((name, other))
    return _build(list(every.values()), edges, list(inner.values()), list(frame.values()))


def doubling_suite() -> dict[str, GraphDomain]:
    return {"P4": path(4), "P5": path(5), "C6": cycle6(), "S5": star5(), "grid4": grid(4)}
