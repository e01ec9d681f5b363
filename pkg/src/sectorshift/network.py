"""Full-period sector correlation, the chord-distance transform, and Kruskal MSTs."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import SectorReturnsPanel
from .errors import InputError

WEIGHTINGS = ("distance", "correlation")


@dataclass(frozen=True, eq=False)
class FullPeriodCorrelation:
    sectors: tuple[str, ...]
    psi: np.ndarray
    dist: np.ndarray


def chord_distance(psi: np.ndarray) -> np.ndarray:
    """sqrt(2 (1 - psi)) entrywise, after clamping psi into [-1, 1]."""
    psi = np.clip(np.asarray(psi, dtype=float), -1.0, 1.0)
    return np.sqrt(2.0 * (1.0 - psi))


def full_correlation(returns: SectorReturnsPanel) -> FullPeriodCorrelation:
    """Pearson correlation between sectors over every day of the panel."""
    R = returns.returns
    if R.shape[0] < 2:
        raise InputError("full-period correlation needs at least two days")
    Rc = R - R.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", Rc, Rc))
    flat = np.flatnonzero(np.ptp(R, axis=0) == 0)
    if flat.size:
        names = ", ".join(returns.sectors[j] for j in flat)
        raise InputError(f"zero-variance sector(s): {names}")
    U = Rc / norms
    psi = U.T @ U
    psi = np.clip((psi + psi.T) / 2, -1.0, 1.0)
    np.fill_diagonal(psi, 1.0)
    dist = chord_distance(psi)
    np.fill_diagonal(dist, 0.0)
    return FullPeriodCorrelation(returns.sectors, psi, dist)


class UnionFind:
    """Disjoint sets with path compression and union by rank."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


@dataclass(frozen=True)
class SpanningTree:
    nodes: tuple[str, ...]
    edges: tuple[tuple[int, int, float], ...]
    weighting: str

    @property
    def total_weight(self) -> float:
        return float(sum(w for _, _, w in self.edges))

    def edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset((i, j) for i, j, _ in self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(len(self.nodes), dtype=int)
        for i, j, _ in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg


def kruskal_mst(weights, weighting: str = "distance", nodes=None) -> SpanningTree:
    """Minimum spanning tree of the complete graph with the given edge weights.

    Edges are scanned in order of (weight, smaller index, larger index), so
    ties resolve deterministically. Negative weights are fine.
    """
    W = np.asarray(weights, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise InputError("weight matrix must be square")
    n = W.shape[0]
    if n < 2:
        raise InputError("a spanning tree needs at least two nodes")
    i, j = np.triu_indices(n, k=1)
    w = W[i, j]
    if not np.all(np.isfinite(w)):
        raise InputError("non-finite edge weight")
    if not np.array_equal(w, W[j, i]):
        raise InputError("weight matrix must be symmetric")
    nodes = tuple(nodes) if nodes is not None else tuple(str(k) for k in range(n))
    if len(nodes) != n:
        raise InputError("node labels do not match the matrix size")

    order = np.lexsort((j, i, w))
    uf = UnionFind(n)
    edges = []
    for k in order:
        a, b = int(i[k]), int(j[k])
        if uf.union(a, b):
            edges.append((a, b, float(w[k])))
            if len(edges) == n - 1:
                break
    return SpanningTree(nodes=nodes, edges=tuple(edges), weighting=weighting)


def sector_mst(corr: FullPeriodCorrelation, weighting: str) -> SpanningTree:
    if weighting == "distance":
        return kruskal_mst(corr.dist, "distance", corr.sectors)
    if weighting == "correlation":
        return kruskal_mst(corr.psi, "correlation", corr.sectors)
    raise InputError(f"unknown weighting {weighting!r}")


def _sorted_edges(tree: SpanningTree):
    return sorted(tree.edges, key=lambda e: (e[2], e[0], e[1]))


def _dot_id(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(tree: SpanningTree) -> str:
    lines = [f"graph {tree.weighting}_mst {{"]
    for name in tree.nodes:
        lines.append(f"  {_dot_id(name)};")
    for i, j, w in _sorted_edges(tree):
        lines.append(f'  {_dot_id(tree.nodes[i])} -- {_dot_id(tree.nodes[j])} [weight={w:.6f}, label="{w:.6f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_edge_csv(tree: SpanningTree) -> str:
    # weights at full precision so a re-import rebuilds the same tree
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i", "j", "source", "target", "weight", "weighting"])
    for i, j, wt in _sorted_edges(tree):
        w.writerow([i, j, tree.nodes[i], tree.nodes[j], repr(wt), tree.weighting])
    return buf.getvalue()


def read_edge_csv(path) -> SpanningTree:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise InputError("edge CSV has no edges")
    names: dict[int, str] = {}
    edges = []
    for r in rows:
        i, j = int(r["i"]), int(r["j"])
        names[i], names[j] = r["source"], r["target"]
        edges.append((i, j, float(r["weight"])))
    n = len(names)
    if sorted(names) != list(range(n)) or len(edges) != n - 1:
        raise InputError("edge CSV does not describe a spanning tree")
    nodes = tuple(names[k] for k in range(n))
    # restore Kruskal's insertion order
    edges.sort(key=lambda e: (e[2], e[0], e[1]))
    return SpanningTree(nodes=nodes, edges=tuple(edges), weighting=rows[0]["weighting"])


def export_graph(tree: SpanningTree, path, fmt: str = "dot") -> Path:
    """Write ``tree`` as a DOT graph or an edge CSV; edges sorted by (weight, i, j)."""
    if fmt == "dot":
        text = to_dot(tree)
    elif fmt in ("csv", "edge-csv"):
        text = to_edge_csv(tree)
    else:
        raise InputError(f"unknown graph format {fmt!r}")
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc}") from exc
    return path
