"""Shared fixtures and independent oracles.

Every oracle here is written from the defining formulas with explicit loops
or recursion and never calls the code path it is used to check.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from tnarch.analysis import AnalysisGraph, GEdge, InputPartition
from tnarch.network import Delta, Leg, Open, TensorNetwork


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- tensors -----------------------------------------------------------------


def loop_outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros(a.shape + b.shape)
    for i in itertools.product(*map(range, a.shape)):
        for j in itertools.product(*map(range, b.shape)):
            out[i + j] = a[i] * b[j]
    return out


def formula_matricize(a: np.ndarray, rows: list[int], cols: list[int]) -> np.ndarray:
    """Row/column placement straight from the 1-based index formula."""
    dims = a.shape
    n_rows = math.prod(dims[i - 1] for i in rows)
    n_cols = math.prod(dims[j - 1] for j in cols)
    out = np.full((n_rows, n_cols), np.nan)
    for d in itertools.product(*[range(1, m + 1) for m in dims]):
        r = 1 + sum((d[it - 1] - 1) * math.prod(dims[i - 1] for i in rows[t + 1 :]) for t, it in enumerate(rows))
        c = 1 + sum((d[jt - 1] - 1) * math.prod(dims[j - 1] for j in cols[t + 1 :]) for t, jt in enumerate(cols))
        out[r - 1, c - 1] = a[tuple(x - 1 for x in d)]
    return out


# --- tensor networks ---------------------------------------------------------


def brute_contract(tn: TensorNetwork) -> np.ndarray:
    """Sum over every assignment of every edge index; δ nodes as explicit indicator checks."""
    edges = list(tn.edges)
    pos = {e.id: k for k, e in enumerate(edges)}
    legs: dict[int, dict[int, int]] = {n.id: {} for n in tn.nodes}
    for e in edges:
        for end in e.ends:
            if isinstance(end, Leg):
                legs[end.node][end.leg] = pos[e.id]
    out = np.zeros([edges[pos[i]].dim for i in tn.open_order])
    open_pos = [pos[i] for i in tn.open_order]
    for assign in itertools.product(*[range(e.dim) for e in edges]):
        term = 1.0
        for n in tn.nodes:
            idx = [assign[legs[n.id][k]] for k in range(n.order)]
            if isinstance(n.kind, Delta):
                if len(set(idx)) != 1:
                    term = 0.0
                    break
            else:
                term *= n.kind.tensor[tuple(idx)]
        if term:
            out[tuple(assign[p] for p in open_pos)] += term
    return out


# --- ConvAC ------------------------------------------------------------------


def ht_tensor(spec, w, y: int = 0) -> np.ndarray:
    """Weights tensor by the hierarchical recursion: phi^{l,j,g} = sum_a a^{l,j,g}_a (x)_t phi^{l-1,...,a}."""
    # level-0 pieces: phi[j][alpha] = row alpha of A(0, j), a vector over M
    phi = [[w.A[(0, j)][a] for a in range(spec.channels[0])] for j in range(spec.n)]
    for l in range(1, spec.depth + 1):
        groups = [phi[k * spec.pool : (k + 1) * spec.pool] for k in range(len(phi) // spec.pool)]
        mats = [w.A[(l, k)] for k in range(len(groups))] if l < spec.depth else [w.G]
        new = []
        for mat, group in zip(mats, groups):
            r_prev = mat.shape[1]
            pooled = []
            for a in range(r_prev):
                t = group[0][a]
                for piece in group[1:]:
                    t = np.multiply.outer(t, piece[a])
                pooled.append(t)
            new.append([sum(mat[g, a] * pooled[a] for a in range(r_prev)) for g in range(mat.shape[0])])
        phi = new
    return phi[0][y]


def cp_tensor(spec, w, y: int = 0) -> np.ndarray:
    """Shallow weights tensor: sum_k G[y,k] a^{k,1} (x) ... (x) a^{k,N}."""
    total = 0
    for k in range(spec.channels[0]):
        t = w.A[(0, 0)][k]
        for j in range(1, spec.n):
            t = np.multiply.outer(t, w.A[(0, j)][k])
        total = total + w.G[y, k] * t
    return total


def brute_score(a: np.ndarray, x: np.ndarray) -> float:
    total = 0.0
    for d in itertools.product(*map(range, a.shape)):
        term = a[d]
        for j, dj in enumerate(d):
            term *= x[j][dj]
        total += term
    return total


# --- cuts --------------------------------------------------------------------


def _separates(g: AnalysisGraph, removed: set[int], p: InputPartition) -> bool:
    parent = {v: v for v in g.vertices}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for e in g.edges:
        if e.id not in removed:
            parent[find(e.u)] = find(e.v)
    roots_a = {find(g.inputs[a - 1]) for a in p.A}
    return not any(find(g.inputs[b - 1]) in roots_a for b in p.B)


def literal_min_cuts(g: AnalysisGraph, p: InputPartition) -> tuple[int, int]:
    """(plain, modified) minima over every separating subset of edges."""
    best_plain = best_mod = None
    ids = [e.id for e in g.edges]
    emap = {e.id: e for e in g.edges}
    for mask in range(1 << len(ids)):
        removed = {ids[k] for k in range(len(ids)) if mask >> k & 1}
        if not _separates(g, removed, p):
            continue
        plain = math.prod(emap[i].dim for i in removed)
        groups = {}
        for i in removed:
            e = emap[i]
            key = e.u if e.u in g.deltas else e.v if e.v in g.deltas else ("e", i)
            groups[key] = e.dim
        mod = math.prod(groups.values())
        best_plain = plain if best_plain is None else min(best_plain, plain)
        best_mod = mod if best_mod is None else min(best_mod, mod)
    return best_plain, best_mod


def tree_min_cut(g: AnalysisGraph, p: InputPartition, modified: bool = False) -> int:
    """Dynamic program over a tree-shaped graph; δ vertices may be removed at their group cost."""
    assert len(g.edges) == len(g.vertices) - 1, "oracle needs a tree"
    INF = float("inf")
    side_of = {g.inputs[a - 1]: 0 for a in p.A}
    side_of.update({g.inputs[b - 1]: 1 for b in p.B})
    adj = {v: [] for v in g.vertices}
    for e in g.edges:
        adj[e.u].append((e.v, e))
        adj[e.v].append((e.u, e))
    root = next(v for v in g.vertices if v not in side_of)

    def solve(v, parent):
        # returns (keep cost per side [A, B], removed cost or INF)
        if v in side_of:
            keep = [INF, INF]
            keep[side_of[v]] = 1
            return keep, INF
        children = [(c, e) for c, e in adj[v] if c != parent]
        subs = [(solve(c, v), e, c) for c, e in children]
        is_delta = modified and v in g.deltas
        keep = []
        for s in (0, 1):
            total = 1
            for (ck, cr), e, c in subs:
                if is_delta:
                    opt = min(ck[s], cr)
                elif modified and c in g.deltas:
                    opt = min(ck[s], cr)
                else:
                    opt = min(ck[s], ck[1 - s] * e.dim, cr)
                total *= opt
            keep.append(total)
        removed = INF
        if is_delta:
            dim = adj[v][0][1].dim
            removed = dim
            for (ck, cr), e, c in subs:
                removed *= min(ck[0], ck[1], cr)
        return keep, removed

    keep, removed = solve(root, None)
    best = min(keep[0], keep[1], removed)
    return int(best)


def random_graph(rng: np.random.Generator, n_inputs: int, n_inner: int, n_extra: int,
                 delta_frac: float = 0.4, max_dim: int = 6) -> AnalysisGraph:
    """Random connected graph: inner vertices (some δ), degree-1 inputs, extra cycle edges."""
    inner = list(range(n_inner))
    deltas = {v for v in inner if rng.random() < delta_frac}
    if len(deltas) == n_inner:
        deltas.discard(inner[0])
    delta_dim = {d: int(rng.integers(1, max_dim + 1)) for d in deltas}
    edges = []

    def dim_for(u, v):
        if u in deltas:
            return delta_dim[u]
        if v in deltas:
            return delta_dim[v]
        return int(rng.integers(1, max_dim + 1))

    def add(u, v):
        edges.append(GEdge(len(edges), u, v, dim_for(u, v)))

    non_delta = [v for v in inner if v not in deltas]
    # spanning tree without δ-δ edges: attach each vertex to an earlier compatible one
    order = non_delta + sorted(deltas)
    for k, v in enumerate(order[1:], start=1):
        cands = [u for u in order[:k] if not (u in deltas and v in deltas)]
        add(int(rng.choice(cands)), v)
    for _ in range(n_extra if n_inner > 1 else 0):
        u, v = (int(x) for x in rng.choice(inner, size=2, replace=False))
        if u in deltas and v in deltas:
            continue
        add(u, v)
    inputs = []
    for k in range(n_inputs):
        vid = n_inner + k
        add(int(rng.choice(inner)), vid)
        inputs.append(vid)
    return AnalysisGraph(tuple(range(n_inner + n_inputs)), tuple(edges), tuple(inputs), frozenset(deltas))
