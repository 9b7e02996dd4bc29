"""Tensor networks with dense and δ (super-diagonal) nodes, and exact contraction.

A network is a multigraph: nodes carry tensors, every node leg is attached to
exactly one edge, and edges either join two legs or leave one leg open. The
open edges, in ``open_order``, are the modes of the tensor the network
represents.

δ nodes are never expanded during contraction. All edges meeting at a δ node
carry the same index (that is what being 1 only on the super-diagonal means),
so they are fused into one shared label and contracted as a hyperedge.
"""

from __future__ import annotations

import string
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import ValidationError, check_size, size_cap


@dataclass(frozen=True)
class Dense:
    tensor: np.ndarray

    @property
    def order(self) -> int:
        return self.tensor.ndim

    def leg_dim(self, leg: int) -> int:
        return int(self.tensor.shape[leg])


@dataclass(frozen=True)
class Delta:
    order: int
    dim: int

    def leg_dim(self, leg: int) -> int:
        return self.dim


@dataclass(frozen=True)
class TNode:
    id: int
    kind: Union[Dense, Delta]
    label: str | None = None

    @property
    def order(self) -> int:
        return self.kind.order

    @property
    def is_delta(self) -> bool:
        return isinstance(self.kind, Delta)


@dataclass(frozen=True)
class Leg:
    node: int
    leg: int


@dataclass(frozen=True)
class Open:
    index: int


End = Union[Leg, Open]


@dataclass(frozen=True)
class TEdge:
    id: int
    ends: tuple[End, End]
    dim: int

    @property
    def is_open(self) -> bool:
        return any(isinstance(e, Open) for e in self.ends)

    @property
    def legs(self) -> tuple[Leg, ...]:
        return tuple(e for e in self.ends if isinstance(e, Leg))


@dataclass(frozen=True)
class TensorNetwork:
    nodes: tuple[TNode, ...]
    edges: tuple[TEdge, ...]
    open_order: tuple[int, ...]
    schedule: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "open_order", tuple(self.open_order))
        if self.schedule is not None:
            object.__setattr__(self, "schedule", tuple(self.schedule))

    def node(self, node_id: int) -> TNode:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def edge(self, edge_id: int) -> TEdge:
        for e in self.edges:
            if e.id == edge_id:
                return e
        raise KeyError(edge_id)

    @property
    def open_dims(self) -> tuple[int, ...]:
        by_id = {e.id: e for e in self.edges}
        return tuple(by_id[i].dim for i in self.open_order)

    def incident(self) -> dict[int, list[TEdge]]:
        out: dict[int, list[TEdge]] = {n.id: [] for n in self.nodes}
        for e in self.edges:
            for end in e.legs:
                out.setdefault(end.node, []).append(e)
        return out


def _freeze(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


def dense_node(node_id: int, tensor, label: str | None = None) -> TNode:
    return TNode(node_id, Dense(_freeze(tensor)), label)


def delta_node(node_id: int, order: int, dim: int, label: str | None = None) -> TNode:
    return TNode(node_id, Delta(int(order), int(dim)), label)


def validate(tn: TensorNetwork) -> list[str]:
    """Check every structural invariant; returns diagnostics (empty list means ok)."""
    problems: list[str] = []
    nodes: dict[int, TNode] = {}
    for n in tn.nodes:
        if n.id in nodes:
            problems.append(f"node {n.id}: duplicate id")
        nodes[n.id] = n
        if isinstance(n.kind, Delta):
            if n.kind.order < 2:
                problems.append(f"node {n.id}: delta order {n.kind.order} < 2")
            if n.kind.dim < 1:
                problems.append(f"node {n.id}: delta dim {n.kind.dim} < 1")
        elif n.kind.tensor.ndim < 1:
            problems.append(f"node {n.id}: dense tensor must have order >= 1")
        elif not np.all(np.isfinite(n.kind.tensor)):
            problems.append(f"node {n.id}: non-finite entries")

    covered: dict[tuple[int, int], int] = {}
    open_seen: dict[int, int] = {}
    edge_ids: set[int] = set()
    for e in tn.edges:
        if e.id in edge_ids:
            problems.append(f"edge {e.id}: duplicate id")
        edge_ids.add(e.id)
        if e.dim < 1:
            problems.append(f"edge {e.id}: bond dimension {e.dim} < 1")
        n_open = sum(isinstance(end, Open) for end in e.ends)
        if len(e.ends) != 2 or n_open > 1:
            problems.append(f"edge {e.id}: needs two ends with at most one open")
        for end in e.ends:
            if isinstance(end, Open):
                if end.index in open_seen:
                    problems.append(
                        f"edge {e.id}: open index {end.index} already used by edge {open_seen[end.index]}"
                    )
                open_seen[end.index] = e.id
                continue
            node = nodes.get(end.node)
            if node is None:
                problems.append(f"edge {e.id}: references missing node {end.node}")
                continue
            if not 0 <= end.leg < node.order:
                problems.append(f"edge {e.id}: node {end.node} has no leg {end.leg}")
                continue
            key = (end.node, end.leg)
            if key in covered:
                problems.append(
                    f"node {end.node} leg {end.leg}: attached to edges {covered[key]} and {e.id}"
                )
            covered[key] = e.id
            if node.kind.leg_dim(end.leg) != e.dim:
                problems.append(
                    f"edge {e.id}: dimension mismatch, bond {e.dim} vs node {end.node} "
                    f"leg {end.leg} of dimension {node.kind.leg_dim(end.leg)}"
                )

    for n in nodes.values():
        for leg in range(n.order):
            if (n.id, leg) not in covered:
                problems.append(f"node {n.id} leg {leg}: not attached to any edge")

    expected_open = sorted(open_seen)
    if expected_open != list(range(len(expected_open))):
        problems.append(f"open indices must be 0..k-1, got {expected_open}")
    if len(tn.open_order) != len(open_seen) or any(
        open_seen.get(k) != eid for k, eid in enumerate(tn.open_order)
    ):
        problems.append(
            f"open_order {list(tn.open_order)} disagrees with open edge indices "
            f"{ {k: open_seen[k] for k in sorted(open_seen)} }"
        )

    if tn.schedule is not None:
        by_id = {e.id: e for e in tn.edges}
        for eid in tn.schedule:
            if eid not in by_id:
                problems.append(f"schedule references missing edge {eid}")
            elif by_id[eid].is_open:
                problems.append(f"schedule references open edge {eid}")

    if nodes and not _connected(tn, nodes):
        problems.append("network is not connected")
    if not nodes:
        problems.append("network has no nodes")
    return problems


def _connected(tn: TensorNetwork, nodes: Mapping[int, TNode]) -> bool:
    adj: dict[int, set[int]] = {nid: set() for nid in nodes}
    for e in tn.edges:
        legs = [end.node for end in e.legs if end.node in adj]
        if len(legs) == 2:
            adj[legs[0]].add(legs[1])
            adj[legs[1]].add(legs[0])
    start = next(iter(adj))
    seen = {start}
    stack = [start]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(adj)


def materialize_delta(order: int, dim: int, cap: int | None = None) -> np.ndarray:
    if order < 2 or dim < 1:
        raise ValidationError(f"delta needs order >= 2 and dim >= 1, got ({order}, {dim})")
    check_size([dim] * order, f"delta(order={order}, dim={dim})", cap)
    out = np.zeros((dim,) * order)
    idx = np.arange(dim)
    out[(idx,) * order] = 1.0
    return out


def expand_deltas(tn: TensorNetwork, cap: int | None = None) -> TensorNetwork:
    """Same network with every δ node replaced by its explicit dense tensor."""
    nodes = tuple(
        dense_node(n.id, materialize_delta(n.kind.order, n.kind.dim, cap), n.label)
        if n.is_delta
        else n
        for n in tn.nodes
    )
    return replace(tn, nodes=nodes)


class _UnionFind:
    def __init__(self, items: Iterable):
        self.parent = {x: x for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra
        return ra


@dataclass
class _Piece:
    nodes: set[int]
    array: np.ndarray | None = None
    labels: list[int] = field(default_factory=list)


def _einsum_pair(a: _Piece, b: _Piece, keep: list[int]) -> np.ndarray:
    letters: dict[int, str] = {}
    for lab in a.labels + b.labels + keep:
        if lab not in letters:
            letters[lab] = string.ascii_letters[len(letters)]
    spec = (
        "".join(letters[x] for x in a.labels)
        + ","
        + "".join(letters[x] for x in b.labels)
        + "->"
        + "".join(letters[x] for x in keep)
    )
    return np.einsum(spec, a.array, b.array, optimize=False)


def _reduce_single(array: np.ndarray, labels: list[int], keep_if) -> tuple[np.ndarray, list[int]]:
    """Take diagonals over repeated labels and sum out labels nobody else needs."""
    out_labels: list[int] = []
    for lab in labels:
        if lab not in out_labels and keep_if(lab):
            out_labels.append(lab)
    if out_labels == labels:
        return array, labels
    letters = {lab: string.ascii_letters[i] for i, lab in enumerate(dict.fromkeys(labels))}
    spec = "".join(letters[x] for x in labels) + "->" + "".join(letters[x] for x in out_labels)
    return np.einsum(spec, array), out_labels


def contract(
    tn: TensorNetwork,
    schedule: Sequence[int] | None = None,
    cap: int | None = None,
    dtype=np.float64,
) -> np.ndarray:
    """Contract the whole network into one dense tensor with modes in ``open_order``.

    ``schedule`` is a sequence of internal edge ids; each step joins the two
    partial results holding that edge's end nodes. Whatever is left after the
    schedule (or everything, when no schedule is given or attached to the
    network) is contracted greedily, always picking the pair whose result is
    smallest. Every intermediate is checked against the size cap.

    ``dtype`` is the working precision; ``np.longdouble`` gives extended
    precision on platforms that have it.
    """
    problems = validate(tn)
    if problems:
        raise ValidationError("invalid tensor network: " + "; ".join(problems))
    limit = size_cap() if cap is None else cap
    if schedule is None:
        schedule = tn.schedule or ()
    edges = {e.id: e for e in tn.edges}
    for eid in schedule:
        if eid not in edges:
            raise ValidationError(f"schedule references missing edge {eid}")
        if edges[eid].is_open:
            raise ValidationError(f"schedule references open edge {eid}")

    # One label per edge, fused across each δ node.
    labels = _UnionFind(edges)
    incident = tn.incident()
    for n in tn.nodes:
        if n.is_delta:
            inc = incident[n.id]
            for e in inc[1:]:
                labels.union(inc[0].id, e.id)
    dim_of = {labels.find(e.id): e.dim for e in tn.edges}
    leg_label: dict[tuple[int, int], int] = {}
    for e in tn.edges:
        for end in e.legs:
            leg_label[(end.node, end.leg)] = labels.find(e.id)
    output = [labels.find(eid) for eid in tn.open_order]

    pieces: dict[int, _Piece] = {}
    owner = _UnionFind(n.id for n in tn.nodes)
    for n in tn.nodes:
        if n.is_delta:
            pieces[n.id] = _Piece({n.id})
        else:
            pieces[n.id] = _Piece(
                {n.id}, np.asarray(n.kind.tensor, dtype=dtype), [leg_label[(n.id, k)] for k in range(n.order)]
            )
    # A fused label touching only δ nodes still needs a carrier: a vector of ones.
    carried = {lab for p in pieces.values() for lab in p.labels}
    for n in tn.nodes:
        if n.is_delta:
            lab = leg_label[(n.id, 0)]
            if lab not in carried:
                pieces[n.id].array = np.ones(dim_of[lab], dtype=dtype)
                pieces[n.id].labels = [lab]
                carried.add(lab)

    counts: Counter[int] = Counter()
    for p in pieces.values():
        counts.update(set(p.labels))
    out_set = set(output)

    for key, p in pieces.items():
        if p.array is not None:
            counts.subtract(set(p.labels))
            p.array, p.labels = _reduce_single(
                p.array, p.labels, lambda lab: lab in out_set or counts[lab] > 0
            )
            counts.update(set(p.labels))

    def merge(ka: int, kb: int) -> int:
        a, b = pieces.pop(ka), pieces.pop(kb)
        root = owner.union(ka, kb)
        merged = _Piece(a.nodes | b.nodes)
        if a.array is None or b.array is None:
            src = b if a.array is None else a
            merged.array, merged.labels = src.array, src.labels
        else:
            counts.subtract(set(a.labels))
            counts.subtract(set(b.labels))
            keep = [
                lab
                for lab in dict.fromkeys(a.labels + b.labels)
                if lab in out_set or counts[lab] > 0
            ]
            check_size(
                [dim_of[lab] for lab in keep],
                f"intermediate joining nodes {sorted(a.nodes)} and {sorted(b.nodes)}",
                limit,
            )
            merged.array = _einsum_pair(a, b, keep)
            merged.labels = keep
            counts.update(set(keep))
        pieces[root] = merged
        return root

    for eid in schedule:
        ends = edges[eid].legs
        ka, kb = owner.find(ends[0].node), owner.find(ends[1].node)
        if ka != kb:
            merge(ka, kb)

    # Pieces without a tensor are δ nodes whose labels live elsewhere; fold them in.
    for key in [k for k, p in pieces.items() if p.array is None]:
        if len(pieces) > 1:
            other = next(k for k in pieces if k != key and pieces[k].array is not None)
            merge(other, key)

    while len(pieces) > 1:
        keys = sorted(pieces)
        best = None
        for i, ka in enumerate(keys):
            la = set(pieces[ka].labels)
            for kb in keys[i + 1 :]:
                lb = set(pieces[kb].labels)
                if not la & lb:
                    continue
                size = 1
                for lab in la | lb:
                    others = counts[lab] - (lab in la) - (lab in lb)
                    if lab in out_set or others > 0:
                        size *= dim_of[lab]
                cand = (size, ka, kb)
                if best is None or cand < best:
                    best = cand
        if best is None:
            by_size = sorted(keys, key=lambda k: (pieces[k].array.size, k))
            merge(by_size[0], by_size[1])
        else:
            merge(best[1], best[2])

    (final,) = pieces.values()
    check_size([dim_of[lab] for lab in output], "contraction result", limit)
    if len(set(output)) == len(output):
        perm = [final.labels.index(lab) for lab in output]
        return np.ascontiguousarray(np.transpose(final.array, perm)) if perm else final.array
    # Several open edges share one δ label: embed the values on the diagonal.
    grids = np.indices(final.array.shape, sparse=True)
    result = np.zeros([dim_of[lab] for lab in output], dtype=dtype)
    result[tuple(grids[final.labels.index(lab)] for lab in output)] = final.array
    return result


def attach_vectors(tn: TensorNetwork, vectors: Mapping[int, Sequence[float]]) -> TensorNetwork:
    """Cap open edges (keyed by position in ``open_order``) with vector nodes.

    The remaining open edges are renumbered in their original relative order.
    Attached edges are prepended to the network's schedule, if it has one.
    """
    edges = {e.id: e for e in tn.edges}
    next_node = max(n.id for n in tn.nodes) + 1
    new_nodes = list(tn.nodes)
    new_edges: dict[int, TEdge] = dict(edges)
    capped: list[int] = []
    for pos, vec in sorted(vectors.items()):
        if not 0 <= pos < len(tn.open_order):
            raise ValidationError(f"open edge position {pos} out of range")
        eid = tn.open_order[pos]
        e = edges[eid]
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (e.dim,):
            raise ValidationError(f"vector for open edge {pos} has shape {vec.shape}, need ({e.dim},)")
        new_nodes.append(dense_node(next_node, vec, f"x{pos}"))
        new_edges[eid] = TEdge(eid, (e.legs[0], Leg(next_node, 0)), e.dim)
        capped.append(eid)
        next_node += 1
    remaining = [eid for eid in tn.open_order if eid not in set(capped)]
    for k, eid in enumerate(remaining):
        new_edges[eid] = TEdge(eid, (new_edges[eid].legs[0], Open(k)), new_edges[eid].dim)
    schedule = None if tn.schedule is None else tuple(capped) + tn.schedule
    return TensorNetwork(
        tuple(new_nodes), tuple(new_edges[e.id] for e in tn.edges), tuple(remaining), schedule
    )


def to_json(tn: TensorNetwork) -> dict:
    nodes = []
    for n in tn.nodes:
        if n.is_delta:
            nodes.append({"id": n.id, "kind": "delta", "order": n.kind.order, "dim": n.kind.dim, "label": n.label})
        else:
            nodes.append(
                {
                    "id": n.id,
                    "kind": "dense",
                    "shape": list(n.kind.tensor.shape),
                    "label": n.label,
                    "data": n.kind.tensor.ravel().tolist(),
                }
            )
    edges = []
    for e in tn.edges:
        ends = [["open", end.index] if isinstance(end, Open) else [end.node, end.leg] for end in e.ends]
        edges.append({"id": e.id, "ends": ends, "dim": e.dim})
    out = {"nodes": nodes, "edges": edges, "open_order": list(tn.open_order)}
    if tn.schedule is not None:
        out["schedule"] = list(tn.schedule)
    return out


def from_json(obj: Mapping) -> TensorNetwork:
    try:
        nodes = []
        for raw in obj["nodes"]:
            if raw["kind"] == "delta":
                nodes.append(delta_node(raw["id"], raw["order"], raw["dim"], raw.get("label")))
            elif raw["kind"] == "dense":
                shape = [int(s) for s in raw["shape"]]
                data = raw.get("data")
                if data is None:
                    raise ValidationError(f"dense node {raw['id']} has no data")
                nodes.append(dense_node(raw["id"], np.asarray(data, dtype=np.float64).reshape(shape), raw.get("label")))
            else:
                raise ValidationError(f"unknown node kind {raw['kind']!r}")
        edges = []
        for raw in obj["edges"]:
            ends = tuple(
                Open(int(end[1])) if end[0] == "open" else Leg(int(end[0]), int(end[1])) for end in raw["ends"]
            )
            edges.append(TEdge(int(raw["id"]), ends, int(raw["dim"])))
        schedule = obj.get("schedule")
        return TensorNetwork(
            tuple(nodes), tuple(edges), tuple(int(i) for i in obj["open_order"]),
            None if schedule is None else tuple(int(i) for i in schedule),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise ValidationError(f"malformed tensor network JSON: {exc!r}") from exc
