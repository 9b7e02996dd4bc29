"""Analysis graph of a ConvAC tensor network, input partitions and cut weights."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from ..errors import ValidationError
from ..network import TensorNetwork, validate


@dataclass(frozen=True)
class GEdge:
    id: int
    u: int
    v: int
    dim: int

    def other(self, x: int) -> int:
        return self.v if x == self.u else self.u


@dataclass(frozen=True)
class AnalysisGraph:
    """Undirected graph ``G(V, E)`` with bond dimensions and δ edge groups.

    ``inputs[i]`` is the degree-1 vertex standing for input ``i + 1``. Every
    edge touching a vertex in ``deltas`` belongs to that vertex's group; any
    other edge is a group of its own.
    """

    vertices: tuple[int, ...]
    edges: tuple[GEdge, ...]
    inputs: tuple[int, ...]
    deltas: frozenset[int] = frozenset()
    labels: Mapping[int, str] | None = None

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "deltas", frozenset(self.deltas))
        vset = set(self.vertices)
        if len(vset) != len(self.vertices):
            raise ValidationError("duplicate vertex ids")
        if len({e.id for e in self.edges}) != len(self.edges):
            raise ValidationError("duplicate edge ids")
        for e in self.edges:
            if e.u not in vset or e.v not in vset:
                raise ValidationError(f"edge {e.id} references an unknown vertex")
            if e.u == e.v:
                raise ValidationError(f"edge {e.id} is a self-loop")
            if e.dim < 1:
                raise ValidationError(f"edge {e.id} has dimension {e.dim} < 1")
            if e.u in self.deltas and e.v in self.deltas:
                raise ValidationError(f"edge {e.id} joins two δ vertices; its group is ambiguous")
        if not self.deltas <= vset:
            raise ValidationError("δ vertex set contains unknown vertices")
        if len(set(self.inputs)) != len(self.inputs) or not set(self.inputs) <= vset:
            raise ValidationError("input vertices must be distinct graph vertices")
        deg = self.degree
        for k, v in enumerate(self.inputs):
            if deg[v] != 1:
                raise ValidationError(f"input vertex {v} (input {k + 1}) has degree {deg[v]}, expected 1")
            if v in self.deltas:
                raise ValidationError(f"input vertex {v} cannot be a δ vertex")
        for d in self.deltas:
            dims = {e.dim for e in self.adjacency[d]}
            if len(dims) > 1:
                raise ValidationError(f"δ vertex {d} has legs of unequal dimension {sorted(dims)}")
        if self.vertices and not self._connected():
            raise ValidationError("analysis graph is not connected")

    @cached_property
    def adjacency(self) -> dict[int, list[GEdge]]:
        adj: dict[int, list[GEdge]] = {v: [] for v in self.vertices}
        for e in self.edges:
            adj[e.u].append(e)
            adj[e.v].append(e)
        return adj

    @cached_property
    def degree(self) -> dict[int, int]:
        return {v: len(es) for v, es in self.adjacency.items()}

    @cached_property
    def edge_map(self) -> dict[int, GEdge]:
        return {e.id: e for e in self.edges}

    @property
    def n_inputs(self) -> int:
        return len(self.inputs)

    def group_of(self, e: GEdge) -> tuple[str, int]:
        if e.u in self.deltas:
            return ("delta", e.u)
        if e.v in self.deltas:
            return ("delta", e.v)
        return ("edge", e.id)

    def groups(self) -> dict[tuple[str, int], list[GEdge]]:
        out: dict[tuple[str, int], list[GEdge]] = {}
        for e in self.edges:
            out.setdefault(self.group_of(e), []).append(e)
        return out

    def with_dims(self, dims: Mapping[int, int]) -> "AnalysisGraph":
        """Same connectivity with edge dimensions replaced via ``dims[edge_id]``."""
        edges = tuple(GEdge(e.id, e.u, e.v, int(dims[e.id])) for e in self.edges)
        return AnalysisGraph(self.vertices, edges, self.inputs, self.deltas, self.labels)

    def _connected(self) -> bool:
        return len(reachable(self, [self.vertices[0]])) == len(self.vertices)


@dataclass(frozen=True)
class InputPartition:
    """Partition ``(A, B)`` of the inputs ``1..n``, stored with ``1 ∈ A``."""

    A: tuple[int, ...]
    B: tuple[int, ...]

    def __post_init__(self):
        a = tuple(sorted(int(x) for x in self.A))
        b = tuple(sorted(int(x) for x in self.B))
        n = len(a) + len(b)
        if sorted(a + b) != list(range(1, n + 1)):
            raise ValidationError(f"A={a}, B={b} is not a partition of 1..{n}")
        if not a or not b:
            raise ValidationError("both sides of an input partition must be non-empty")
        if 1 not in a:
            a, b = b, a
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)

    @property
    def n(self) -> int:
        return len(self.A) + len(self.B)

    @classmethod
    def from_side(cls, side: Iterable[int], n: int) -> "InputPartition":
        side = sorted(set(int(x) for x in side))
        if any(not 1 <= x <= n for x in side):
            raise ValidationError(f"partition indices must lie in 1..{n}, got {side}")
        return cls(tuple(side), tuple(k for k in range(1, n + 1) if k not in side))

    @property
    def mask(self) -> str:
        """Bitstring over inputs 1..n, '1' marking members of ``A``."""
        members = set(self.A)
        return "".join("1" if k in members else "0" for k in range(1, self.n + 1))

    @property
    def balanced(self) -> bool:
        return len(self.A) == len(self.B)


def left_right_partition(n: int) -> InputPartition:
    return InputPartition.from_side(range(1, n // 2 + 1), n)


def interleaved_partition(n: int) -> InputPartition:
    return InputPartition.from_side(range(1, n + 1, 2), n)


def segment_partition(n: int, xi: int) -> InputPartition:
    """Alternating contiguous segments of length ``xi``, the first one in ``A``."""
    if not 1 <= xi <= n // 2:
        raise ValidationError(f"segment length must lie in 1..{n // 2}, got {xi}")
    return InputPartition.from_side([k for k in range(1, n + 1) if ((k - 1) // xi) % 2 == 0], n)


def morton_coordinates(index: int, levels: int) -> tuple[int, int]:
    """(row, col) of the 0-based leaf ``index`` in a 2x2-pooling quad-tree of ``levels`` levels.

    Each base-4 digit of ``index``, most significant first, picks the
    quadrant (row bit, col bit) at successively finer levels.
    """
    row = col = 0
    for lvl in range(levels):
        digit = (index >> (2 * (levels - 1 - lvl))) & 3
        row = 2 * row + (digit >> 1)
        col = 2 * col + (digit & 1)
    return row, col


def checkerboard_partition(n: int) -> InputPartition:
    """Checkerboard split of a ``2^L x 2^L`` image whose pixels are in quad-tree leaf order."""
    levels = 0
    while 4**levels < n:
        levels += 1
    if 4**levels != n:
        raise ValidationError(f"checkerboard needs n to be a power of 4, got {n}")
    side = [k + 1 for k in range(n) if sum(morton_coordinates(k, levels)) % 2 == 0]
    return InputPartition.from_side(side, n)


def class_edge_of(tn: TensorNetwork) -> int:
    """Id of the open edge carrying the class index (the one attached to node ``G``)."""
    g_nodes = {n.id for n in tn.nodes if n.label == "G"}
    found = [
        e.id for e in tn.edges if e.is_open and any(end.node in g_nodes for end in e.legs)
    ]
    if len(found) != 1:
        raise ValidationError(f"expected exactly one class edge, found {len(found)}")
    return found[0]


def to_analysis_graph(tn: TensorNetwork, class_edge: int | None = None) -> AnalysisGraph:
    """Drop the class edge and terminate each input edge in a fresh degree-1 vertex.

    Input ``i`` is the ``i``-th remaining open edge in ``open_order``. Vertex
    ids of tensor nodes are kept; virtual input vertices get fresh ids.
    """
    problems = validate(tn)
    if problems:
        raise ValidationError("invalid tensor network: " + "; ".join(problems))
    if class_edge is None:
        class_edge = class_edge_of(tn)
    elif class_edge not in tn.open_order:
        raise ValidationError(f"class edge {class_edge} is not an open edge")
    next_id = max(n.id for n in tn.nodes) + 1
    labels = {n.id: n.label or str(n.id) for n in tn.nodes}
    vertices = [n.id for n in tn.nodes]
    inputs = []
    by_id = {e.id: e for e in tn.edges}
    virtual: dict[int, int] = {}
    for eid in tn.open_order:
        if eid == class_edge:
            continue
        virtual[eid] = next_id
        vertices.append(next_id)
        inputs.append(next_id)
        labels[next_id] = f"in{len(inputs)}"
        next_id += 1
    edges = []
    for e in tn.edges:
        if e.id == class_edge:
            continue
        ends = [end.node for end in e.legs]
        if e.is_open:
            ends.append(virtual[e.id])
        edges.append(GEdge(e.id, ends[0], ends[1], e.dim))
    deltas = frozenset(n.id for n in tn.nodes if n.is_delta)
    return AnalysisGraph(tuple(vertices), tuple(edges), tuple(inputs), deltas, labels)


def check_separating(g: AnalysisGraph, cut_edges: Iterable[int], p: InputPartition) -> None:
    """Raise unless removing ``cut_edges`` disconnects the ``A`` inputs from the ``B`` inputs."""
    if p.n != g.n_inputs:
        raise ValidationError(f"partition is over {p.n} inputs, graph has {g.n_inputs}")
    removed = set(cut_edges)
    unknown = removed - set(g.edge_map)
    if unknown:
        raise ValidationError(f"unknown edge ids in cut: {sorted(unknown)}")
    side = reachable(g, [g.inputs[a - 1] for a in p.A], removed)
    hit = [b for b in p.B if g.inputs[b - 1] in side]
    if hit:
        raise ValidationError(f"edge set does not separate the partition (inputs {hit} still reachable from A)")


def reachable(g: AnalysisGraph, sources: Sequence[int], removed: set[int] = frozenset()) -> set[int]:
    seen = set(sources)
    stack = list(sources)
    while stack:
        x = stack.pop()
        for e in g.adjacency[x]:
            if e.id in removed:
                continue
            y = e.other(x)
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return seen


def cut_weight(g: AnalysisGraph, cut_edges: Iterable[int], p: InputPartition | None = None) -> int:
    """Product of the bond dimensions of all edges in the cut (exact)."""
    cut_edges = list(cut_edges)
    if p is not None:
        check_separating(g, cut_edges, p)
    return math.prod(g.edge_map[i].dim for i in set(cut_edges))


def modified_cut_weight(g: AnalysisGraph, cut_edges: Iterable[int], p: InputPartition | None = None) -> int:
    """Like :func:`cut_weight`, but each δ group present in the cut counts once."""
    cut_edges = list(cut_edges)
    if p is not None:
        check_separating(g, cut_edges, p)
    dims: dict[tuple[str, int], int] = {}
    for i in set(cut_edges):
        e = g.edge_map[i]
        dims[g.group_of(e)] = e.dim
    return math.prod(dims.values())
