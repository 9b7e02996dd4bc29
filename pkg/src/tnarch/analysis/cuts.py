"""Minimal multiplicative cuts, the power-rounding lower bound and closed forms.

Multiplicative cut weights become additive after taking logs, so a minimal
cut is found as a max-flow with capacities ``ln(dim)``. The flow only locates
the cut; the reported weight is always recomputed as an exact integer
product over the recovered edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..convac import DEEP, SHALLOW, ConvACSpec
from ..errors import TnarchError, ValidationError
from .flow import INF, FlowNetwork
from .graph import AnalysisGraph, InputPartition, cut_weight, modified_cut_weight

FLOW = "flow"
EXHAUSTIVE = "exhaustive"
CLOSED_FORM = "closed_form"

# Exhaustive search enumerates 2**k vertex subsets; refuse beyond this k.
MAX_EXHAUSTIVE_VERTICES = 24


@dataclass(frozen=True)
class CutReport:
    weight: int
    log_weight: float
    cut_edges: frozenset[int]
    side_A: frozenset[int]
    method: str
    modified: bool = False
    extra: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        out = {
            "weight": str(self.weight),
            "log_weight": self.log_weight,
            "cut_edges": sorted(self.cut_edges),
            "method": self.method,
        }
        out.update(self.extra)
        return out


def _log_weight(weight: int) -> float:
    return math.log(weight) if weight > 0 else -INF


def _terminals(g: AnalysisGraph, p: InputPartition) -> tuple[list[int], list[int]]:
    if p.n != g.n_inputs:
        raise ValidationError(f"partition is over {p.n} inputs, graph has {g.n_inputs}")
    return [g.inputs[a - 1] for a in p.A], [g.inputs[b - 1] for b in p.B]


def _boundary(g: AnalysisGraph, side: set[int]) -> frozenset[int]:
    return frozenset(e.id for e in g.edges if (e.u in side) != (e.v in side))


def _check_flow(flow: float, weight: int, what: str) -> None:
    # Distinct integer weights below ~1e12 differ by far more than this in log space.
    if abs(flow - _log_weight(weight)) > 1e-9 * max(1.0, flow):
        raise TnarchError(
            f"{what}: recovered cut weight {weight} (ln {math.log(weight):.12g}) "
            f"disagrees with max-flow {flow:.12g}"
        )


def min_cut(g: AnalysisGraph, p: InputPartition, method: str = FLOW) -> CutReport:
    """Minimal plain cut weight ``min_C prod_{e in C} dim(e)`` separating ``A`` from ``B``."""
    src, snk = _terminals(g, p)
    if method == EXHAUSTIVE:
        return exhaustive_min_cut(g, p, modified=False)
    if method != FLOW:
        raise ValidationError(f"unknown min-cut method {method!r}")
    index = {v: k for k, v in enumerate(g.vertices)}
    s, t = len(index), len(index) + 1
    net = FlowNetwork(len(index) + 2)
    for e in g.edges:
        net.add_edge(index[e.u], index[e.v], math.log(e.dim))
    for v in src:
        net.add_arc(s, index[v], INF)
    for v in snk:
        net.add_arc(index[v], t, INF)
    flow = net.max_flow(s, t)
    reach = net.source_side(s)
    side = {v for v in g.vertices if index[v] in reach}
    cut = _boundary(g, side)
    weight = cut_weight(g, cut)
    _check_flow(flow, weight, "min_cut")
    return CutReport(weight, _log_weight(weight), cut, frozenset(side), FLOW)


def modified_min_cut(g: AnalysisGraph, p: InputPartition, method: str = FLOW) -> CutReport:
    """Minimal cut weight where a δ group contributes its dimension once, however many of its edges are cut.

    Flow construction: each δ vertex is split into ``in -> out`` with
    capacity ``ln(dim)`` and its edges become unbounded, so removing the
    vertex is the only way through it. Cutting any non-empty part of a δ
    group already costs the full group dimension, and removing the whole
    vertex separates at least as much, so vertex cuts lose nothing.
    """
    src, snk = _terminals(g, p)
    if method == EXHAUSTIVE:
        return exhaustive_min_cut(g, p, modified=True)
    if method != FLOW:
        raise ValidationError(f"unknown min-cut method {method!r}")
    index: dict[int, int] = {}
    out_index: dict[int, int] = {}
    for v in g.vertices:
        index[v] = len(index) + len(out_index)
        if v in g.deltas:
            out_index[v] = index[v] + 1
    size = len(index) + len(out_index)
    s, t = size, size + 1
    net = FlowNetwork(size + 2)
    for d in g.deltas:
        dim = g.adjacency[d][0].dim if g.adjacency[d] else 1
        net.add_arc(index[d], out_index[d], math.log(dim))
    for e in g.edges:
        if e.u in g.deltas or e.v in g.deltas:
            d, u = (e.u, e.v) if e.u in g.deltas else (e.v, e.u)
            net.add_arc(index[u], index[d], INF)
            net.add_arc(out_index[d], index[u], INF)
        else:
            net.add_edge(index[e.u], index[e.v], math.log(e.dim))
    for v in src:
        net.add_arc(s, index[v], INF)
    for v in snk:
        net.add_arc(index[v], t, INF)
    flow = net.max_flow(s, t)
    reach = net.source_side(s)
    side = {v for v in g.vertices if (out_index[v] if v in g.deltas else index[v]) in reach}
    cut = _boundary(g, side)
    weight = modified_cut_weight(g, cut)
    _check_flow(flow, weight, "modified_min_cut")
    return CutReport(weight, _log_weight(weight), cut, frozenset(side), FLOW, modified=True)


def exhaustive_min_cut(g: AnalysisGraph, p: InputPartition, modified: bool = False) -> CutReport:
    """Brute force over every placement of the non-input vertices on the ``A`` or ``B`` side.

    Any separating edge set contains the boundary of the region it leaves
    attached to ``A``, and both weights only grow with more edges, so the
    minimum over vertex placements equals the minimum over all separating
    edge sets.
    """
    src, snk = _terminals(g, p)
    free = [v for v in g.vertices if v not in set(g.inputs)]
    if len(free) > MAX_EXHAUSTIVE_VERTICES:
        raise ValidationError(
            f"exhaustive cut search over {len(free)} free vertices exceeds the limit of {MAX_EXHAUSTIVE_VERTICES}"
        )
    weigh = modified_cut_weight if modified else cut_weight
    best = None
    for bits in range(1 << len(free)):
        side = set(src)
        side.update(v for k, v in enumerate(free) if bits >> k & 1)
        cut = _boundary(g, side)
        w = weigh(g, cut)
        if best is None or w < best[0]:
            best = (w, cut, frozenset(side))
    weight, cut, side = best
    return CutReport(weight, _log_weight(weight), cut, side, EXHAUSTIVE, modified=modified)


def power_floor(value: int, base: int) -> int:
    """Largest ``base**k <= value`` (``k >= 0``)."""
    if value < 1:
        raise ValidationError("dimension must be >= 1")
    out = 1
    while out * base <= value:
        out *= base
    return out


def rounded_graph(g: AnalysisGraph, base: int) -> AnalysisGraph:
    """``g`` with every bond dimension rounded down to a power of ``base``."""
    return g.with_dims({e.id: power_floor(e.dim, base) for e in g.edges})


def power_rounding_bounds(g: AnalysisGraph, p: InputPartition) -> dict[int, int]:
    """Per-base minimal cut of the power-rounded graph, for every base 2..max dimension."""
    top = max((e.dim for e in g.edges), default=1)
    seen: dict[tuple[int, ...], int] = {}
    out = {}
    for base in range(2, top + 1):
        dims = tuple(power_floor(e.dim, base) for e in g.edges)
        if dims not in seen:
            rounded = g.with_dims({e.id: d for e, d in zip(g.edges, dims)})
            seen[dims] = modified_min_cut(rounded, p).weight
        out[base] = seen[dims]
    return out


def rank_lower_bound(g: AnalysisGraph, p: InputPartition) -> int:
    """``max_p min_C W^p_C``: generic rank lower bound from power-of-``p`` rounded dimensions.

    Returns 1 when every dimension is 1.
    """
    bounds = power_rounding_bounds(g, p)
    return max(bounds.values(), default=1)


LEFT_RIGHT = "left_right"
INTERLEAVED = "interleaved"
SHALLOW_FORM = "shallow"


def closed_form(spec: ConvACSpec, kind: str, partition: InputPartition | None = None) -> int:
    """Closed-form minimal cut weights for the standard partitions.

    ``left_right``: deep size-2 pooling, halves ``{1..N/2} | {N/2+1..N}``:
    ``min(r_{L-1}, r_{L-2}, ..., r_l^(2^(L-2-l)), ..., r_0^(N/4), M^(N/2))``.

    ``interleaved``: deep network, ``min(r_0^(N/4), M^(N/2))``.

    ``shallow``: any partition of a shallow network with hidden width ``k``,
    ``min(M^min(|A|,|B|), k)``.
    """
    n, m, r = spec.n, spec.m, spec.channels
    if kind == LEFT_RIGHT:
        if spec.kind != DEEP or spec.pool != 2:
            raise ValidationError("the left-right closed form needs a deep network with size-2 pooling")
        L = spec.depth
        terms = [r[l] ** (2 ** max(L - 2 - l, 0)) for l in range(L)]
        terms.append(m ** (n // 2))
        return min(terms)
    if kind == INTERLEAVED:
        if spec.kind != DEEP or n % 4:
            raise ValidationError("the interleaved closed form needs a deep network with 4 | N")
        return min(r[0] ** (n // 4), m ** (n // 2))
    if kind == SHALLOW_FORM:
        if spec.kind != SHALLOW:
            raise ValidationError("the shallow closed form needs a shallow network")
        if partition is None:
            raise ValidationError("the shallow closed form needs a partition")
        return min(m ** min(len(partition.A), len(partition.B)), r[0])
    raise ValidationError(f"unknown closed form {kind!r}")


def closed_form_report(spec: ConvACSpec, kind: str, partition: InputPartition | None = None) -> CutReport:
    w = closed_form(spec, kind, partition)
    return CutReport(w, _log_weight(w), frozenset(), frozenset(), CLOSED_FORM)


def ceil_log2(x: int) -> int:
    if x < 1:
        raise ValidationError("ceil_log2 needs x >= 1")
    return (x - 1).bit_length()


def bounding_layers(spec: ConvACSpec, xi: int) -> list[str]:
    """Channel counts that can appear in a minimal cut for segments of length ``xi``."""
    if spec.kind != DEEP:
        raise ValidationError("bounding layers are defined for deep networks")
    if not 1 <= xi <= spec.n // 2:
        raise ValidationError(f"xi must lie in 1..{spec.n // 2}, got {xi}")
    top = min(ceil_log2(xi), spec.depth - 1)
    return ["M"] + [f"r_{l}" for l in range(top + 1)]

