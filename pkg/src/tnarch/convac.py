"""Convolutional arithmetic circuits (ConvACs) and their tensor-network form.

A ConvAC is a ConvNet with linear 1x1 convolutions and product pooling. Its
score for class ``y`` is the inner product between a weights tensor
``A^y`` (order N, dimension M per mode) and the rank-1 tensor built from the
per-patch representation vectors. The weights tensor is a CP decomposition
for the shallow network and a hierarchical (HT) decomposition for the deep
one, and both are expressed here as tensor networks with δ nodes playing
the role of same-channel product pooling.

Indexing: layers ``l`` and positions ``j`` are 0-based. Deep inputs are
ordered by depth-first leaf order of the pooling tree, so pooling window
``k`` of layer ``l`` covers positions ``k*pool .. k*pool + pool - 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError, check_size
from .network import Leg, Open, TEdge, TensorNetwork, attach_vectors, contract, delta_node, dense_node

SHALLOW = "shallow"
DEEP = "deep"


@dataclass(frozen=True)
class ConvACSpec:
    """Architecture of a ConvAC.

    ``channels`` is ``(r_0, ..., r_{L-1})`` for a deep network and ``(K,)``
    for a shallow one. ``pool`` is the pooling arity (2 for size-2 windows in
    1-D, 4 for 2x2 windows in 2-D).
    """

    n: int
    m: int
    channels: tuple[int, ...]
    classes: int = 1
    pool: int = 2
    kind: str = DEEP

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if self.kind not in (SHALLOW, DEEP):
            raise ValidationError(f"kind must be 'shallow' or 'deep', got {self.kind!r}")
        if self.n < 1 or self.m < 1 or self.classes < 1:
            raise ValidationError("n, m and classes must all be >= 1")
        if not self.channels or any(c < 1 for c in self.channels):
            raise ValidationError(f"channels must be non-empty and positive, got {self.channels}")
        if self.pool < 2:
            raise ValidationError(f"pool arity must be >= 2, got {self.pool}")
        if self.kind == SHALLOW:
            if len(self.channels) != 1:
                raise ValidationError("a shallow ConvAC has exactly one hidden width")
            if self.n < 2:
                raise ValidationError("a shallow ConvAC needs n >= 2")
        elif self.pool ** len(self.channels) != self.n:
            raise ValidationError(
                f"deep ConvAC needs n = pool**L; got n={self.n}, pool={self.pool}, L={len(self.channels)}"
            )

    @property
    def depth(self) -> int:
        return len(self.channels)

    def positions(self, layer: int) -> int:
        """Number of conv positions (and weight matrices) in ``layer``."""
        if self.kind == SHALLOW:
            return self.n
        return self.n // self.pool**layer

    def in_dim(self, layer: int) -> int:
        return self.m if layer == 0 else self.channels[layer - 1]

    def weight_shapes(self) -> dict[str, tuple[int, int]]:
        shapes = {}
        for l in range(self.depth):
            for j in range(self.positions(l)):
                shapes[f"A_{l}_{j}"] = (self.channels[l], self.in_dim(l))
        shapes["G"] = (self.classes, self.channels[-1])
        return shapes

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "channels": list(self.channels),
            "classes": self.classes,
            "pool": self.pool,
            "kind": self.kind,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "ConvACSpec":
        try:
            return cls(
                n=int(obj["n"]),
                m=int(obj["m"]),
                channels=tuple(int(c) for c in obj["channels"]),
                classes=int(obj.get("classes", 1)),
                pool=int(obj.get("pool", 2)),
                kind=str(obj.get("kind", DEEP)),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed ConvAC spec: {exc!r}") from exc


@dataclass(frozen=True)
class WeightSet:
    """Weight matrices ``A[(l, j)]`` of shape ``r_l x r_{l-1}`` (``r_{-1} = M``) and output ``G``."""

    A: Mapping[tuple[int, int], np.ndarray]
    G: np.ndarray

    def check(self, spec: ConvACSpec) -> None:
        shapes = spec.weight_shapes()
        got = {f"A_{l}_{j}": a.shape for (l, j), a in self.A.items()}
        got["G"] = self.G.shape
        if got != shapes:
            missing = sorted(set(shapes) - set(got))
            extra = sorted(set(got) - set(shapes))
            wrong = sorted(k for k in set(got) & set(shapes) if got[k] != shapes[k])
            raise ValidationError(
                f"weights do not match spec (missing {missing}, unexpected {extra}, wrong shape {wrong})"
            )
        for key, a in list(self.A.items()) + [("G", self.G)]:
            if not np.all(np.isfinite(a)):
                raise ValidationError(f"weight {key} has non-finite entries")

    def to_json(self) -> dict:
        out = {f"A_{l}_{j}": a.tolist() for (l, j), a in sorted(self.A.items())}
        out["G"] = self.G.tolist()
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "WeightSet":
        A = {}
        for key, val in obj.items():
            if key == "G":
                continue
            parts = key.split("_")
            if len(parts) != 3 or parts[0] != "A":
                raise ValidationError(f"unexpected weight key {key!r}")
            A[(int(parts[1]), int(parts[2]))] = np.asarray(val, dtype=np.float64)
        if "G" not in obj:
            raise ValidationError("weights JSON lacks 'G'")
        return cls(A, np.asarray(obj["G"], dtype=np.float64))


def _normal_block(seed: int, layer: int, pos: int, shape: tuple[int, int]) -> np.ndarray:
    # Philox is counter-based; one stream per (seed, layer, position), entries in row-major order.
    ss = np.random.SeedSequence([seed, layer, pos])
    return np.random.Generator(np.random.Philox(ss)).standard_normal(shape)


def random_weights(spec: ConvACSpec, seed: int) -> WeightSet:
    """I.i.d. standard normal weights, reproducible from ``(seed, layer, position)``.

    ``G`` is keyed as layer ``L``, position 0.
    """
    if seed < 0:
        raise ValidationError("seed must be non-negative")
    A = {}
    for l in range(spec.depth):
        for j in range(spec.positions(l)):
            A[(l, j)] = _normal_block(seed, l, j, (spec.channels[l], spec.in_dim(l)))
    G = _normal_block(seed, spec.depth, 0, (spec.classes, spec.channels[-1]))
    return WeightSet(A, G)


def build_tn(spec: ConvACSpec, w: WeightSet) -> TensorNetwork:
    return build_deep_tn(spec, w) if spec.kind == DEEP else build_shallow_tn(spec, w)


def build_shallow_tn(spec: ConvACSpec, w: WeightSet) -> TensorNetwork:
    """CP network: N matrices feeding one δ node of order N+1, topped by ``G``.

    Open edges 0..N-1 are the inputs (dimension M); open edge N is the class edge.
    """
    if spec.kind != SHALLOW:
        raise ValidationError("build_shallow_tn needs a shallow spec")
    w.check(spec)
    n, k = spec.n, spec.channels[0]
    delta_id, g_id = n, n + 1
    nodes = [dense_node(j, w.A[(0, j)], f"A(0,{j})") for j in range(n)]
    nodes.append(delta_node(delta_id, n + 1, k, "delta"))
    nodes.append(dense_node(g_id, w.G, "G"))
    edges = []
    for j in range(n):
        edges.append(TEdge(len(edges), (Leg(j, 1), Open(j)), spec.m))
    for j in range(n):
        edges.append(TEdge(len(edges), (Leg(j, 0), Leg(delta_id, j)), k))
    edges.append(TEdge(len(edges), (Leg(delta_id, n), Leg(g_id, 1)), k))
    edges.append(TEdge(len(edges), (Leg(g_id, 0), Open(n)), spec.classes))
    schedule = tuple(e.id for e in edges if not e.is_open)
    return TensorNetwork(tuple(nodes), tuple(edges), tuple(range(n)) + (len(edges) - 1,), schedule)


def build_deep_tn(spec: ConvACSpec, w: WeightSet) -> TensorNetwork:
    """HT network: a pooling tree of δ nodes with weight matrices between levels.

    Per layer ``l`` there are ``N / pool**l`` matrices ``A(l, j)`` and
    ``N / pool**(l+1)`` δ nodes of order ``pool + 1`` and dimension ``r_l``.
    Matrix legs are ``(0: output channel, 1: input channel)``; δ legs
    ``0..pool-1`` face the children and leg ``pool`` the parent. The attached
    schedule contracts the tree bottom-up, layer by layer.
    """
    if spec.kind != DEEP:
        raise ValidationError("build_deep_tn needs a deep spec")
    w.check(spec)
    n, pool = spec.n, spec.pool
    nodes = []
    edges: list[TEdge] = []
    next_id = 0

    def new_id() -> int:
        nonlocal next_id
        next_id += 1
        return next_id - 1

    below = []
    for j in range(n):
        nid = new_id()
        nodes.append(dense_node(nid, w.A[(0, j)], f"A(0,{j})"))
        below.append(nid)
    input_edges = []
    for j, nid in enumerate(below):
        edges.append(TEdge(len(edges), (Leg(nid, 1), Open(j)), spec.m))
        input_edges.append(len(edges) - 1)

    for l in range(spec.depth):
        r = spec.channels[l]
        deltas = []
        for k in range(len(below) // pool):
            did = new_id()
            nodes.append(delta_node(did, pool + 1, r, f"delta({l},{k})"))
            deltas.append(did)
        for pos, nid in enumerate(below):
            edges.append(TEdge(len(edges), (Leg(nid, 0), Leg(deltas[pos // pool], pos % pool)), r))
        above = []
        for k, did in enumerate(deltas):
            aid = new_id()
            if l + 1 < spec.depth:
                nodes.append(dense_node(aid, w.A[(l + 1, k)], f"A({l + 1},{k})"))
            else:
                nodes.append(dense_node(aid, w.G, "G"))
            edges.append(TEdge(len(edges), (Leg(did, pool), Leg(aid, 1)), r))
            above.append(aid)
        below = above
    (g_id,) = below
    edges.append(TEdge(len(edges), (Leg(g_id, 0), Open(n)), spec.classes))
    class_edge = len(edges) - 1
    schedule = tuple(e.id for e in edges if not e.is_open)
    return TensorNetwork(tuple(nodes), tuple(edges), tuple(input_edges) + (class_edge,), schedule)


def _check_inputs(spec: ConvACSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.n, spec.m):
        raise ValidationError(f"inputs must have shape ({spec.n}, {spec.m}), got {x.shape}")
    return x


def forward(spec: ConvACSpec, w: WeightSet, x) -> np.ndarray:
    """Class scores by running the network: 1x1 conv, then product pooling, layer by layer."""
    w.check(spec)
    x = _check_inputs(spec, x)
    if spec.kind == SHALLOW:
        u = np.ones(spec.channels[0])
        for j in range(spec.n):
            u = u * (w.A[(0, j)] @ x[j])
        return w.G @ u
    v = list(x)
    for l in range(spec.depth):
        conv = [w.A[(l, j)] @ v[j] for j in range(len(v))]
        v = [np.prod(conv[k * spec.pool : (k + 1) * spec.pool], axis=0) for k in range(len(v) // spec.pool)]
    return w.G @ v[0]


def weights_tensor(spec: ConvACSpec, w: WeightSet, y: int = 0, cap: int | None = None,
                   dtype=np.float64) -> np.ndarray:
    """The order-N weights tensor ``A^y`` (class index ``y`` is 0-based), contracted in ``dtype``."""
    if not 0 <= y < spec.classes:
        raise ValidationError(f"class index {y} outside 0..{spec.classes - 1}")
    check_size([spec.m] * spec.n, "weights tensor", cap)
    tn = build_tn(spec, w)
    onehot = np.zeros(spec.classes)
    onehot[y] = 1.0
    return contract(attach_vectors(tn, {spec.n: onehot}), cap=cap, dtype=dtype)


def precise_weights_tensor(spec: ConvACSpec, w: WeightSet, y: int = 0, cap: int | None = None) -> np.ndarray:
    """Weights tensor contracted in extended precision, then rounded once to float64.

    Cancellation in a float64 contraction can leave noise well above
    ``eps * |A|``, which a rank threshold then counts as signal. Rounding
    once keeps the entrywise error at half an ulp.
    """
    return np.asarray(weights_tensor(spec, w, y, cap, dtype=np.longdouble), dtype=np.float64)


def tn_scores(spec: ConvACSpec, w: WeightSet, x, cap: int | None = None) -> np.ndarray:
    """Class scores by contracting the network with the input vectors attached."""
    x = _check_inputs(spec, x)
    tn = attach_vectors(build_tn(spec, w), {j: x[j] for j in range(spec.n)})
    return contract(tn, cap=cap)


def score_inner_product(a_y, x: Sequence) -> float:
    """Inner product of a weights tensor with the rank-1 tensor of the inputs."""
    t = np.asarray(a_y, dtype=np.float64)
    x = [np.asarray(v, dtype=np.float64) for v in x]
    if t.ndim != len(x) or any(t.shape[j] != v.shape[0] or v.ndim != 1 for j, v in enumerate(x)):
        raise ValidationError(
            f"tensor shape {t.shape} does not match input shapes {[v.shape for v in x]}"
        )
    for v in reversed(x):
        t = t @ v
    return float(t)


def load_spec(path: str) -> ConvACSpec:
    with open(path, encoding="utf-8") as fh:
        return ConvACSpec.from_json(json.load(fh))
