"""Rank-versus-min-cut simulation, balanced partition enumeration and the architecture advisor."""

from __future__ import annotations

import csv
import io
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .analysis import (
    AnalysisGraph,
    InputPartition,
    bounding_layers,
    ceil_log2,
    closed_form,
    interleaved_partition,
    left_right_partition,
    min_cut,
    modified_min_cut,
    segment_partition,
    rank_lower_bound,
    to_analysis_graph,
    LEFT_RIGHT,
)
from .convac import DEEP, ConvACSpec, build_tn, precise_weights_tensor, random_weights
from .errors import BoundViolation, ValidationError
from .tensors import IndexPartition, auto_tolerance, matricize, numerical_rank, svd_spectrum

CSV_HEADER = [
    "arrangement_id",
    "channels",
    "partition_id",
    "partition_mask",
    "rank",
    "mincut",
    "lower_bound",
    "ratio",
    "deviated",
]
ENUMERATION_CAP = 28
DEFAULT_DIMS = (2, 3, 5, 7, 11, 13)


# ---------------------------------------------------------------------------
# Balanced partitions. Canonical form puts input 1 in A, so a balanced
# partition of n inputs is fixed by the other n/2 - 1 members of A, drawn
# from {2..n}; ids are lexicographic ranks of those combinations.


def n_balanced_partitions(n: int) -> int:
    if n < 2 or n % 2:
        raise ValidationError(f"balanced partitions need an even n >= 2, got {n}")
    return math.comb(n - 1, n // 2 - 1)


def partition_from_id(n: int, idx: int) -> InputPartition:
    total = n_balanced_partitions(n)
    if not 0 <= idx < total:
        raise ValidationError(f"partition id {idx} outside 0..{total - 1}")
    k = n // 2 - 1
    chosen = []
    start = 2
    for slot in range(k, 0, -1):
        for cand in range(start, n + 1):
            below = math.comb(n - cand, slot - 1)
            if idx < below:
                chosen.append(cand)
                start = cand + 1
                break
            idx -= below
    return InputPartition.from_side([1] + chosen, n)


def partition_id(p: InputPartition) -> int:
    n = p.n
    if not p.balanced:
        raise ValidationError("partition ids are defined for balanced partitions only")
    rest = list(p.A[1:])
    idx = 0
    start = 2
    slot = len(rest)
    for member in rest:
        for cand in range(start, member):
            idx += math.comb(n - cand, slot - 1)
        start = member + 1
        slot -= 1
    return idx


def enumerate_balanced_partitions(n: int) -> list[InputPartition]:
    """Every balanced partition of ``1..n`` with ``1 ∈ A``, in lexicographic order of ``A``."""
    n_balanced_partitions(n)
    if n > ENUMERATION_CAP:
        raise ValidationError(
            f"n={n} exceeds the enumeration cap of {ENUMERATION_CAP}; use sampled partitions instead"
        )
    return [
        InputPartition.from_side((1,) + rest, n)
        for rest in itertools.combinations(range(2, n + 1), n // 2 - 1)
    ]


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def sample_ids(total: int, count: int | None, *key: int) -> list[int]:
    """``count`` distinct ids from ``range(total)`` (all of them when ``count`` is None), sorted."""
    if count is None or count >= total:
        return list(range(total))
    if count < 1:
        raise ValidationError("sample count must be >= 1")
    return sorted(int(i) for i in _rng(*key).choice(total, size=count, replace=False))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulationConfig:
    n: int = 16
    m: int = 2
    dim_pool: tuple[int, ...] = DEFAULT_DIMS
    arrangements: int | None = None
    partitions: int | None = None
    master_seed: int = 0
    weight_seeds_per_config: int = 1
    rank_tol: float | None = None
    workers: int = 1
    repeat_dims: bool = False

    def __post_init__(self):
        object.__setattr__(self, "dim_pool", tuple(int(d) for d in self.dim_pool))
        if self.n < 2 or self.n & (self.n - 1):
            raise ValidationError(f"n must be a power of 2, got {self.n}")
        if self.m < 1:
            raise ValidationError("m must be >= 1")
        if not self.dim_pool or any(d < 2 for d in self.dim_pool):
            raise ValidationError("dim_pool entries must all be >= 2")
        if not self.repeat_dims and len(set(self.dim_pool)) < self.depth:
            raise ValidationError(
                f"need at least {self.depth} distinct dimensions for arrangements without repetition"
            )
        for name in ("arrangements", "partitions"):
            val = getattr(self, name)
            if val is not None and val < 1:
                raise ValidationError(f"{name} sample count must be >= 1")
        if self.weight_seeds_per_config < 1 or self.workers < 1:
            raise ValidationError("weight_seeds_per_config and workers must be >= 1")
        if self.rank_tol is not None and self.rank_tol <= 0:
            raise ValidationError("rank_tol must be positive")
        if self.master_seed < 0:
            raise ValidationError("master_seed must be non-negative")

    @property
    def depth(self) -> int:
        return self.n.bit_length() - 1

    def all_arrangements(self) -> list[tuple[int, ...]]:
        pool = sorted(set(self.dim_pool))
        if self.repeat_dims:
            return list(itertools.product(pool, repeat=self.depth))
        return list(itertools.permutations(pool, self.depth))

    def arrangement_ids(self) -> list[int]:
        return sample_ids(len(self.all_arrangements()), self.arrangements, self.master_seed, 1)

    def partition_ids(self) -> list[int]:
        return sample_ids(n_balanced_partitions(self.n), self.partitions, self.master_seed, 2)


@dataclass(frozen=True)
class SimulationRecord:
    arrangement_id: int
    channels: tuple[int, ...]
    partition_id: int
    partition_mask: str
    weight_seed: int
    rank: int
    mincut: int
    lower_bound: int

    @property
    def ratio(self) -> float:
        return self.rank / self.mincut

    @property
    def deviated(self) -> bool:
        return self.rank < self.mincut

    def csv_row(self) -> list[str]:
        return [
            str(self.arrangement_id),
            ";".join(str(c) for c in self.channels),
            str(self.partition_id),
            self.partition_mask,
            str(self.rank),
            str(self.mincut),
            str(self.lower_bound),
            repr(self.ratio),
            "true" if self.deviated else "false",
        ]

    def to_json(self) -> dict:
        out = asdict(self)
        out["channels"] = list(self.channels)
        out["mincut"] = str(self.mincut)
        out["lower_bound"] = str(self.lower_bound)
        out["ratio"] = self.ratio
        out["deviated"] = self.deviated
        return out


@dataclass
class SimulationReport:
    config: SimulationConfig
    records: list[SimulationRecord]
    runtime_s: float = 0.0
    summary: dict = field(default_factory=dict)

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in self.records:
            writer.writerow(rec.csv_row())

    def csv_text(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def summarize(records: Sequence[SimulationRecord], runtime_s: float) -> dict:
    deviations = [r for r in records if r.deviated]
    ratios = [r.ratio for r in records]
    lb_exceeds = [r for r in records if r.lower_bound > r.rank]
    return {
        "records": len(records),
        "deviations": len(deviations),
        "deviation_fraction": len(deviations) / len(records) if records else 0.0,
        "min_ratio": min(ratios) if ratios else 1.0,
        "max_deviation": 1.0 - min(ratios) if ratios else 0.0,
        "max_rank_gap": max((r.mincut - r.rank for r in records), default=0),
        "lower_bound_above_rank": len(lb_exceeds),
        "lower_bound_above_rank_fraction": len(lb_exceeds) / len(records) if records else 0.0,
        "runtime_s": runtime_s,
    }


def weight_seed(master_seed: int, arrangement_id: int, index: int) -> int:
    """Per-configuration weight seed, derived from ids so execution order never matters."""
    return int(np.random.SeedSequence([master_seed, 3, arrangement_id, index]).generate_state(1, np.uint64)[0])


def _graph_for(spec: ConvACSpec) -> AnalysisGraph:
    return to_analysis_graph(build_tn(spec, random_weights(spec, 0)))


def _run_arrangement(cfg: SimulationConfig, arrangement_id: int, channels: tuple[int, ...],
                     partition_ids: Sequence[int]) -> list[SimulationRecord]:
    spec = ConvACSpec(cfg.n, cfg.m, channels)
    graph = _graph_for(spec)
    parts = [partition_from_id(cfg.n, pid) for pid in partition_ids]
    cuts = [min_cut(graph, p).weight for p in parts]
    lower = [rank_lower_bound(graph, p) for p in parts]
    out = []
    for s in range(cfg.weight_seeds_per_config):
        tensor = precise_weights_tensor(spec, random_weights(spec, weight_seed(cfg.master_seed, arrangement_id, s)))
        for pid, p, cut, lb in zip(partition_ids, parts, cuts, lower):
            mat = matricize(tensor, IndexPartition(p.A, p.B))
            tol = auto_tolerance(mat.shape) if cfg.rank_tol is None else cfg.rank_tol
            rank = numerical_rank(svd_spectrum(mat), tol)
            if rank > cut:
                raise BoundViolation(
                    f"rank {rank} exceeds min-cut {cut} for channels {channels}, partition {p.mask}, "
                    f"weight seed index {s}"
                )
            out.append(SimulationRecord(arrangement_id, channels, pid, p.mask, s, rank, cut, lb))
    return out


def run_simulation(cfg: SimulationConfig) -> SimulationReport:
    """Measure matricization rank against the min-cut bound over arrangements x partitions x weight draws.

    Every record's weights come from ``(master_seed, arrangement_id,
    weight index)``, so sequential and parallel runs produce identical
    records. Raises :class:`BoundViolation` if any rank exceeds its min-cut.
    """
    start = time.perf_counter()
    arrangements = cfg.all_arrangements()
    arr_ids = cfg.arrangement_ids()
    part_ids = cfg.partition_ids()
    jobs = [(cfg, a, arrangements[a], part_ids) for a in arr_ids]
    if cfg.workers == 1:
        chunks = [_run_arrangement(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            chunks = list(ex.map(_run_arrangement, *zip(*jobs)))
    records = sorted(
        (r for chunk in chunks for r in chunk),
        key=lambda r: (r.arrangement_id, r.partition_id, r.weight_seed),
    )
    runtime = time.perf_counter() - start
    return SimulationReport(cfg, records, runtime, summarize(records, runtime))


# ---------------------------------------------------------------------------


@dataclass
class Advice:
    feature_size: int
    critical_layer: int
    bounding_layers: list[str]
    layer_notes: list[str]
    table: list[dict]

    def to_json(self) -> dict:
        return asdict(self)


def _edge_symbol(g: AnalysisGraph, edge_id: int) -> str:
    e = g.edge_map[edge_id]
    if e.u in g.inputs or e.v in g.inputs:
        return "M"
    d = e.u if e.u in g.deltas else e.v
    label = (g.labels or {}).get(d, "")
    if label.startswith("delta("):
        return f"r_{label[6:].split(',')[0]}"
    return f"edge{edge_id}"


def advise(spec: ConvACSpec, xi: int) -> Advice:
    """Which layers' channel counts limit correlations across segments of length ``xi``."""
    if spec.kind != DEEP or spec.pool != 2:
        raise ValidationError("the advisor handles deep networks with size-2 pooling")
    if not 1 <= xi <= spec.n // 2:
        raise ValidationError(f"feature size must lie in 1..{spec.n // 2}, got {xi}")
    graph = _graph_for(spec)
    critical = min(ceil_log2(xi), spec.depth - 1)
    rows = []
    for name, part, form in (
        ("left_right", left_right_partition(spec.n), LEFT_RIGHT),
        # the interleaved closed form describes the 2-D quad-tree, not this 1-D tree
        ("interleaved", interleaved_partition(spec.n), None),
        (f"segments_xi={xi}", segment_partition(spec.n, xi), None),
    ):
        cut = min_cut(graph, part)
        row = {
            "partition": name,
            "A": list(part.A),
            "mincut": str(cut.weight),
            "modified_mincut": str(modified_min_cut(graph, part).weight),
            "lower_bound": str(rank_lower_bound(graph, part)),
            "cut_channels": sorted({_edge_symbol(graph, e) for e in cut.cut_edges}),
        }
        if form is not None:
            row["closed_form"] = str(closed_form(spec, form))
        rows.append(row)
    notes = [f"M = {spec.m}: input edges; always a candidate cut"]
    for l, r in enumerate(spec.channels):
        if l <= critical:
            notes.append(f"r_{l} = {r}: can bound correlations across segments of length {xi}; keep it wide")
        else:
            notes.append(
                f"r_{l} = {r}: only enters cuts for segments longer than {2 ** (l - 1)}; "
                f"secondary for features of size {xi}"
            )
    return Advice(xi, critical, bounding_layers(spec, xi), notes, rows)
