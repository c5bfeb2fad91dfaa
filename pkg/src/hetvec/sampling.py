"""Forest Fire subgraph sampling and metapath-biased random-walk corpora.

Walks are streamed to disk as lines of typed tokens rather than held in
memory. Walk generation is embarrassingly parallel over start nodes; each
start node owns an independent RNG stream derived from (seed, node id), so
the merged multi-worker corpus is byte-identical to a single-worker run.
"""

from __future__ import annotations

import random
import resource
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigError, NotFoundError, ParseError, SchemaError
from .graph import LEGAL_EDGES, HetGraph, NodeRef, NodeType, parse_node_type
from .util import derive_seed


@dataclass(frozen=True)
class ForestFireConfig:
    burn_prob: float
    target_size: int
    seed_nodes: tuple
    max_restarts: int = 0
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.burn_prob <= 1.0:
            raise ConfigError(f"burn_prob must be in [0,1], got {self.burn_prob}")
        if self.max_restarts < 0:
            raise ConfigError("max_restarts must be >= 0")
        if self.target_size < len(set(self.seed_nodes)):
            raise ConfigError("target_size must be >= number of distinct seed nodes")


def forest_fire_sample(graph: HetGraph, cfg: ForestFireConfig) -> set:
    """Burn a node set of size <= target_size starting from the seeds.

    Each unburned neighbor of the last-burned frontier is burned
    independently with ``burn_prob``. An empty frontier restarts from a
    uniformly chosen already-burned node, up to ``max_restarts`` times.
    With burn_prob = 1 the burn order equals breadth-first search over
    the seeds, so the result is the BFS ball truncated at target_size.
    """
    target = cfg.target_size
    if target > graph.n_nodes:
        warnings.warn(
            f"target_size {target} exceeds node count {graph.n_nodes}; capped"
        )
        target = graph.n_nodes
    rng = random.Random(derive_seed(cfg.rng_seed, "forest-fire"))

    burn_order: list[int] = []
    burned: set[int] = set()
    for ref in cfg.seed_nodes:
        nid = graph.id_of(ref)  # raises NotFoundError for unknown seeds
        if nid not in burned:
            burned.add(nid)
            burn_order.append(nid)
    burn_order = burn_order[:target]
    burned = set(burn_order)

    frontier = list(burn_order)
    restarts = 0
    while len(burned) < target:
        next_frontier: list[int] = []
        for v in frontier:
            for u in graph.all_neighbor_ids(v):
                u = int(u)
                if u in burned:
                    continue
                if rng.random() < cfg.burn_prob:
                    burned.add(u)
                    burn_order.append(u)
                    next_frontier.append(u)
                    if len(burned) >= target:
                        return {graph.ref_of(i) for i in burned}
        frontier = next_frontier
        if not frontier:
            if restarts >= cfg.max_restarts:
                break
            restarts += 1
            frontier = [burn_order[rng.randrange(len(burn_order))]]
    return {graph.ref_of(i) for i in burned}


@dataclass(frozen=True)
class MetapathSchema:
    """Cyclic node-type sequence constraining a walk; first type == last."""

    sequence: tuple

    def __post_init__(self):
        seq = self.sequence
        if len(seq) < 2:
            raise ConfigError("metapath must have length >= 2")
        if seq[0] != seq[-1]:
            raise ConfigError("metapath must start and end on the same node type")
        for a, b in zip(seq, seq[1:]):
            if frozenset({a, b}) not in LEGAL_EDGES:
                raise SchemaError(
                    f"metapath step {a.name.lower()}-{b.name.lower()} is not a legal edge"
                )

    @classmethod
    def parse(cls, text: str) -> "MetapathSchema":
        parts = [p for p in text.replace(" ", "").split(",") if p]
        if not parts:
            raise ParseError(f"empty metapath {text!r}")
        return cls(tuple(parse_node_type(p) for p in parts))

    @property
    def cycle(self) -> tuple:
        """Type cycle driving the walk: the schema minus its repeated endpoint."""
        return self.sequence[:-1]

    def type_at(self, position: int) -> NodeType:
        cyc = self.cycle
        return cyc[position % len(cyc)]


@dataclass(frozen=True)
class WalkConfig:
    walks_per_start: int = 1000
    walk_length: int = 100
    min_emit_length: int = 2
    rng_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.walks_per_start < 1:
            raise ConfigError("walks_per_start must be >= 1")
        if self.walk_length < 2:
            raise ConfigError("walk_length must be >= 2")
        if self.min_emit_length < 2:
            raise ConfigError("min_emit_length must be >= 2")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


@dataclass(frozen=True)
class WalkCorpus:
    """Disk-backed walk corpus: one walk per line, space-joined typed tokens."""

    path: Path
    line_count: int


@dataclass
class WalkStats:
    emitted: int = 0
    truncated: int = 0
    dropped: int = 0
    steps: int = 0
    corpus: WalkCorpus | None = None


def next_node(graph: HetGraph, current: NodeRef, required: NodeType, rng) -> NodeRef | None:
    """Uniform random type-``required`` neighbor of ``current``; None at a dead end."""
    nid = graph.id_of(current)
    nbrs = graph.neighbor_ids(nid, required)
    if len(nbrs) == 0:
        return None
    return graph.ref_of(int(nbrs[rng.randrange(len(nbrs))]))


def _walks_for_start(graph, schema, cfg, start_id, tokens):
    """All walk lines for one start node, plus (truncated, dropped, steps)."""
    rng = random.Random(derive_seed(cfg.rng_seed, "walk", start_id))
    cyc = schema.cycle
    n_cyc = len(cyc)
    lines = []
    truncated = dropped = steps = 0
    for _ in range(cfg.walks_per_start):
        walk = [start_id]
        cur = start_id
        for pos in range(1, cfg.walk_length):
            nbrs = graph.neighbor_ids(cur, cyc[pos % n_cyc])
            k = len(nbrs)
            if k == 0:
                break
            cur = int(nbrs[rng.randrange(k)])
            walk.append(cur)
        steps += len(walk) - 1
        if len(walk) < cfg.min_emit_length:
            dropped += 1
            continue
        if len(walk) < cfg.walk_length:
            truncated += 1
        lines.append(" ".join(tokens[i] for i in walk))
    return lines, truncated, dropped, steps


def metapath_walks(
    graph: HetGraph, schema: MetapathSchema, cfg: WalkConfig, sink: str | Path
) -> WalkStats:
    """Emit walks for every node of the schema's first type to ``sink``.

    Each walk follows the cyclic schema (the shared endpoint token serves
    as both last and first slot) until walk_length tokens or a dead end;
    walks shorter than min_emit_length are dropped.
    """
    starts = [int(i) for i in graph.nodes_of_type(schema.sequence[0])]
    tokens = [graph.token_of(i) for i in range(graph.n_nodes)]
    stats = WalkStats()
    sink = Path(sink)

    def run_chunk(chunk):
        out = []
        t = d = s = 0
        for start_id in chunk:
            lines, ti, di, si = _walks_for_start(graph, schema, cfg, start_id, tokens)
            out.append("".join(line + "\n" for line in lines))
            t, d, s = t + ti, d + di, s + si
        return "".join(out), t, d, s

    workers = min(cfg.workers, max(1, len(starts)))
    if workers == 1:
        chunks = [starts]
    else:
        # contiguous chunks merged in order reproduce the single-worker file
        size = (len(starts) + workers - 1) // workers
        chunks = [starts[i : i + size] for i in range(0, len(starts), size)]
    with open(sink, "w", encoding="utf-8", newline="\n") as fh:
        if workers == 1:
            results = [run_chunk(chunks[0])]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run_chunk, chunks))
        for text, t, d, s in results:
            fh.write(text)
            stats.emitted += text.count("\n")
            stats.truncated += t
            stats.dropped += d
            stats.steps += s
    stats.corpus = WalkCorpus(sink, stats.emitted)
    return stats


_COMPLEXITY_NOTES = (
    "walk sampling: O(starts * walks_per_start * walk_length) steps; "
    "O(1) per step once adjacency is grouped by type",
    "walk + skip-gram embedding: O(starts * walks * walk_length "
    "+ sampled_nodes * negatives * iterations)",
    "stochastic block model (alternative): O(V * ln(V)^2)",
    "hierarchical block model (alternative): O(V * ln(V)^2 * avg_blocks^2 "
    "* hierarchy_levels); requires the full graph in RAM",
)


@dataclass
class WalkBenchmark:
    steps: int
    seconds: float
    steps_per_sec: float
    peak_rss_kb: int
    notes: tuple = _COMPLEXITY_NOTES

    def report(self) -> str:
        lines = [
            f"steps {self.steps}",
            f"seconds {self.seconds:.6f}",
            f"steps_per_sec {self.steps_per_sec:.1f}",
            f"peak_rss_kb {self.peak_rss_kb}",
        ]
        lines += [f"# {note}" for note in self.notes]
        return "\n".join(lines) + "\n"


def benchmark_walks(graph: HetGraph, schema: MetapathSchema, cfg: WalkConfig) -> WalkBenchmark:
    """Timed walk run (no corpus written); reports stepping throughput and peak RSS."""
    starts = [int(i) for i in graph.nodes_of_type(schema.sequence[0])]
    cyc = schema.cycle
    n_cyc = len(cyc)
    steps = 0
    t0 = time.perf_counter()
    for start_id in starts:
        rng = random.Random(derive_seed(cfg.rng_seed, "walk", start_id))
        for _ in range(cfg.walks_per_start):
            cur = start_id
            for pos in range(1, cfg.walk_length):
                nbrs = graph.neighbor_ids(cur, cyc[pos % n_cyc])
                k = len(nbrs)
                if k == 0:
                    break
                cur = int(nbrs[rng.randrange(k)])
                steps += 1
    elapsed = time.perf_counter() - t0
    rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    rate = steps / elapsed if elapsed > 0 and steps else 0.0
    return WalkBenchmark(steps, elapsed, rate, rss)


def validate_corpus(corpus: str | Path, graph: HetGraph, schema: MetapathSchema) -> tuple[int, int]:
    """Count (type violations, non-edge transitions) across a whole corpus."""
    cyc = schema.cycle
    n_cyc = len(cyc)
    type_violations = 0
    bad_edges = 0
    with open(corpus, "r", encoding="utf-8") as fh:
        for line in fh:
            toks = line.split()
            ids = []
            types = []
            for pos, tok in enumerate(toks):
                ref = NodeRef.from_token(tok)
                if ref.type != cyc[pos % n_cyc]:
                    type_violations += 1
                ids.append(graph.id_of(ref))
                types.append(ref.type)
            for a, b, tb in zip(ids, ids[1:], types[1:]):
                nbrs = graph.neighbor_ids(a, tb)  # sorted by id
                j = np.searchsorted(nbrs, b)
                if j >= len(nbrs) or nbrs[j] != b:
                    bad_edges += 1
    return type_violations, bad_edges
