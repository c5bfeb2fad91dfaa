"""Typed multigraph over authors, submissions, comments, and subreddits.

Nodes carry one of four types; only schema-legal edge kinds exist
(author-submission, author-comment, comment-submission, submission-subreddit).
Edges are stored undirected and duplicate-free. After ``finalize`` the graph
is immutable and safe to share across threads.
"""

from __future__ import annotations

import json
import struct
import warnings
from collections import Counter
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import NotFoundError, ParseError, SchemaError


class NodeType(IntEnum):
    AUTHOR = 0
    SUBMISSION = 1
    COMMENT = 2
    SUBREDDIT = 3


TYPE_TAGS = {
    NodeType.AUTHOR: "a",
    NodeType.SUBMISSION: "s",
    NodeType.COMMENT: "c",
    NodeType.SUBREDDIT: "r",
}
TAG_TYPES = {v: k for k, v in TYPE_TAGS.items()}

_TYPE_ALIASES = {
    "a": NodeType.AUTHOR,
    "author": NodeType.AUTHOR,
    "s": NodeType.SUBMISSION,
    "submission": NodeType.SUBMISSION,
    "c": NodeType.COMMENT,
    "comment": NodeType.COMMENT,
    "r": NodeType.SUBREDDIT,
    "subreddit": NodeType.SUBREDDIT,
}

# undirected legal edge kinds
LEGAL_EDGES = frozenset(
    {
        frozenset({NodeType.AUTHOR, NodeType.SUBMISSION}),
        frozenset({NodeType.AUTHOR, NodeType.COMMENT}),
        frozenset({NodeType.COMMENT, NodeType.SUBMISSION}),
        frozenset({NodeType.SUBMISSION, NodeType.SUBREDDIT}),
    }
)

DELETED_AUTHOR = "[deleted]"


def parse_node_type(s: str) -> NodeType:
    try:
        return _TYPE_ALIASES[s.strip().lower()]
    except KeyError:
        raise ParseError(f"unknown node type {s!r}") from None


@dataclass(frozen=True, order=True)
class NodeRef:
    """A typed node identified by (type, name)."""

    type: NodeType
    name: str

    def token(self) -> str:
        return f"{TYPE_TAGS[self.type]}:{self.name}"

    @classmethod
    def from_token(cls, token: str) -> "NodeRef":
        tag, sep, name = token.partition(":")
        if not sep or tag not in TAG_TYPES or not name:
            raise ParseError(f"malformed typed token {token!r}")
        return cls(TAG_TYPES[tag], name)


def _check_name(name: str) -> str:
    if not name or any(ch.isspace() for ch in name):
        raise ParseError(f"node name must be non-empty with no whitespace: {name!r}")
    return name


@dataclass(frozen=True)
class DegreeStats:
    mean: float
    std_dev: float
    histogram: dict


class HetGraph:
    """Immutable typed graph with per-type sorted adjacency (CSR per type)."""

    def __init__(self, names, types, csr, edge_count):
        self._names = names  # id -> name
        self._types = types  # uint8 array, id -> NodeType value
        self._csr = csr  # NodeType -> (indptr int64, indices int32)
        self._index = {(NodeType(t), n): i for i, (t, n) in enumerate(zip(types, names))}
        self.edge_count = int(edge_count)
        self._types.setflags(write=False)
        for indptr, indices in csr.values():
            indptr.setflags(write=False)
            indices.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self._names)

    def __contains__(self, ref: NodeRef) -> bool:
        return (ref.type, ref.name) in self._index

    def id_of(self, ref: NodeRef) -> int:
        try:
            return self._index[(ref.type, ref.name)]
        except KeyError:
            raise NotFoundError(f"node {ref.token()} not in graph") from None

    def ref_of(self, node_id: int) -> NodeRef:
        return NodeRef(NodeType(self._types[node_id]), self._names[node_id])

    def type_of(self, node_id: int) -> NodeType:
        return NodeType(self._types[node_id])

    def name_of(self, node_id: int) -> str:
        return self._names[node_id]

    def token_of(self, node_id: int) -> str:
        return f"{TYPE_TAGS[NodeType(self._types[node_id])]}:{self._names[node_id]}"

    def nodes_of_type(self, t: NodeType) -> np.ndarray:
        return np.nonzero(self._types == int(t))[0]

    def neighbor_ids(self, node_id: int, t: NodeType) -> np.ndarray:
        indptr, indices = self._csr[t]
        return indices[indptr[node_id] : indptr[node_id + 1]]

    def all_neighbor_ids(self, node_id: int) -> np.ndarray:
        parts = [self.neighbor_ids(node_id, t) for t in NodeType]
        return np.sort(np.concatenate(parts))

    def degree(self, node_id: int) -> int:
        return sum(
            int(ip[node_id + 1] - ip[node_id]) for ip, _ in self._csr.values()
        )


class GraphBuilder:
    """Single-writer accumulator; ``finalize`` yields the immutable graph.

    Temporary ids are first-seen order; finalize remaps them to the
    canonical (type, name) sort so the result is independent of record order.
    """

    def __init__(self):
        self._index: dict[tuple[NodeType, str], int] = {}
        self._nodes: list[tuple[NodeType, str]] = []
        self._edges: list[tuple[int, int]] = []

    def add_node(self, ref: NodeRef) -> int:
        key = (ref.type, _check_name(ref.name))
        nid = self._index.get(key)
        if nid is None:
            nid = len(self._nodes)
            self._index[key] = nid
            self._nodes.append(key)
        return nid

    def add_edge(self, a: NodeRef, b: NodeRef, lineno: int | None = None) -> None:
        if frozenset({a.type, b.type}) not in LEGAL_EDGES:
            loc = f" (record {lineno})" if lineno is not None else ""
            raise SchemaError(
                f"illegal edge {a.token()} -- {b.token()}{loc}: "
                f"{a.type.name.lower()}-{b.type.name.lower()} is not in the schema"
            )
        self._edges.append((self.add_node(a), self.add_node(b)))

    def finalize(self) -> HetGraph:
        order = sorted(range(len(self._nodes)), key=lambda i: self._nodes[i])
        remap = np.empty(len(self._nodes), dtype=np.int64)
        for new_id, old_id in enumerate(order):
            remap[old_id] = new_id
        names = [self._nodes[i][1] for i in order]
        types = np.array([int(self._nodes[i][0]) for i in order], dtype=np.uint8)

        n = len(names)
        if self._edges:
            e = np.array(self._edges, dtype=np.int64)
            e = remap[e]
            e = np.sort(e, axis=1)  # canonical endpoint order for dedupe
            e = np.unique(e, axis=0)
            # drop accidental self loops (schema makes them illegal anyway)
            e = e[e[:, 0] != e[:, 1]]
            src = np.concatenate([e[:, 0], e[:, 1]])
            dst = np.concatenate([e[:, 1], e[:, 0]])
            edge_count = len(e)
        else:
            src = np.empty(0, dtype=np.int64)
            dst = np.empty(0, dtype=np.int64)
            edge_count = 0

        csr = {}
        dst_types = types[dst] if len(dst) else np.empty(0, dtype=np.uint8)
        for t in NodeType:
            mask = dst_types == int(t)
            s, d = src[mask], dst[mask]
            order_td = np.lexsort((d, s))
            s, d = s[order_td], d[order_td]
            counts = np.bincount(s, minlength=n) if n else np.zeros(0, dtype=np.int64)
            indptr = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(counts, out=indptr[1:])
            csr[t] = (indptr, d.astype(np.int32))
        return HetGraph(names, types, csr, edge_count)


def read_records(path: str | Path) -> Iterator[dict]:
    """Yield JSON records from a line-delimited UTF-8 file."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {lineno}: invalid record: {exc}") from None
            if not isinstance(rec, dict):
                raise ParseError(f"line {lineno}: record must be an object")
            yield rec


def build_graph(records: Iterable[dict | str]) -> HetGraph:
    """Build a graph from edge or node records.

    Edge form: {"src", "src_type", "dst", "dst_type"}; node form:
    {"node", "node_type"}. Unseen endpoints are auto-created; duplicate
    edges collapse to one. Submission-form records (see
    ``ingest_submission_records``) are expanded inline.
    """
    builder = GraphBuilder()
    for lineno, rec in enumerate(records, start=1):
        if isinstance(rec, str):
            try:
                rec = json.loads(rec)
            except json.JSONDecodeError as exc:
                raise ParseError(f"record {lineno}: invalid JSON: {exc}") from None
        if "src" in rec:
            try:
                a = NodeRef(parse_node_type(rec["src_type"]), rec["src"])
                b = NodeRef(parse_node_type(rec["dst_type"]), rec["dst"])
            except KeyError as exc:
                raise ParseError(f"record {lineno}: missing field {exc}") from None
            builder.add_edge(a, b, lineno)
        elif "node" in rec:
            try:
                builder.add_node(NodeRef(parse_node_type(rec["node_type"]), rec["node"]))
            except KeyError as exc:
                raise ParseError(f"record {lineno}: missing field {exc}") from None
        elif "id" in rec:
            ing = ingest_submission_records([rec])
            if ing.skipped:
                warnings.warn(f"record {lineno}: skipped malformed submission record")
            for edge in ing.edges:
                a = NodeRef(parse_node_type(edge["src_type"]), edge["src"])
                b = NodeRef(parse_node_type(edge["dst_type"]), edge["dst"])
                builder.add_edge(a, b, lineno)
        else:
            raise ParseError(f"record {lineno}: not an edge, node, or submission record")
    return builder.finalize()


@dataclass(frozen=True)
class DocRecord:
    """Text payload of a submission, keyed for the document store."""

    id: str
    author: str
    subreddit: str
    text: str


@dataclass
class IngestResult:
    edges: list = field(default_factory=list)
    documents: list = field(default_factory=list)
    skipped: int = 0


def ingest_submission_records(records: Iterable[dict]) -> IngestResult:
    """Expand submission-style records into edge records plus document payloads.

    A submission record {"id", "author", "subreddit", "text"?} yields
    author-submission and submission-subreddit edges; a comment record
    {"id", "author", "parent"} yields author-comment and comment-submission
    edges. Records with a missing required field or a deleted author are
    skipped and counted. Extra keys (timestamps etc.) are ignored.
    """
    out = IngestResult()

    def edge(src: NodeRef, dst: NodeRef):
        out.edges.append(
            {
                "src": src.name,
                "src_type": TYPE_TAGS[src.type],
                "dst": dst.name,
                "dst_type": TYPE_TAGS[dst.type],
            }
        )

    for rec in records:
        rid = rec.get("id")
        author = rec.get("author")
        if not rid or not author or author == DELETED_AUTHOR:
            out.skipped += 1
            continue
        parent = rec.get("parent")
        if parent:
            edge(NodeRef(NodeType.AUTHOR, author), NodeRef(NodeType.COMMENT, rid))
            edge(NodeRef(NodeType.COMMENT, rid), NodeRef(NodeType.SUBMISSION, parent))
        else:
            subreddit = rec.get("subreddit")
            if not subreddit:
                out.skipped += 1
                continue
            edge(NodeRef(NodeType.AUTHOR, author), NodeRef(NodeType.SUBMISSION, rid))
            edge(NodeRef(NodeType.SUBMISSION, rid), NodeRef(NodeType.SUBREDDIT, subreddit))
            if rec.get("text") is not None:
                out.documents.append(DocRecord(rid, author, subreddit, str(rec["text"])))
    return out


def neighbors(graph: HetGraph, node: NodeRef, t: NodeType) -> list[NodeRef]:
    """Type-t neighbors of ``node``, sorted by node id; empty if none."""
    nid = graph.id_of(node)
    return [graph.ref_of(int(i)) for i in graph.neighbor_ids(nid, t)]


def project_author_degrees(graph: HetGraph) -> DegreeStats:
    """Degree stats of the one-mode author projection.

    Two authors are tied iff they touched a common submission, either
    directly or through comments on it.
    """
    authors = graph.nodes_of_type(NodeType.AUTHOR)
    peers: dict[int, set] = {int(a): set() for a in authors}
    for s in graph.nodes_of_type(NodeType.SUBMISSION):
        touched = set(int(a) for a in graph.neighbor_ids(s, NodeType.AUTHOR))
        for c in graph.neighbor_ids(s, NodeType.COMMENT):
            touched.update(int(a) for a in graph.neighbor_ids(int(c), NodeType.AUTHOR))
        for a in touched:
            peers[a].update(touched)
    degrees = [len(peers[int(a)] - {int(a)}) for a in authors]
    if not degrees:
        return DegreeStats(0.0, 0.0, {})
    arr = np.array(degrees, dtype=np.float64)
    hist = dict(sorted(Counter(degrees).items()))
    return DegreeStats(float(arr.mean()), float(arr.std()), hist)


def subgraph(graph: HetGraph, keep: Iterable[NodeRef]) -> HetGraph:
    """Induced subgraph on ``keep``; edges survive iff both endpoints do."""
    keep_ids = {graph.id_of(r) for r in keep}
    builder = GraphBuilder()
    for nid in sorted(keep_ids):
        builder.add_node(graph.ref_of(nid))
        for other in graph.all_neighbor_ids(nid):
            if int(other) in keep_ids and int(other) > nid:
                builder.add_edge(graph.ref_of(nid), graph.ref_of(int(other)))
    return builder.finalize()


_SNAP_MAGIC = b"HVGS"
_SNAP_VERSION = 1


def save_snapshot(graph: HetGraph, path: str | Path) -> None:
    """Write a versioned binary snapshot (lossless round trip)."""
    names_blob = json.dumps(graph._names, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_SNAP_MAGIC)
        fh.write(struct.pack("<HqqQ", _SNAP_VERSION, graph.n_nodes, graph.edge_count, len(names_blob)))
        fh.write(names_blob)
        fh.write(graph._types.tobytes())
        for t in NodeType:
            indptr, indices = graph._csr[t]
            fh.write(struct.pack("<q", len(indices)))
            fh.write(indptr.tobytes())
            fh.write(indices.tobytes())


def load_snapshot(path: str | Path) -> HetGraph:
    with open(path, "rb") as fh:
        if fh.read(4) != _SNAP_MAGIC:
            raise ParseError(f"{path}: not a graph snapshot")
        version, n_nodes, edge_count, blob_len = struct.unpack("<HqqQ", fh.read(26))
        if version != _SNAP_VERSION:
            raise ParseError(f"{path}: unsupported snapshot version {version}")
        names = json.loads(fh.read(blob_len).decode("utf-8"))
        types = np.frombuffer(fh.read(n_nodes), dtype=np.uint8).copy()
        csr = {}
        for t in NodeType:
            (n_idx,) = struct.unpack("<q", fh.read(8))
            indptr = np.frombuffer(fh.read(8 * (n_nodes + 1)), dtype=np.int64).copy()
            indices = np.frombuffer(fh.read(4 * n_idx), dtype=np.int32).copy()
            csr[t] = (indptr, indices)
    return HetGraph(names, types, csr, edge_count)
