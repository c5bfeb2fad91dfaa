import numpy as np
import pytest

from hetvec.graph import GraphBuilder, NodeRef, NodeType


def ref(token: str) -> NodeRef:
    return NodeRef.from_token(token)


def graph_from_edges(edges):
    """Build a graph from an iterable of (token, token) pairs."""
    b = GraphBuilder()
    for a, c in edges:
        b.add_edge(ref(a), ref(c))
    return b.finalize()


@pytest.fixture
def chain_graph():
    # r1 - p1 - a1 - p2 - r2
    return graph_from_edges(
        [("s:p1", "r:r1"), ("a:a1", "s:p1"), ("a:a1", "s:p2"), ("s:p2", "r:r2")]
    )


@pytest.fixture
def star_graph():
    return graph_from_edges([("s:p1", "r:r1"), ("s:p2", "r:r1"), ("s:p3", "r:r1")])


def random_legal_graph(rng: np.random.Generator, n_authors=8, n_subs=12, n_comments=6, n_reddits=3):
    """Random schema-legal graph; every submission gets a subreddit."""
    edges = []
    for i in range(n_subs):
        edges.append((f"s:p{i}", f"r:r{rng.integers(n_reddits)}"))
        edges.append((f"a:a{rng.integers(n_authors)}", f"s:p{i}"))
    for i in range(n_comments):
        edges.append((f"a:a{rng.integers(n_authors)}", f"c:c{i}"))
        edges.append((f"c:c{i}", f"s:p{rng.integers(n_subs)}"))
    extra = rng.integers(0, n_subs, size=max(1, n_subs // 2))
    for i, s in enumerate(extra):
        edges.append((f"a:a{rng.integers(n_authors)}", f"s:p{s}"))
    return graph_from_edges(edges)
