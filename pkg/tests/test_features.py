import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetvec.docembed import DocConfig, TaggedDocument, train_dbow, train_dmm
from hetvec.errors import ConfigError, NotFoundError
from hetvec.features import (
    FeatureRow,
    SimilarityProfile,
    assemble_features,
    author_target_similarity,
    build_feature_table,
    cosine,
    graph_target_similarity,
    nearest_neighbors,
    pearson_matrix,
    read_feature_csv,
    read_profile_csv,
    write_feature_csv,
    write_profile_csv,
)
from hetvec.graph import NodeType
from hetvec.sgns import EmbeddingMatrix, Vocab


class TestCosine:
    def test_orthogonal(self):
        assert cosine([1, 0], [0, 1]) == 0.0

    def test_positive_scaling(self):
        assert cosine([1, 2], [2, 4]) == pytest.approx(1.0)

    def test_hand_value(self):
        assert cosine([3, 4], [4, 3]) == pytest.approx(24 / 25)

    def test_zero_vector_flagged(self):
        with pytest.warns(RuntimeWarning, match="zero vector"):
            assert cosine([0, 0], [1, 2]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ConfigError):
            cosine([1, 2], [1, 2, 3])

    vectors = st.lists(
        st.floats(min_value=-10, max_value=10, allow_nan=False), min_size=2, max_size=6
    )

    @given(vectors, vectors, st.floats(min_value=0.1, max_value=9.0))
    @settings(max_examples=100, deadline=None)
    def test_properties(self, a, b, lam):
        n = min(len(a), len(b))
        a, b = np.array(a[:n]), np.array(b[:n])
        if not a.any() or not b.any():
            return
        c = cosine(a, b)
        assert abs(c) <= 1 + 1e-12
        assert c == pytest.approx(cosine(b, a))
        assert cosine(a, lam * b) == pytest.approx(c, abs=1e-9)


def toy_embedding():
    tokens = ["r:r1", "r:r2", "a:a1", "a:a2"]
    types = [NodeType.SUBREDDIT, NodeType.SUBREDDIT, NodeType.AUTHOR, NodeType.AUTHOR]
    vocab = Vocab(tokens, np.array([4, 3, 2, 1]), types)
    vecs = np.array([[1.0, 0.0], [1.0, 0.1], [0.0, 1.0], [1.0, 0.0]])
    return EmbeddingMatrix(vecs, np.zeros_like(vecs)), vocab


class TestNearestNeighbors:
    def test_k_capped(self):
        emb, vocab = toy_embedding()
        small = Vocab(["a:x", "a:y"], np.array([1, 1]), [NodeType.AUTHOR] * 2)
        e = EmbeddingMatrix(np.array([[1.0, 0.0], [0.5, 0.5]]), np.zeros((2, 2)))
        got = nearest_neighbors(e, small, "a:x", k=5)
        assert len(got) == 1

    def test_duplicate_vector_first_with_similarity_one(self):
        emb, vocab = toy_embedding()
        got = nearest_neighbors(emb, vocab, "r:r1", k=4)
        assert got[0][0] == "a:a2" and got[0][1] == pytest.approx(1.0)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        n = 60
        tokens = [f"a:t{i}" for i in range(n)]
        vocab = Vocab(tokens, np.ones(n, dtype=np.int64), [NodeType.AUTHOR] * n)
        emb = EmbeddingMatrix(rng.normal(size=(n, 8)), np.zeros((n, 8)))
        for q in tokens[:10]:
            got = nearest_neighbors(emb, vocab, q, k=7)
            qv = emb.input_vectors[vocab.id_of(q)]
            sims = []
            for i, t in enumerate(tokens):
                if t == q:
                    continue
                v = emb.input_vectors[i]
                sims.append((-(qv @ v / (np.linalg.norm(qv) * np.linalg.norm(v))), i, t))
            sims.sort()
            expected = [(t, -s) for s, _, t in sims[:7]]
            assert [t for t, _ in got] == [t for t, _ in expected]
            for (_, s1), (_, s2) in zip(got, expected):
                assert s1 == pytest.approx(s2)

    def test_type_filter(self):
        emb, vocab = toy_embedding()
        got = nearest_neighbors(emb, vocab, "r:r1", k=4, type_filter=NodeType.SUBREDDIT)
        assert [t for t, _ in got] == ["r:r2"]

    def test_unknown_query(self):
        emb, vocab = toy_embedding()
        with pytest.raises(NotFoundError):
            nearest_neighbors(emb, vocab, "r:nope", k=3)


@pytest.fixture(scope="module")
def doc_models():
    rng = np.random.default_rng(0)
    docs = []
    for i in range(60):
        topic = i % 2
        toks = tuple(f"t{topic}_w{k}" for k in rng.integers(0, 15, 10))
        docs.append(TaggedDocument(toks, (f"d:{i}", f"a:auth{i % 6}", f"r:sub{topic}")))
    cfg = DocConfig(dimension=12, window=4, negatives=4, min_count=1, epochs=25, rng_seed=5)
    return train_dbow(docs, cfg), train_dmm(docs, cfg), docs


class TestAuthorTargetSimilarity:
    def test_single_doc_zero_std(self, doc_models):
        dbow, dmm, docs = doc_models
        prof = author_target_similarity(
            dbow, dmm, "auth0", [list(docs[0].tokens)], "r:sub0", seed=2, infer_epochs=5
        )
        assert prof.n_submissions == 1
        assert prof.dbow_std == 0.0 and prof.dmm_std == 0.0

    def test_hand_mean_std(self):
        sims = np.array([0.2, 0.4, 0.6])
        assert sims.mean() == pytest.approx(0.4)
        assert sims.std() == pytest.approx(0.16329931618554522, abs=1e-12)

    def test_order_invariance(self, doc_models):
        dbow, dmm, docs = doc_models
        lists = [list(docs[0].tokens), list(docs[2].tokens), list(docs[4].tokens)]
        p1 = author_target_similarity(dbow, dmm, "a", lists, "r:sub0", seed=3, infer_epochs=5)
        p2 = author_target_similarity(
            dbow, dmm, "a", lists[::-1], "r:sub0", seed=3, infer_epochs=5
        )
        assert p1.dbow_mean == pytest.approx(p2.dbow_mean)
        assert p1.dmm_mean == pytest.approx(p2.dmm_mean)
        assert p1.dbow_std == pytest.approx(p2.dbow_std)

    def test_all_docs_empty_excluded(self, doc_models):
        dbow, dmm, _ = doc_models
        assert author_target_similarity(dbow, dmm, "a", [[], []], "r:sub0") is None

    def test_population_std_matches_hand_computation(self, doc_models):
        dbow, dmm, docs = doc_models
        lists = [list(docs[i].tokens) for i in (0, 2, 4)]
        prof = author_target_similarity(dbow, dmm, "a", lists, "r:sub0", seed=7, infer_epochs=5)
        from hetvec.docembed import infer_vector
        from hetvec.util import derive_seed

        sims = []
        for toks in lists:
            v = infer_vector(dbow, toks, 5, rng_seed=derive_seed(7, "dbow", tuple(toks)))
            sims.append(cosine(v, dbow.tag_vector("r:sub0")))
        sims = np.array(sims)
        assert prof.dbow_mean == pytest.approx(sims.mean(), abs=1e-12)
        assert prof.dbow_std == pytest.approx(sims.std(), abs=1e-12)


def brute_force_pearson(x, y):
    """Textbook formula, written independently of numpy.corrcoef."""
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    num = sum((a - mx) * (b - my) for a, b in zip(x, y))
    dx = sum((a - mx) ** 2 for a in x) ** 0.5
    dy = sum((b - my) ** 2 for b in y) ** 0.5
    return num / (dx * dy)


class TestPearson:
    def test_exact_linearity(self):
        names, mat = pearson_matrix({"x": [1, 2, 3], "y": [2, 4, 6]})
        assert mat[names.index("x"), names.index("y")] == pytest.approx(1.0)

    def test_anticorrelation(self):
        names, mat = pearson_matrix({"x": [1, 2, 3], "y": [3, 2, 1]})
        assert mat[names.index("x"), names.index("y")] == pytest.approx(-1.0)

    def test_against_textbook_oracle(self):
        rng = np.random.default_rng(9)
        cols = {f"c{i}": rng.normal(size=40).tolist() for i in range(5)}
        names, mat = pearson_matrix(cols, derive_doc_mean=False)
        for i, a in enumerate(names):
            for j, b in enumerate(names):
                expected = 1.0 if i == j else brute_force_pearson(cols[a], cols[b])
                assert abs(mat[i, j] - expected) < 1e-12
        assert np.abs(mat - mat.T).max() < 1e-12

    def test_derived_mean_column(self):
        rng = np.random.default_rng(1)
        cols = {
            "graph_sim": rng.normal(size=20),
            "dbow_mean": rng.normal(size=20),
            "dmm_mean": rng.normal(size=20),
        }
        names, mat = pearson_matrix(cols)
        assert "d2v_mean" in names
        derived = (cols["dbow_mean"] + cols["dmm_mean"]) / 2
        expected = brute_force_pearson(cols["graph_sim"].tolist(), derived.tolist())
        assert mat[names.index("graph_sim"), names.index("d2v_mean")] == pytest.approx(expected)

    def test_constant_column_error(self):
        with pytest.raises(ConfigError, match="flat"):
            pearson_matrix({"flat": [1.0, 1.0, 1.0], "y": [1, 2, 3]})

    def test_affine_invariance(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=30)
        y = rng.normal(size=30)
        _, m1 = pearson_matrix({"x": x, "y": y})
        _, m2 = pearson_matrix({"x": 3.0 * x + 5.0, "y": y})
        assert m1[0, 1] == pytest.approx(m2[0, 1], abs=1e-12)


class TestAssembleFeatures:
    profile = SimilarityProfile("a1", 0.5, 0.1, 0.4, 0.2, 3)

    def test_graph_only_length(self):
        vec = np.arange(128.0)
        row = assemble_features("a1", vec, None, "graph_only", 1)
        assert len(row.values) == 128 and row.label == 1

    def test_text_only_length(self):
        row = assemble_features("a1", None, self.profile, "text_only", 0)
        assert row.values.tolist() == [0.5, 0.4]

    def test_integrated_order(self):
        vec = np.array([1.0, 2.0, 3.0, 4.0])
        row = assemble_features("a1", vec, self.profile, "integrated", 1)
        assert len(row.values) == 6
        assert row.values[:4].tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_stds_flag(self):
        row = assemble_features("a1", None, self.profile, "text_only", 0, use_stds=True)
        assert row.values.tolist() == [0.5, 0.4, 0.1, 0.2]

    def test_missing_graph_embedding_drops(self):
        assert assemble_features("a1", None, self.profile, "graph_only", 1) is None
        rows, dropped = build_feature_table(
            ["a1", "a2"],
            {"a1": 1, "a2": 0},
            {"a1": np.ones(4)},
            {"a1": self.profile, "a2": self.profile},
            "integrated",
        )
        assert len(rows) == 1 and dropped == 1


class TestCsv:
    def test_feature_round_trip(self, tmp_path):
        rows = [
            FeatureRow("a1", "integrated", np.array([1.5, -0.25]), 1),
            FeatureRow("a2", "integrated", np.array([0.0, 3.25]), 0),
        ]
        path = tmp_path / "f.csv"
        write_feature_csv(rows, path)
        got = read_feature_csv(path)
        assert [r.author for r in got] == ["a1", "a2"]
        assert got[0].values.tolist() == [1.5, -0.25]
        assert [r.label for r in got] == [1, 0]
        header = path.read_text().splitlines()[0].split(",")
        assert header[0] == "author" and header[-1] == "label"

    def test_profile_round_trip(self, tmp_path):
        profs = [SimilarityProfile("a1", 0.5, 0.1, 0.4, 0.2, 3)]
        path = tmp_path / "p.csv"
        write_profile_csv(profs, path)
        got = read_profile_csv(path)
        assert got["a1"] == profs[0]


def test_graph_target_similarity():
    emb, vocab = toy_embedding()
    assert graph_target_similarity(emb, vocab, "a:a2", "r:r1") == pytest.approx(1.0)
