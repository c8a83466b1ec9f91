"""Topic graph construction and neighbourhood-overlap distances."""

import datetime

import numpy as np
import pytest

from topicdrift.corpus import CodeScheme, Corpus, EligibilityFilter
from topicdrift.topicgraph import (
    DistanceProvider,
    TopicGraph,
    build_citation,
    build_cociting,
    build_cooccurrence,
    build_graph,
    period_stability,
    strength_paper_count_check,
)

from conftest import make_paper, random_corpus

NO_FILTER = EligibilityFilter(min_papers=1)
SCHEME = CodeScheme()


def corpus_of(*papers):
    return Corpus.from_papers(papers, NO_FILTER)


# -- co-occurrence ---------------------------------------------------------


def test_cooccurrence_two_paper_example():
    corpus = corpus_of(
        make_paper("p1", "2000-01-01", ["a"], ["t1", "t2", "t3"]),
        make_paper("p2", "2000-02-01", ["a"], ["t1", "t2"]),
    )
    g = build_cooccurrence(corpus, SCHEME)
    assert g.weight("t1", "t2") == pytest.approx(0.5 + 1.0)
    assert g.weight("t1", "t3") == pytest.approx(0.5)
    assert g.strength("t1") == pytest.approx(2.0)


def test_single_topic_papers_contribute_nothing():
    corpus = corpus_of(
        make_paper("p1", "2000-01-01", ["a"], ["t1"]),
        make_paper("p2", "2000-02-01", ["a"], ["t2"]),
    )
    g = build_cooccurrence(corpus, SCHEME)
    assert g.nodes == {"t1", "t2"}
    assert g.strength("t1") == 0.0 and g.strength("t2") == 0.0


def test_duplicate_topic_keys_deduplicated():
    # both codes map to topic "t100" after separator stripping
    corpus = corpus_of(make_paper("p1", "2000-01-01", ["a"], ["t1.00", "t1-00", "t2"]))
    g = build_cooccurrence(corpus, SCHEME)
    assert g.weight("t100", "t2") == pytest.approx(1.0)


def test_strength_identity_on_random_corpora():
    for seed in range(20):
        corpus = random_corpus(seed)
        g = build_cooccurrence(corpus, SCHEME)
        for node, (strength, count) in strength_paper_count_check(corpus, SCHEME, g).items():
            assert strength == pytest.approx(count, abs=1e-9), node


# -- citation and co-citing ------------------------------------------------


def test_citation_single_ref_unit_weight():
    corpus = corpus_of(
        make_paper("p2", "1999-01-01", ["x"], ["b"]),
        make_paper("p1", "2000-01-01", ["a"], ["a1"], refs=["p2"]),
    )
    g = build_citation(corpus, SCHEME)
    assert g.directed
    assert g.weight("a1", "b") == pytest.approx(1.0)
    assert g.weight("b", "a1") == 0.0


def test_citation_weight_split_over_topics_and_refs():
    corpus = corpus_of(
        make_paper("p2", "1999-01-01", ["x"], ["c1"]),
        make_paper("p3", "1999-02-01", ["y"], []),
        make_paper("p1", "2000-01-01", ["a"], ["a1", "b1"], refs=["p2", "p3"]),
    )
    g = build_citation(corpus, SCHEME)
    # 2 topics on the citer, 2 refs, 1 topic on the cited paper
    assert g.weight("a1", "c1") == pytest.approx(0.25)
    assert g.weight("b1", "c1") == pytest.approx(0.25)


def test_citation_empty_without_refs():
    g = build_citation(corpus_of(make_paper("p1", "2000-01-01", ["a"], ["t"])), SCHEME)
    assert g.adj == {} or all(not v for v in g.adj.values())


def test_cociting_pairs():
    corpus = corpus_of(
        make_paper("q", "1998-01-01", ["w"], ["t"]),
        make_paper("r", "1998-02-01", ["w"], ["t"]),
        make_paper("p1", "2000-01-01", ["a"], ["a1"], refs=["q", "r"]),
        make_paper("p2", "2000-02-01", ["b"], ["b1"], refs=["q", "r"]),
    )
    g = build_cociting(corpus, SCHEME)
    # one contribution per shared cited paper
    assert g.weight("a1", "b1") == pytest.approx(2.0)


def test_cociting_single_citer_no_edges():
    corpus = corpus_of(
        make_paper("q", "1998-01-01", ["w"], ["t"]),
        make_paper("p1", "2000-01-01", ["a"], ["a1"], refs=["q"]),
    )
    g = build_cociting(corpus, SCHEME)
    assert g.weight("a1", "t") == 0.0


def test_build_graph_dispatch():
    corpus = corpus_of(make_paper("p1", "2000-01-01", ["a"], ["t1", "t2"]))
    assert build_graph(corpus, SCHEME, "cooccurrence").kind == "cooccurrence"
    with pytest.raises(ValueError):
        build_graph(corpus, SCHEME, "nope")


def test_graph_rejects_self_loops_and_bad_weights():
    g = TopicGraph("cooccurrence")
    with pytest.raises(ValueError):
        g.add_weight("a", "a", 1.0)
    with pytest.raises(ValueError):
        g.add_weight("a", "b", 0.0)


# -- distances -------------------------------------------------------------


def path_graph_provider(**kw):
    corpus = corpus_of(
        make_paper("p1", "2000-01-01", ["a"], ["ti", "tk"]),
        make_paper("p2", "2000-02-01", ["a"], ["tj", "tk"]),
    )
    return DistanceProvider(build_cooccurrence(corpus, SCHEME), **kw)


@pytest.mark.parametrize("threshold", [0, 8000])
def test_path_graph_overlap_is_one(threshold):
    provider = path_graph_provider(full_matrix_threshold=threshold)
    # W=1, s_i=s_j=1, w_ij=0 -> O = 1/(1+1-0-1) = 1 -> TD = 0
    assert provider.distance("ti", "tj") == pytest.approx(0.0, abs=1e-12)


def test_disjoint_neighborhoods_distance_one():
    corpus = corpus_of(
        make_paper("p1", "2000-01-01", ["a"], ["ti", "tk"]),
        make_paper("p2", "2000-02-01", ["a"], ["tj", "tm"]),
    )
    provider = DistanceProvider(build_cooccurrence(corpus, SCHEME))
    assert provider.distance("ti", "tj") == 1.0


def test_identity_distance_zero():
    provider = path_graph_provider()
    assert provider.distance("ti", "ti") == 0.0


def test_unknown_node_raises():
    with pytest.raises(KeyError):
        path_graph_provider().distance("ti", "nope")


def test_metric_direction_validation():
    corpus = corpus_of(make_paper("p1", "2000-01-01", ["a"], ["t1", "t2"]))
    und = build_cooccurrence(corpus, SCHEME)
    with pytest.raises(ValueError):
        DistanceProvider(und, metric="directed_overlap")
    cit = build_citation(corpus, SCHEME)
    with pytest.raises(ValueError):
        DistanceProvider(cit, metric="weighted_overlap")


def test_jaccard_example():
    corpus = corpus_of(
        make_paper("p1", "2000-01-01", ["a"], ["ti", "tk"]),
        make_paper("p2", "2000-02-01", ["a"], ["tj", "tk"]),
        make_paper("p3", "2000-03-01", ["a"], ["tj", "tm"]),
    )
    provider = DistanceProvider(build_cooccurrence(corpus, SCHEME), metric="jaccard")
    # neighbours: ti -> {tk}; tj -> {tk, tm}; intersection 1, union 2
    assert provider.distance("ti", "tj") == pytest.approx(0.5)


def test_matrix_matches_pairwise_calls():
    corpus = random_corpus(3, n_papers=80)
    g = build_cooccurrence(corpus, SCHEME)
    full = DistanceProvider(g)
    lazy = DistanceProvider(g, full_matrix_threshold=0)
    nodes = g.sorted_nodes()[:20]
    mat = full.distance_matrix(nodes)
    for a, i in enumerate(nodes):
        for b, j in enumerate(nodes):
            assert mat[a, b] == pytest.approx(full.distance(i, j), abs=1e-12)
            assert mat[a, b] == pytest.approx(lazy.distance(i, j), abs=1e-6)


def test_distances_bounded_and_symmetric():
    for seed in range(5):
        corpus = random_corpus(100 + seed, n_papers=60)
        g = build_cooccurrence(corpus, SCHEME)
        provider = DistanceProvider(g, full_matrix_threshold=0)
        nodes = g.sorted_nodes()
        for i in nodes[:15]:
            for j in nodes[:15]:
                d = provider.distance(i, j)
                assert 0.0 <= d <= 1.0
                assert d == provider.distance(j, i)


def test_directed_average_symmetric():
    corpus = random_corpus(7, n_papers=60)
    # add citations among existing papers
    papers = list(corpus.papers.values())
    extra = [
        make_paper(f"c{k}", "2012-01-01", [f"z{k}"], ["50.00"], refs=[papers[k].paper_id, papers[k + 1].paper_id])
        for k in range(10)
    ]
    corpus = Corpus.from_papers(papers + extra, NO_FILTER)
    g = build_citation(corpus, SCHEME)
    provider = DistanceProvider(g, metric="directed_overlap", full_matrix_threshold=0)
    nodes = g.sorted_nodes()
    for i in nodes[:10]:
        for j in nodes[:10]:
            assert provider.distance(i, j) == pytest.approx(provider.distance(j, i), abs=1e-12)


def test_single_node_matrix():
    provider = path_graph_provider()
    assert provider.distance_matrix(["ti"]).tolist() == [[0.0]]


def test_matrix_memory_guard():
    provider = path_graph_provider()
    with pytest.raises(MemoryError):
        provider.distance_matrix(["ti", "tj", "tk"], max_nodes=2)


def test_numerator_monotone_under_shared_neighborhood_paper():
    """Adding a paper containing both endpoints' neighbourhoods never
    decreases the overlap numerator."""
    base = [
        make_paper("p1", "2000-01-01", ["a"], ["ti", "tk"]),
        make_paper("p2", "2000-02-01", ["a"], ["tj", "tk"]),
        make_paper("p3", "2000-03-01", ["a"], ["tj", "tm"]),
    ]
    def numerator(corpus):
        g = build_cooccurrence(corpus, SCHEME)
        ni, nj = g.neighbors("ti"), g.neighbors("tj")
        return sum(0.5 * (w + nj[k]) for k, w in ni.items() if k in nj)

    before = numerator(corpus_of(*base))
    boosted = base + [make_paper("p4", "2000-04-01", ["a"], ["tk", "tm", "ti", "tj"])]
    after = numerator(corpus_of(*boosted))
    assert after >= before


# -- period stability ------------------------------------------------------


def test_period_stability_identical_periods():
    papers = [
        make_paper(f"p{k}", "2000-06-01", ["a"], ["t1", "t2"] if k % 2 else ["t2", "t3"])
        for k in range(8)
    ]
    corpus = corpus_of(*papers)
    d0 = datetime.date(2000, 1, 1)
    d1 = datetime.date(2000, 12, 31)
    result = period_stability(corpus, [(d0, d1), (d0, d1)], SCHEME)
    corr = result["correlations"]
    assert corr[1, 2] == pytest.approx(1.0)
    assert result["degenerate"] == []


def test_period_stability_flags_degenerate_period():
    papers = [
        make_paper("p1", "2000-06-01", ["a"], ["t1", "t2"]),
        make_paper("p2", "2000-07-01", ["a"], ["t2", "t3"]),
        make_paper("p3", "2005-06-01", ["a"], ["t1"]),
    ]
    corpus = corpus_of(*papers)
    periods = [
        (datetime.date(2000, 1, 1), datetime.date(2000, 12, 31)),
        (datetime.date(2005, 1, 1), datetime.date(2005, 12, 31)),
    ]
    result = period_stability(corpus, periods, SCHEME)
    assert len(result["degenerate"]) == 1


def test_period_stability_needs_two_periods():
    corpus = corpus_of(make_paper("p1", "2000-01-01", ["a"], ["t1", "t2"]))
    with pytest.raises(ValueError):
        period_stability(corpus, [(datetime.date(2000, 1, 1), datetime.date(2001, 1, 1))], SCHEME)


# -- exports ---------------------------------------------------------------


def test_edge_and_strength_exports(tmp_path):
    corpus = corpus_of(
        make_paper("p1", "2000-01-01", ["a"], ["t1", "t2", "t3"]),
        make_paper("p2", "2000-02-01", ["a"], ["t1", "t2"]),
    )
    g = build_cooccurrence(corpus, SCHEME)
    edges = tmp_path / "edges.csv"
    strengths = tmp_path / "strengths.csv"
    g.write_edges_csv(edges)
    g.write_strengths_csv(strengths)
    lines = edges.read_text().strip().splitlines()
    assert lines[0] == "src,dst,weight"
    assert len(lines) == 4  # header + 3 undirected edges
    assert "t1,t2,1.5" in lines
    s_lines = strengths.read_text().strip().splitlines()
    assert "t3,1.0" in s_lines
