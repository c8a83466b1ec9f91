"""Exploration metrics, impact measures, splits, grouping and covariates."""

import datetime
import math

import numpy as np
import pytest

from topicdrift.corpus import CodeScheme, Corpus, EligibilityFilter
from topicdrift.metrics import (
    CovariateConfig,
    ImpactContext,
    LookbackWindow,
    SplitPoint,
    assign_groups,
    build_rows,
    career_year,
    cohort_compare,
    covariates,
    ed,
    ep,
    exploratory_flags,
    group_transitions,
    importation_contribution,
    log_citations,
    paper_distance,
    split_author,
    temporal_trajectories,
)
from topicdrift.synth import SyntheticConfig, generate_synthetic
from topicdrift.topicgraph import DistanceProvider, build_cooccurrence

from conftest import make_paper

SCHEME = CodeScheme()
NO_FILTER = EligibilityFilter(min_papers=1)


class FakeProvider:
    """Distance stub driven by an explicit pair table."""

    def __init__(self, table):
        self.table = {frozenset(k): v for k, v in table.items()}

    def distance(self, i, j):
        if i == j:
            return 0.0
        return self.table[frozenset((i, j))]


def career(*code_lists, start="2000-01-01", gap_days=100):
    base = datetime.date.fromisoformat(start)
    return [
        make_paper(f"p{k}", base + datetime.timedelta(days=k * gap_days), ["u"], codes)
        for k, codes in enumerate(code_lists)
    ]


# -- basics ----------------------------------------------------------------


def test_log_citations():
    assert log_citations(0) == 0.0
    assert log_citations(1) == pytest.approx(math.log(2))
    with pytest.raises(ValueError):
        log_citations(-1)


def test_career_year_floors():
    first = datetime.date(2000, 1, 1)
    assert career_year(first, datetime.date(2000, 12, 31)) == 0
    assert career_year(first, datetime.date(2001, 1, 2)) == 1


def test_window_validation():
    with pytest.raises(ValueError):
        LookbackWindow("bogus", 5)
    with pytest.raises(ValueError):
        LookbackWindow("papers", 0)
    LookbackWindow("all", 0)  # value ignored for All


def test_split_validation():
    with pytest.raises(ValueError):
        SplitPoint("career_years", 1)
    with pytest.raises(ValueError):
        SplitPoint("bogus", 5)


# -- exploratory flags and EP ----------------------------------------------


def test_flags_hand_example():
    papers = career(["aa"], ["aa"], ["bb"], ["aa", "bb"], ["cc"])
    flags = exploratory_flags(papers, LookbackWindow("papers", 2), SCHEME)
    assert flags == [False, True, False, True]


def test_ep_hand_example():
    papers = career(["aa"], ["aa"], ["bb"], ["aa", "bb"], ["cc"])
    assert ep(papers, LookbackWindow("papers", 2), SCHEME) == pytest.approx(0.5)


def test_ep_all_same_area_zero():
    papers = career(["aa"], ["aa"], ["aa"])
    assert ep(papers, LookbackWindow(), SCHEME) == 0.0


def test_ep_fresh_area_every_paper_one():
    papers = career(["aa"], ["bb"], ["cc"], ["dd"])
    for window in (LookbackWindow(), LookbackWindow("all"), LookbackWindow("years", 3)):
        assert ep(papers, window, SCHEME) == 1.0


def test_ep_undefined_below_two_papers():
    assert ep(career(["aa"]), LookbackWindow(), SCHEME) is None


def test_ep_years_window():
    # 100-day gaps; a 1-year window sees at most the last ~3 papers
    papers = career(["aa"], ["bb"], ["aa"], ["aa"], ["aa"], ["bb"])
    flags = exploratory_flags(papers, LookbackWindow("years", 1), SCHEME)
    # paper 5 ("bb") looks back to papers 2,3,4 (all "aa") -> exploratory
    assert flags[-1] is True or flags[-1] == True  # noqa: E712


def test_ep_finite_window_dominates_all():
    """A paper exploratory under All stays exploratory under any finite window."""
    rng = np.random.default_rng(5)
    areas = ["aa", "bb", "cc", "dd"]
    for _ in range(30):
        codes = [[areas[i] for i in rng.choice(4, rng.integers(1, 3), replace=False)] for _ in range(8)]
        papers = career(*codes)
        all_flags = exploratory_flags(papers, LookbackWindow("all"), SCHEME)
        for j in (1, 2, 3):
            flags = exploratory_flags(papers, LookbackWindow("papers", j), SCHEME)
            for f_all, f_win in zip(all_flags, flags):
                if f_all:
                    assert f_win


def test_ep_window_j_at_least_career_equals_all():
    rng = np.random.default_rng(11)
    areas = ["aa", "bb", "cc", "dd", "ee"]
    for _ in range(20):
        codes = [[areas[i] for i in rng.choice(5, rng.integers(1, 3), replace=False)] for _ in range(7)]
        papers = career(*codes)
        assert ep(papers, LookbackWindow("papers", len(papers) - 1), SCHEME) == ep(
            papers, LookbackWindow("all"), SCHEME
        )


# -- paper distance and ED -------------------------------------------------


def test_paper_distance_hand_example():
    provider = FakeProvider({("a", "b"): 0.3, ("a", "c"): 0.7})
    assert paper_distance({"a"}, {"b", "c"}, provider, "mean") == pytest.approx(0.5)
    assert paper_distance({"a"}, {"b", "c"}, provider, "hausdorff") == pytest.approx(0.3)


def test_paper_distance_identical_singletons_zero():
    provider = FakeProvider({})
    assert paper_distance({"a"}, {"a"}, provider, "mean") == 0.0
    assert paper_distance({"a"}, {"a"}, provider, "hausdorff") == 0.0


def test_paper_distance_empty_side_undefined():
    provider = FakeProvider({})
    assert paper_distance(set(), {"a"}, provider) is None
    assert paper_distance({"a"}, set(), provider) is None


def test_paper_distance_mean_matches_double_loop():
    rng = np.random.default_rng(3)
    topics = [f"t{i}" for i in range(6)]
    table = {
        (topics[a], topics[b]): float(rng.random())
        for a in range(6)
        for b in range(a + 1, 6)
    }
    provider = FakeProvider(table)
    for _ in range(25):
        focal = set(rng.choice(topics, rng.integers(1, 4), replace=False))
        past = set(rng.choice(topics, rng.integers(1, 5), replace=False))
        expected = np.mean([provider.distance(a, b) for a in focal for b in past])
        assert paper_distance(focal, past, provider, "mean") == pytest.approx(expected, abs=1e-12)


def test_ed_hand_examples():
    provider = FakeProvider({("t1", "t2"): 0.4, ("t1", "t3"): 0.8, ("t2", "t3"): 0.2})
    papers = career(["t1"], ["t2"], ["t3"])
    assert ed(papers, LookbackWindow("papers", 1), provider, SCHEME) == pytest.approx(0.3)
    assert ed(papers, LookbackWindow("papers", 2), provider, SCHEME) == pytest.approx(0.45)


def test_ed_repeated_topic_zero():
    provider = FakeProvider({})
    papers = career(["t1"], ["t1"], ["t1"])
    assert ed(papers, LookbackWindow(), provider, SCHEME) == 0.0


def test_ed_undefined_distance_diagnostics():
    provider = FakeProvider({("t1", "t2"): 0.4})
    papers = career(["t1"], [], ["t2"])  # middle paper has no codes
    diag = {}
    value = ed(papers, LookbackWindow(), provider, SCHEME, diagnostics=diag)
    assert value == pytest.approx(0.4)
    assert diag["undefined_paper_distances"] == 1


# -- splits ----------------------------------------------------------------


def test_split_year_mode_partitions_at_anniversary():
    papers = career(*[["aa"]] * 12, gap_days=600)  # ~20-year career
    past, future = split_author(papers, SplitPoint("career_years", 10), min_past=2)
    cutoff = papers[0].date + datetime.timedelta(days=10 * 365.25)
    assert all(p.date < cutoff for p in past)
    assert all(p.date >= cutoff for p in future)
    assert len(past) + len(future) == 12


def test_split_count_mode():
    papers = career(*[["aa"]] * 15)
    past, future = split_author(papers, SplitPoint("paper_count", 10))
    assert len(past) == 10 and len(future) == 5


def test_split_excludes_thin_future():
    papers = career(*[["aa"]] * 12)
    assert split_author(papers, SplitPoint("paper_count", 10), min_future=3) is None


def test_split_excludes_thin_past():
    papers = career(*[["aa"]] * 8, gap_days=50)
    # all 8 papers fall within 2 career years -> no future side
    assert split_author(papers, SplitPoint("career_years", 2), min_past=5) is None


# -- impact ----------------------------------------------------------------


def _impact_corpus():
    """Area 'aa' has two papers in 2005 with 1 and 3 in-corpus citations."""
    papers = [
        make_paper("low", "2005-01-01", ["u"], ["aa.10"]),
        make_paper("high", "2005-02-01", ["u"], ["aa.20"]),
        make_paper("other", "2005-03-01", ["u"], ["bb.10"]),
    ]
    citers = [
        make_paper("c1", "2006-01-01", ["x1"], [], refs=["low", "high"]),
        make_paper("c2", "2006-02-01", ["x2"], [], refs=["high"]),
        make_paper("c3", "2006-03-01", ["x3"], [], refs=["high", "other"]),
    ]
    return Corpus.from_papers(papers + citers, NO_FILTER)


def test_normalized_v1():
    corpus = _impact_corpus()
    ctx = ImpactContext(corpus, SCHEME)
    c_low, c_high = math.log(2), math.log(4)
    expected = c_high / ((c_low + c_high) / 2)
    assert ctx.paper_value(corpus.papers["high"], "normalized_v1") == pytest.approx(expected)


def test_v1_equals_v2_single_area():
    corpus = _impact_corpus()
    ctx = ImpactContext(corpus, SCHEME)
    for pid in ("low", "high"):
        p = corpus.papers[pid]
        assert ctx.paper_value(p, "normalized_v1") == pytest.approx(
            ctx.paper_value(p, "normalized_v2")
        )


def test_percentile_lowest_zero_and_range():
    corpus = _impact_corpus()
    ctx = ImpactContext(corpus, SCHEME)
    assert ctx.paper_value(corpus.papers["low"], "percentile_mean") == 0.0
    hi = ctx.paper_value(corpus.papers["high"], "percentile_mean")
    assert 0.0 <= hi < 100.0
    assert hi == pytest.approx(50.0)  # 1 of 2 stratum papers strictly below


def test_impact_mean_order_invariant_max_dominates():
    corpus = _impact_corpus()
    ctx = ImpactContext(corpus, SCHEME)
    papers = [corpus.papers[p] for p in ("low", "high", "other")]
    mean_val = ctx.impact(papers, "log_c5")
    assert ctx.impact(list(reversed(papers)), "log_c5") == pytest.approx(mean_val)
    assert ctx.impact(papers, "max_log_c5") >= mean_val


def test_impact_unknown_kind():
    ctx = ImpactContext(_impact_corpus(), SCHEME)
    with pytest.raises(ValueError):
        ctx.impact([], "bogus")


# -- grouping --------------------------------------------------------------


def test_groups_q50_partitions_everyone():
    rng = np.random.default_rng(0)
    eps_v = rng.random(8)
    eds_v = rng.random(8)
    labels, degenerate = assign_groups(eps_v, eds_v, 50.0)
    assert not degenerate
    assert "excluded" not in labels
    assert sum(1 for v in eps_v if v >= np.quantile(eps_v, 0.5)) == 4


def test_groups_quadrant_mapping():
    eps_v = [1.0, 0.0, 1.0, 0.0]
    eds_v = [0.0, 0.0, 1.0, 1.0]
    labels, _ = assign_groups(eps_v, eds_v, 50.0)
    assert labels == ["A", "B", "C", "D"]


def test_groups_q25_excludes_middle_band():
    eps_v = np.linspace(0, 1, 12)
    eds_v = np.linspace(1, 0, 12)
    labels, _ = assign_groups(eps_v, eds_v, 25.0)
    assert "excluded" in labels
    assert sum(1 for g in labels if g != "excluded") < 12


def test_groups_degenerate_flag():
    labels, degenerate = assign_groups([0.5] * 4, [0.1, 0.2, 0.3, 0.4], 50.0)
    assert degenerate


def test_groups_bad_quantile():
    with pytest.raises(ValueError):
        assign_groups([0.1], [0.1], 60.0)


# -- covariates ------------------------------------------------------------


def test_area_popularity_fraction():
    papers = [
        make_paper("p1", "2005-01-01", ["a"], ["74.10"]),
        make_paper("p2", "2005-02-01", ["b"], ["74.20"]),
        make_paper("p3", "2005-03-01", ["c"], ["81.10"]),
        make_paper("p4", "2005-04-01", ["d"], ["91.10"]),
    ]
    corpus = Corpus.from_papers(papers, NO_FILTER)
    from topicdrift.metrics import AreaPopularity

    pop = AreaPopularity(corpus, SCHEME)
    assert pop.area("74", 2005) == pytest.approx(0.5)


def test_importation_hand_example():
    base = datetime.date(2000, 1, 1)

    def p(pid, day, authors, codes):
        return make_paper(pid, base + datetime.timedelta(days=day), authors, codes)

    papers = [
        p("h1", 0, ["me"], ["aa", "bb"]),      # my history: {aa, bb}
        p("h2", 10, ["co"], ["bb", "cc", "dd"]),  # co-author history: {bb, cc, dd}
        p("focal", 100, ["me", "co"], ["aa", "bb", "cc"]),
    ]
    corpus = Corpus.from_papers(papers, NO_FILTER)
    config = CovariateConfig()
    value = importation_contribution(
        corpus, "me", [corpus.papers["focal"]], SCHEME, config
    )
    # I_focal = |{aa,bb,cc} ∩ {aa,bb}| = 2; I_other = |{aa,bb,cc} ∩ {bb,cc,dd}| = 2
    assert value == pytest.approx(0.5)


def test_solo_author_covariates():
    papers = [make_paper(f"p{k}", f"200{k}-01-01", ["me"], ["aa"]) for k in range(3)]
    corpus = Corpus.from_papers(papers, NO_FILTER)
    out = covariates(corpus, "me", papers, SCHEME, CovariateConfig())
    assert out["lead_author_frac"] == 1.0
    assert out["team_size"] == 1.0
    assert out["importation_contribution"] == 0.0  # no co-authors to import
    assert "institution_change" not in out  # no institution data -> absent


def test_institution_change_and_ivy():
    papers = [
        make_paper("p1", "2000-01-01", ["me"], ["aa"], institutions=(frozenset({"X"}),)),
        make_paper("p2", "2001-01-01", ["me"], ["aa"], institutions=(frozenset({"Y"}),)),
    ]
    corpus = Corpus.from_papers(papers, NO_FILTER)
    cfg = CovariateConfig(ivy_institutions=frozenset({"Y"}))
    out = covariates(corpus, "me", papers, SCHEME, cfg)
    assert out["institution_change"] == pytest.approx(1.0)  # 2 institutions / 2 papers
    assert out["ivy_flag"] == 1.0


# -- build_rows integration ------------------------------------------------


@pytest.fixture(scope="module")
def small_synth():
    cfg = SyntheticConfig(
        n_authors=120, career_min=14, career_max=18,
        ep_effect=0.3, ed_effect=-0.25, noise_sd=0.1,
    )
    corpus, manifest = generate_synthetic(cfg, 99)
    provider = DistanceProvider(build_cooccurrence(corpus, SCHEME))
    return corpus, provider, manifest


def build_small_rows(small_synth, **kw):
    corpus, provider, _ = small_synth
    kw.setdefault("split", SplitPoint("career_years", 5))
    kw.setdefault("min_past", 2)
    return build_rows(corpus, provider, SCHEME, **kw)


def test_build_rows_columns_and_ranges(small_synth):
    rows = build_small_rows(small_synth)
    for col in ("author_id", "ep_past", "ed_past", "logcit_past", "logcit_future",
                "p_past", "year_first", "area_first", "group"):
        assert col in rows.columns
    assert ((rows["ep_past"] >= 0) & (rows["ep_past"] <= 1)).all()
    assert ((rows["ed_past"] >= 0) & (rows["ed_past"] <= 1)).all()
    assert (rows["logcit_past"] >= 0).all()


def test_build_rows_matches_manifest_ground_truth(small_synth):
    corpus, provider, manifest = small_synth
    rows = build_small_rows(small_synth)
    for _, r in rows.iterrows():
        truth = manifest["authors"][r["author_id"]]
        assert r["ep_past"] == truth["ep"]
        assert r["ed_past"] == pytest.approx(truth["ed"], abs=1e-6)


def test_build_rows_threads_identical(small_synth):
    one = build_small_rows(small_synth, threads=1)
    four = build_small_rows(small_synth, threads=4)
    assert one.equals(four)


def test_build_rows_future_metrics(small_synth):
    rows = build_small_rows(small_synth, with_future_metrics=True)
    assert "ep_future" in rows.columns and "ed_future" in rows.columns


# -- temporal analyses -----------------------------------------------------


def test_temporal_trajectories_flat_for_constant_behavior():
    provider = FakeProvider({("t1", "t2"): 0.4})
    papers = career(*([["t1"], ["t2"]] * 10), gap_days=400)
    corpus = Corpus.from_papers(papers, NO_FILTER)
    traj = temporal_trajectories(corpus, provider, SCHEME, max_year=10)
    eps_v = traj["ep_mean"].dropna().to_numpy()
    assert np.allclose(eps_v[3:], eps_v[3], atol=0.15)


def test_temporal_trajectories_requires_long_careers():
    provider = FakeProvider({})
    papers = career(["t1"], ["t1"])
    corpus = Corpus.from_papers(papers, NO_FILTER)
    with pytest.raises(ValueError):
        temporal_trajectories(corpus, provider, SCHEME, max_year=15)


def test_cohort_compare_identical_cohorts():
    provider = FakeProvider({("t1", "t2"): 0.4})
    papers = []
    for u in range(6):
        base = datetime.date(2000, 1, 1)
        for k in range(6):
            papers.append(
                make_paper(
                    f"u{u}p{k}", base + datetime.timedelta(days=120 * k),
                    [f"u{u}"], ["t1"] if k % 2 else ["t2"],
                )
            )
    corpus = Corpus.from_papers(papers, NO_FILTER)
    # both ranges capture the same authors -> identical distributions
    result = cohort_compare(corpus, provider, SCHEME, [(2000, 2000), (1999, 2001)])
    tests = result["ks_tests"]
    assert len(tests) == 2  # one pair x two metrics
    assert (tests["D"] == 0).all()
    assert np.allclose(tests["p_value"], 1.0)


def test_group_transitions_static_behavior():
    provider = FakeProvider({("t1", "t2"): 0.9, ("t1", "t3"): 0.1, ("t2", "t3"): 0.9})
    papers = []
    base = datetime.date(2000, 1, 1)
    # half the authors explore broadly, half repeat one topic
    for u in range(8):
        codes_cycle = (["t1"], ["t2"]) if u % 2 else (["t1"], ["t3"])
        for k in range(12):
            papers.append(
                make_paper(
                    f"u{u}p{k}", base + datetime.timedelta(days=200 * k),
                    [f"u{u}"], codes_cycle[k % 2],
                )
            )
    corpus = Corpus.from_papers(papers, NO_FILTER)
    snaps = [datetime.date(2003, 1, 1), datetime.date(2005, 1, 1)]
    result = group_transitions(corpus, provider, SCHEME, snaps)
    mat = result["transitions"][0]["matrix"]
    # conservation: row sums equal earlier-snapshot group sizes
    first = result["membership"][snaps[0]]
    for g in mat.index:
        assert mat.loc[g].sum() == sum(1 for v in first.values() if v == g)
    # static behavior -> diagonal mass dominates
    diag = sum(mat.loc[g, g] for g in mat.index)
    assert diag >= 0.5 * mat.to_numpy().sum()
