"""Per-author exploration metrics, impact measures, splits, covariates and
temporal analyses.

The two headline metrics:

* exploration propensity: the fraction of an author's papers (after the
  first) whose area set contains an area absent from the look-back window;
* exploration distance: the average topic-space distance between each paper
  and the union of topics of its look-back papers.

Both share the same look-back window (past J papers, past K years, or the
whole history).
"""

from __future__ import annotations

import datetime
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .corpus import DAYS_PER_YEAR


@dataclass(frozen=True)
class LookbackWindow:
    mode: str = "papers"  # papers | years | all
    value: int = 5

    def __post_init__(self):
        if self.mode not in ("papers", "years", "all"):
            raise ValueError(f"unknown window mode {self.mode!r}")
        if self.mode != "all" and self.value < 1:
            raise ValueError("window value must be >= 1")

    def lookback(self, papers, i):
        """Indices of the look-back papers for papers[i] (i >= 1)."""
        if self.mode == "all":
            return range(i)
        if self.mode == "papers":
            return range(max(0, i - self.value), i)
        # years: papers dated within [date - K years, date)
        horizon = datetime.timedelta(days=self.value * DAYS_PER_YEAR)
        start = papers[i].date - horizon
        return [j for j in range(i) if papers[j].date >= start]


@dataclass(frozen=True)
class SplitPoint:
    mode: str = "career_years"  # career_years | paper_count
    value: int = 10

    def __post_init__(self):
        if self.mode not in ("career_years", "paper_count"):
            raise ValueError(f"unknown split mode {self.mode!r}")
        if self.value < 2:
            raise ValueError("split value must be >= 2")


def log_citations(count):
    """ln(1 + citations); 0 citations map to 0."""
    if count < 0:
        raise ValueError("citation count must be non-negative")
    return math.log1p(count)


def career_year(first_date, date):
    """Completed career years at `date` (elapsed days / 365.25, floored)."""
    return int((date - first_date).days // DAYS_PER_YEAR)


def paper_areas(paper, scheme):
    return {scheme.area_key(c) for c in paper.codes}


def paper_topic_set(paper, scheme):
    return {scheme.topic_key(c) for c in paper.codes}


def exploratory_flags(papers, window, scheme):
    """Boolean flag per paper index 1..L-1; the first paper is undecidable."""
    if len(papers) < 2:
        raise ValueError("need at least two papers")
    flags = []
    areas = [paper_areas(p, scheme) for p in papers]
    for i in range(1, len(papers)):
        seen = set()
        for j in window.lookback(papers, i):
            seen |= areas[j]
        flags.append(not areas[i] <= seen)
    return flags


def ep(papers, window, scheme, up_to=None):
    """Exploration propensity over papers[:up_to]; None if fewer than 2 papers."""
    if up_to is not None:
        papers = papers[:up_to]
    if len(papers) < 2:
        return None
    flags = exploratory_flags(papers, window, scheme)
    return sum(flags) / len(flags)


def paper_distance(focal_topics, lookback_topics, provider, mode="mean"):
    """Distance between a paper's topic set and its look-back topic set.

    None when either set is empty (excluded from the ED average).
    """
    if not focal_topics or not lookback_topics:
        return None
    if mode == "mean":
        total = 0.0
        for tj in focal_topics:
            for tk in lookback_topics:
                total += provider.distance(tj, tk)
        return total / (len(focal_topics) * len(lookback_topics))
    if mode == "hausdorff":
        return max(
            min(provider.distance(tj, tk) for tk in lookback_topics)
            for tj in focal_topics
        )
    raise ValueError(f"unknown paper-distance mode {mode!r}")


def ed(papers, window, provider, scheme, mode="mean", up_to=None, diagnostics=None):
    """Exploration distance over papers[:up_to]; None when no paper has a
    defined distance.  `diagnostics`, if given, collects the undefined tally."""
    if up_to is not None:
        papers = papers[:up_to]
    if len(papers) < 2:
        return None
    distances = []
    undefined = 0
    topic_sets = [paper_topic_set(p, scheme) for p in papers]
    for i in range(1, len(papers)):
        lookback = set()
        for j in window.lookback(papers, i):
            lookback |= topic_sets[j]
        d = paper_distance(topic_sets[i], lookback, provider, mode)
        if d is None:
            undefined += 1
        else:
            distances.append(d)
    if diagnostics is not None:
        diagnostics["undefined_paper_distances"] = (
            diagnostics.get("undefined_paper_distances", 0) + undefined
        )
    if not distances:
        return None
    return sum(distances) / len(distances)


# -- splits ----------------------------------------------------------------


def split_author(papers, split, min_past=None, min_future=3):
    """Partition a career at the split point; None when ineligible."""
    if split.mode == "career_years":
        if min_past is None:
            min_past = 5
        first = papers[0].date
        cutoff = first + datetime.timedelta(days=split.value * DAYS_PER_YEAR)
        past = [p for p in papers if p.date < cutoff]
        future = [p for p in papers if p.date >= cutoff]
    else:
        if min_past is None:
            min_past = split.value
        past = papers[: split.value]
        future = papers[split.value:]
    if len(past) < min_past or len(future) < min_future:
        return None
    return past, future


# -- impact ----------------------------------------------------------------

IMPACT_KINDS = (
    "log_c5",
    "log_c10",
    "normalized_v1",
    "normalized_v2",
    "percentile_max",
    "percentile_mean",
    "max_log_c5",
    "max_log_c10",
)


class ImpactContext:
    """Corpus-wide citation statistics needed by the normalized and
    percentile impact measures.  Strata are (area, publication year)."""

    def __init__(self, corpus, scheme, horizon_years=5):
        self.corpus = corpus
        self.scheme = scheme
        self.horizon_years = horizon_years
        self._log_cits = {}
        self._strata = None  # (area, year) -> sorted array of log-citations
        self._weighted = None  # (area, year) -> (sum c*f, sum f)

    def log_cit(self, paper_id, horizon=None):
        horizon = horizon or self.horizon_years
        key = (paper_id, horizon)
        if key not in self._log_cits:
            self._log_cits[key] = log_citations(
                self.corpus.citation_counts(paper_id, horizon)
            )
        return self._log_cits[key]

    def _area_multiplicities(self, paper):
        counts = defaultdict(int)
        for c in paper.codes:
            counts[self.scheme.area_key(c)] += 1
        return counts

    def _build_strata(self):
        strata = defaultdict(list)
        weighted = defaultdict(lambda: [0.0, 0.0])
        for pid in sorted(self.corpus.papers):
            p = self.corpus.papers[pid]
            mults = self._area_multiplicities(p)
            if not mults:
                continue
            total = sum(mults.values())
            c = self.log_cit(pid)
            for area, m in mults.items():
                key = (area, p.date.year)
                strata[key].append(c)
                frac = m / total
                weighted[key][0] += c * frac
                weighted[key][1] += frac
        self._strata = {k: np.sort(np.array(v)) for k, v in strata.items()}
        self._weighted = {k: tuple(v) for k, v in weighted.items()}

    def stratum(self, area, year):
        if self._strata is None:
            self._build_strata()
        return self._strata.get((area, year))

    def stratum_weighted_mean(self, area, year):
        if self._weighted is None or self._strata is None:
            self._build_strata()
        acc = self._weighted.get((area, year))
        if acc is None or acc[1] == 0:
            return None
        return acc[0] / acc[1]

    # -- per-paper values --------------------------------------------------

    def paper_value(self, paper, kind):
        """Per-paper impact under the given measure; None when undefined."""
        if kind in ("log_c5", "max_log_c5"):
            return self.log_cit(paper.paper_id, 5)
        if kind in ("log_c10", "max_log_c10"):
            return self.log_cit(paper.paper_id, 10)
        areas = sorted({self.scheme.area_key(c) for c in paper.codes})
        if not areas:
            return None
        year = paper.date.year
        c_raw = self.log_cit(paper.paper_id)
        if kind == "normalized_v1":
            e_vals = []
            for a in areas:
                s = self.stratum(a, year)
                if s is not None and len(s):
                    e_vals.append(float(np.mean(s)))
            if not e_vals:
                return None
            e = float(np.mean(e_vals))
            return c_raw / e if e != 0 else None
        if kind == "normalized_v2":
            e_vals = []
            for a in areas:
                e_i = self.stratum_weighted_mean(a, year)
                if e_i is not None:
                    e_vals.append(e_i)
            if not e_vals or any(e_i == 0 for e_i in e_vals):
                return None
            e = len(e_vals) / sum(1.0 / e_i for e_i in e_vals)
            return c_raw / e if e != 0 else None
        if kind in ("percentile_max", "percentile_mean"):
            pct = []
            for a in areas:
                s = self.stratum(a, year)
                if s is None or not len(s):
                    continue
                fewer = int(np.searchsorted(s, c_raw, side="left"))
                pct.append(100.0 * fewer / len(s))
            if not pct:
                return None
            return max(pct) if kind == "percentile_max" else float(np.mean(pct))
        raise ValueError(f"unknown impact kind {kind!r}")

    def impact(self, papers, kind, aggregate=None):
        """Aggregate per-paper impact over a career side; None if no paper
        has a defined value."""
        if kind not in IMPACT_KINDS:
            raise ValueError(f"unknown impact kind {kind!r}")
        if aggregate is None:
            aggregate = "max" if kind.startswith("max_") else "mean"
        values = [self.paper_value(p, kind) for p in papers]
        values = [v for v in values if v is not None]
        if not values:
            return None
        return max(values) if aggregate == "max" else float(np.mean(values))


# -- grouping --------------------------------------------------------------

GROUPS = ("A", "B", "C", "D")


def _high_low(values, quantile_pct):
    """Per-value labels: 'high' (>= upper threshold, ties high), 'low'
    (<= lower threshold), or 'mid'."""
    arr = np.asarray(values, dtype=float)
    if len(arr) == 0:
        return [], False
    degenerate = bool(np.all(arr == arr[0]))
    hi_thr = np.quantile(arr, 1.0 - quantile_pct / 100.0)
    lo_thr = np.quantile(arr, quantile_pct / 100.0)
    labels = []
    for v in arr:
        if v >= hi_thr:
            labels.append("high")
        elif v <= lo_thr:
            labels.append("low")
        else:
            labels.append("mid")
    return labels, degenerate


def assign_groups(ep_values, ed_values, quantile_pct=50.0):
    """Four-quadrant group labels from EP/ED quantile thresholds.

    A = high-EP-low-ED, B = low-EP-low-ED, C = high-EP-high-ED,
    D = low-EP-high-ED; anyone in a middle band is 'excluded'.
    Returns (labels, degenerate_flag).
    """
    if not 0 < quantile_pct <= 50:
        raise ValueError("quantile must be in (0, 50]")
    ep_lab, ep_degen = _high_low(ep_values, quantile_pct)
    ed_lab, ed_degen = _high_low(ed_values, quantile_pct)
    table = {
        ("high", "low"): "A",
        ("low", "low"): "B",
        ("high", "high"): "C",
        ("low", "high"): "D",
    }
    labels = [table.get((e, d), "excluded") for e, d in zip(ep_lab, ed_lab)]
    return labels, (ep_degen or ed_degen)


# -- covariates ------------------------------------------------------------


@dataclass
class CovariateConfig:
    popularity_mode: str = "mean"  # mean | max over a paper's areas
    importation_digits: str = "topic"  # 'area' or 'topic' key granularity
    importation_lookback: int = 5
    ivy_institutions: frozenset = frozenset()
    external: dict = field(default_factory=dict)  # name -> {paper_id: value}


class AreaPopularity:
    """Fraction of each year's papers associated with each area."""

    def __init__(self, corpus, scheme):
        year_totals = defaultdict(int)
        year_area = defaultdict(int)
        for p in corpus.papers.values():
            year_totals[p.date.year] += 1
            for a in paper_areas(p, scheme):
                year_area[(a, p.date.year)] += 1
        self._totals = dict(year_totals)
        self._counts = dict(year_area)

    def area(self, area, year):
        total = self._totals.get(year, 0)
        if total == 0:
            return None
        return self._counts.get((area, year), 0) / total

    def paper(self, paper, scheme, mode="mean"):
        vals = [self.area(a, paper.date.year) for a in sorted(paper_areas(paper, scheme))]
        vals = [v for v in vals if v is not None]
        if not vals:
            return None
        return max(vals) if mode == "max" else float(np.mean(vals))


def _codes_key_set(paper, scheme, granularity):
    if granularity == "area":
        return paper_areas(paper, scheme)
    return paper_topic_set(paper, scheme)


def importation_contribution(corpus, author_id, papers, scheme, config):
    """Mean share of a paper's codes imported by co-authors rather than the
    focal author, per their respective past-k papers.  None when every paper
    is undefined (both importation counts zero)."""
    index = corpus.all_author_papers()
    k = config.importation_lookback
    shares = []
    for p in papers:
        focal_codes = _codes_key_set(p, scheme, config.importation_digits)
        if not focal_codes:
            continue

        def past_codes(aid):
            hist = index.get(aid, [])
            prior = [q for q in hist if (q.date, q.paper_id) < (p.date, p.paper_id)]
            out = set()
            for q in prior[-k:]:
                out |= _codes_key_set(q, scheme, config.importation_digits)
            return out

        i_focal = len(focal_codes & past_codes(author_id))
        coauthor_union = set()
        for aid in p.authors:
            if aid != author_id:
                coauthor_union |= past_codes(aid)
        i_other = len(focal_codes & coauthor_union)
        if i_focal + i_other == 0:
            continue
        shares.append(i_other / (i_focal + i_other))
    if not shares:
        return None
    return float(np.mean(shares))


def covariates(corpus, author_id, papers, scheme, config, popularity=None):
    """Named covariate values over one side of a split.

    Institution covariates are absent (not zero) when the papers carry no
    institution data.
    """
    out = {}
    out["team_size"] = float(np.mean([len(p.authors) for p in papers]))
    lead = sum(1 for p in papers if p.authors[0] == author_id or p.authors[-1] == author_id)
    out["lead_author_frac"] = lead / len(papers)

    if popularity is None:
        popularity = AreaPopularity(corpus, scheme)
    pops = [popularity.paper(p, scheme, config.popularity_mode) for p in papers]
    pops = [v for v in pops if v is not None]
    out["area_popularity"] = float(np.mean(pops)) if pops else None

    out["importation_contribution"] = importation_contribution(
        corpus, author_id, papers, scheme, config
    )

    with_inst = [p for p in papers if p.institutions is not None]
    if with_inst:
        insts = set()
        for p in with_inst:
            idx = p.authors.index(author_id)
            insts |= p.institutions[idx]
        out["institution_change"] = len(insts) / len(with_inst)
        if config.ivy_institutions:
            out["ivy_flag"] = float(bool(insts & config.ivy_institutions))

    for name, mapping in config.external.items():
        vals = [mapping[p.paper_id] for p in papers if p.paper_id in mapping]
        out[name] = float(np.mean(vals)) if vals else None
    return out


# -- analysis rows ---------------------------------------------------------


def build_rows(
    corpus,
    provider,
    scheme,
    window=LookbackWindow(),
    split=SplitPoint(),
    impact_kind="log_c5",
    ed_mode="mean",
    quantile_pct=50.0,
    min_past=None,
    min_future=3,
    covariate_config=None,
    with_future_metrics=False,
    threads=1,
):
    """One AuthorAnalysisRow per eligible author, as a DataFrame.

    EP/ED for the 'future' side are computed over post-split papers only,
    with no look-back across the split.
    """
    ctx = ImpactContext(corpus, scheme)
    popularity = None
    if covariate_config is not None:
        popularity = AreaPopularity(corpus, scheme)

    author_ids = sorted(corpus.careers)

    def one_author(aid):
        papers = corpus.career_papers(aid)
        parts = split_author(papers, split, min_past=min_past, min_future=min_future)
        if parts is None:
            return None
        past, future = parts
        ep_past = ep(past, window, scheme)
        ed_past = ed(past, window, provider, scheme, mode=ed_mode)
        if ep_past is None or ed_past is None:
            return None
        logcit_past = ctx.impact(past, "log_c5")
        logcit_future = ctx.impact(future, impact_kind)
        if logcit_past is None or logcit_future is None:
            return None
        first = papers[0]
        first_areas = sorted(paper_areas(first, scheme))
        row = {
            "author_id": aid,
            "ep_past": ep_past,
            "ed_past": ed_past,
            "logcit_past": logcit_past,
            "logcit_future": logcit_future,
            "p_past": len(past),
            "year_first": str(first.date.year),
            "area_first": first_areas[0] if first_areas else "none",
        }
        if with_future_metrics:
            row["ep_future"] = ep(future, window, scheme)
            row["ed_future"] = ed(future, window, provider, scheme, mode=ed_mode)
        if covariate_config is not None:
            row.update(
                covariates(corpus, aid, past, scheme, covariate_config, popularity)
            )
            attrs = corpus.careers[aid].attributes
            for key in ("gender",):
                if key in attrs:
                    row[key] = attrs[key]
        return row

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_author, author_ids))
    else:
        results = [one_author(aid) for aid in author_ids]

    rows = [r for r in results if r is not None]
    df = pd.DataFrame(rows)
    if len(df):
        labels, degenerate = assign_groups(
            df["ep_past"].to_numpy(), df["ed_past"].to_numpy(), quantile_pct
        )
        df["group"] = labels
        df.attrs["degenerate_quantiles"] = degenerate
    return df


# -- temporal analyses -----------------------------------------------------


def temporal_trajectories(
    corpus, provider, scheme, window=LookbackWindow(), max_year=15, ed_mode="mean"
):
    """Per-career-year mean cumulative EP/ED with 95% normal CIs, over
    authors whose careers span at least `max_year` years."""
    span = datetime.timedelta(days=max_year * DAYS_PER_YEAR)
    eligible = []
    for aid in sorted(corpus.careers):
        papers = corpus.career_papers(aid)
        if papers[-1].date - papers[0].date >= span:
            eligible.append((aid, papers))
    if not eligible:
        raise ValueError("no authors with careers spanning the requested years")

    records = []
    for year in range(1, max_year + 1):
        cutoff_days = year * DAYS_PER_YEAR
        eps, eds = [], []
        for _, papers in eligible:
            first = papers[0].date
            upto = [p for p in papers if (p.date - first).days < cutoff_days]
            e = ep(upto, window, scheme)
            d = ed(upto, window, provider, scheme, mode=ed_mode)
            if e is not None:
                eps.append(e)
            if d is not None:
                eds.append(d)
        rec = {"career_year": year, "n_ep": len(eps), "n_ed": len(eds)}
        for name, vals in (("ep", eps), ("ed", eds)):
            if vals:
                mean = float(np.mean(vals))
                se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
                rec[f"{name}_mean"] = mean
                rec[f"{name}_ci_lo"] = mean - 1.96 * se
                rec[f"{name}_ci_hi"] = mean + 1.96 * se
            else:
                rec[f"{name}_mean"] = None
        records.append(rec)
    return pd.DataFrame(records)


def cohort_compare(
    corpus, provider, scheme, cohorts, window=LookbackWindow(), horizon=15, ed_mode="mean"
):
    """EP/ED distributions within each author's first `horizon` career years
    for cohorts defined by first-paper year ranges, plus pairwise two-sample
    K-S results per metric."""
    from .stats import ks_two_sample

    if len(cohorts) < 2:
        raise ValueError("need at least two cohorts")
    cutoff_days = horizon * DAYS_PER_YEAR
    dists = {}
    for lo, hi in cohorts:
        label = f"{lo}-{hi}"
        eps, eds = [], []
        for aid in sorted(corpus.careers):
            papers = corpus.career_papers(aid)
            if not lo <= papers[0].date.year <= hi:
                continue
            first = papers[0].date
            upto = [p for p in papers if (p.date - first).days < cutoff_days]
            e = ep(upto, window, scheme)
            d = ed(upto, window, provider, scheme, mode=ed_mode)
            if e is not None:
                eps.append(e)
            if d is not None:
                eds.append(d)
        if not eps:
            raise ValueError(f"cohort {label} is empty")
        dists[label] = {"ep": eps, "ed": eds}

    labels = list(dists)
    tests = []
    for a in range(len(labels)):
        for b in range(a + 1, len(labels)):
            for metric in ("ep", "ed"):
                d_stat, p = ks_two_sample(dists[labels[a]][metric], dists[labels[b]][metric])
                tests.append(
                    {
                        "cohort_x": labels[a],
                        "cohort_y": labels[b],
                        "metric": metric,
                        "D": d_stat,
                        "p_value": p,
                    }
                )
    return {"distributions": dists, "ks_tests": pd.DataFrame(tests)}


def group_transitions(
    corpus,
    provider,
    scheme,
    snapshots,
    window=LookbackWindow(),
    quantile_pct=50.0,
    ed_mode="mean",
    require_active_through=True,
):
    """Group membership at each snapshot date (using all papers up to it),
    consecutive-snapshot transition counts, per-group stay rates and the
    all-snapshot persistence rate."""
    if len(snapshots) < 2:
        raise ValueError("need at least two snapshots")
    snapshots = sorted(snapshots)

    authors = []
    for aid in sorted(corpus.careers):
        papers = corpus.career_papers(aid)
        if require_active_through and papers[-1].date < snapshots[-1]:
            continue
        authors.append((aid, papers))

    membership = {}  # snapshot -> {author: group}
    for snap in snapshots:
        rows = []
        for aid, papers in authors:
            upto = [p for p in papers if p.date <= snap]
            e = ep(upto, window, scheme)
            d = ed(upto, window, provider, scheme, mode=ed_mode)
            if e is None or d is None:
                continue
            rows.append((aid, e, d))
        if not rows:
            membership[snap] = {}
            continue
        labels, _ = assign_groups(
            [r[1] for r in rows], [r[2] for r in rows], quantile_pct
        )
        membership[snap] = {aid: g for (aid, _, _), g in zip(rows, labels)}

    group_order = list(GROUPS) + ["excluded"]
    matrices = []
    for a, b in zip(snapshots[:-1], snapshots[1:]):
        mat = pd.DataFrame(0, index=group_order, columns=group_order)
        for aid, g1 in membership[a].items():
            g2 = membership[b].get(aid)
            if g2 is not None:
                mat.loc[g1, g2] += 1
        stay = {}
        for g in group_order:
            total = int(mat.loc[g].sum())
            stay[g] = mat.loc[g, g] / total if total else None
        matrices.append({"from": a, "to": b, "matrix": mat, "stay_rates": stay})

    persistence = {}
    first_snap = snapshots[0]
    for g in GROUPS:
        members = [aid for aid, grp in membership[first_snap].items() if grp == g]
        if not members:
            persistence[g] = None
            continue
        stayed = sum(
            1
            for aid in members
            if all(membership[s].get(aid) == g for s in snapshots[1:])
        )
        persistence[g] = stayed / len(members)

    return {
        "snapshots": snapshots,
        "membership": membership,
        "transitions": matrices,
        "persistence": persistence,
    }
