"""Propensity-score matching and weighting, null models and perturbations.

Matching is greedy 1:1 nearest-neighbor without replacement on the logit
propensity, with a caliper expressed in logit-SD units.  Weighting fits
one-vs-rest propensities (logistic by default, boosted stumps on request),
normalizes them to sum to one per author, and estimates effects by
weighted least squares on group dummies.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats as sps

from .corpus import Corpus, EligibilityFilter, Paper
from .stats import (
    DesignMatrix,
    build_design,
    boosted_stumps_fit,
    kruskal_wallis,
    logistic_fit,
    ols_fit,
)

DEFAULT_CALIPER_SD = 0.2
DEFAULT_NUMERIC_COVARIATES = ("logcit_past", "p_past")
DEFAULT_CATEGORICAL_COVARIATES = ("year_first", "area_first")


def log_to_percent(delta_log):
    """Translate a log-scale effect into a percentage change."""
    return math.expm1(delta_log)


def _complete_design(rows, numeric, categorical):
    design = build_design(rows, numeric=numeric, categorical=categorical)
    if not design.row_mask.all():
        raise ValueError("covariates must be complete (missing values found)")
    return design


def _logit(p):
    return np.log(p / (1.0 - p))


# -- matching --------------------------------------------------------------


@dataclass
class MatchResult:
    pairs: list  # (treated_id, control_id, |logit gap|)
    caliper: float
    n_treated: int
    n_control: int
    unmatched_treated: int
    unmatched_control: int
    balance: pd.DataFrame  # covariate, smd_pre, smd_post
    att: float
    treated_mean: float
    control_mean: float
    p_paired_t: float
    p_kw: float

    def matched_ids(self):
        return (
            [t for t, _, _ in self.pairs],
            [c for _, c, _ in self.pairs],
        )


def _smd(a, b):
    """Standardized mean difference with the pooled-variance denominator."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    denom = math.sqrt((np.var(a, ddof=1) + np.var(b, ddof=1)) / 2.0)
    if denom == 0:
        return 0.0
    return (float(np.mean(a)) - float(np.mean(b))) / denom


def psm(
    rows,
    treat_on="EP",
    covariates=DEFAULT_NUMERIC_COVARIATES,
    categorical_covariates=DEFAULT_CATEGORICAL_COVARIATES,
    caliper_sd=DEFAULT_CALIPER_SD,
    seed=0,
    outcome="logcit_future",
    propensity_column=None,
):
    """Greedy 1:1 propensity matching without replacement.

    ``treat_on`` is 'EP' or 'ED' (treated = top half of the metric; when
    treating on ED, EP joins the covariates) or a (treated_group,
    control_group) pair of four-quadrant labels.  ``propensity_column``
    overrides the logistic model with a precomputed score (used by unit
    tests and hand-constructed examples).
    """
    rows = rows.reset_index(drop=True)
    numeric = list(covariates)
    if isinstance(treat_on, str) and treat_on in ("EP", "ED"):
        col = "ep_past" if treat_on == "EP" else "ed_past"
        values = rows[col].to_numpy(dtype=float)
        treated = values >= np.median(values)
        if treat_on == "ED" and "ep_past" not in numeric:
            numeric = numeric + ["ep_past"]
    else:
        g_t, g_c = treat_on
        rows = rows[rows["group"].isin([g_t, g_c])].reset_index(drop=True)
        treated = (rows["group"] == g_t).to_numpy()
    if not treated.any() or treated.all():
        raise ValueError("both treatment and control must be nonempty")

    if propensity_column is not None:
        p = rows[propensity_column].to_numpy(dtype=float)
        p = np.clip(p, 1e-6, 1 - 1e-6)
    else:
        design = _complete_design(rows, numeric, list(categorical_covariates))
        model = logistic_fit(design, treated.astype(float))
        p = model.predict_proba(design.X)
    logit = _logit(p)
    sd = float(np.std(logit, ddof=1)) if len(logit) > 1 else 0.0
    caliper = caliper_sd * sd if sd > 0 else caliper_sd

    rng = np.random.default_rng(seed)
    treated_idx = np.flatnonzero(treated)
    control_idx = np.flatnonzero(~treated)
    order = rng.permutation(len(treated_idx))
    ctrl_logit = logit[control_idx]
    available = np.ones(len(control_idx), dtype=bool)

    pairs = []
    ids = rows["author_id"].to_numpy()
    for ti in treated_idx[order]:
        gaps = np.abs(ctrl_logit - logit[ti])
        gaps[~available] = np.inf
        j = int(np.argmin(gaps))
        if gaps[j] <= caliper:
            available[j] = False
            pairs.append((ids[ti], ids[control_idx[j]], float(gaps[j]), ti, control_idx[j]))
    if not pairs:
        raise ValueError("no matches within the caliper; widen caliper_sd")

    t_rows = [ti for *_, ti, _ in pairs]
    c_rows = [ci for *_, _, ci in pairs]
    y_t = rows.loc[t_rows, outcome].to_numpy(dtype=float)
    y_c = rows.loc[c_rows, outcome].to_numpy(dtype=float)
    diffs = y_t - y_c
    att = float(np.mean(diffs))
    n = len(diffs)
    if n > 1 and np.std(diffs, ddof=1) > 0:
        t_stat = att / (np.std(diffs, ddof=1) / math.sqrt(n))
        p_t = float(2.0 * sps.t.sf(abs(t_stat), n - 1))
    else:
        p_t = 1.0 if att == 0 else 0.0
    _, p_kw = kruskal_wallis([y_t, y_c])

    bal = []
    for cov in numeric:
        v = rows[cov].to_numpy(dtype=float)
        pre = _smd(v[treated], v[~treated])
        post = _smd(v[t_rows], v[c_rows])
        bal.append({"covariate": cov, "smd_pre": pre, "smd_post": post})
    bal.append(
        {
            "covariate": "logit_propensity",
            "smd_pre": _smd(logit[treated], logit[~treated]),
            "smd_post": _smd(logit[t_rows], logit[c_rows]),
        }
    )

    return MatchResult(
        pairs=[(t, c, g) for t, c, g, _, _ in pairs],
        caliper=caliper,
        n_treated=int(treated.sum()),
        n_control=int((~treated).sum()),
        unmatched_treated=int(treated.sum()) - n,
        unmatched_control=int((~treated).sum()) - n,
        balance=pd.DataFrame(bal),
        att=att,
        treated_mean=float(np.mean(y_t)),
        control_mean=float(np.mean(y_c)),
        p_paired_t=p_t,
        p_kw=p_kw,
    )


def write_match_csv(result, path):
    df = pd.DataFrame(result.pairs, columns=["treated_id", "control_id", "logit_gap"])
    df.to_csv(path, index=False)


# -- weighting -------------------------------------------------------------


@dataclass
class PswResult:
    estimand: str  # ATE | ATT
    baseline: str
    effects: dict  # group -> {estimate, se, lo, hi, p}
    weights: pd.DataFrame  # author_id, group, weight
    trimmed: int
    method: str
    balance: pd.DataFrame = None

    def effect(self, group):
        return self.effects[group]["estimate"]


def _propensity_matrix(rows, groups, numeric, categorical, method, seed):
    """One-vs-rest membership probabilities, normalized to sum 1 per row."""
    design = _complete_design(rows, list(numeric), list(categorical))
    labels = rows["group"].to_numpy()
    cols = []
    for k, g in enumerate(groups):
        y = (labels == g).astype(float)
        if method == "logistic":
            model = logistic_fit(design, y)
        elif method == "boosted":
            model = boosted_stumps_fit(design, y, trees=100, shrinkage=0.1, seed=seed + k)
        else:
            raise ValueError(f"unknown propensity method {method!r}")
        cols.append(model.predict_proba(design.X))
    P = np.column_stack(cols)
    P = P / P.sum(axis=1, keepdims=True)
    return P


def _weighted_group_balance(rows, numeric, weights, groups):
    bal = []
    labels = rows["group"].to_numpy()
    for cov in numeric:
        v = rows[cov].to_numpy(dtype=float)
        means = []
        for g in groups:
            m = labels == g
            means.append(float(np.average(v[m], weights=weights[m])))
        sd = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
        spread = (max(means) - min(means)) / sd if sd > 0 else 0.0
        bal.append({"covariate": cov, "weighted_mean_spread_smd": spread})
    return pd.DataFrame(bal)


def _weighted_effects(rows, groups, baseline, weights, outcome):
    others = [g for g in groups if g != baseline]
    labels = rows["group"].to_numpy()
    X = np.column_stack(
        [np.ones(len(rows))] + [(labels == g).astype(float) for g in others]
    )
    design = DesignMatrix(names=["intercept"] + others, X=X, row_mask=np.ones(len(rows), bool))
    fit = ols_fit(design, rows[outcome].to_numpy(dtype=float), weights=weights)
    crit = sps.t.ppf(0.975, fit.df_resid) if fit.df_resid > 0 else float("nan")
    effects = {}
    for g in others:
        i = fit.names.index(g)
        est, se = float(fit.coef[i]), float(fit.se[i])
        effects[g] = {
            "estimate": est,
            "se": se,
            "lo": est - crit * se,
            "hi": est + crit * se,
            "p": float(fit.p[i]),
        }
    return effects


def _trim(weights, percentile=99.0):
    cap = float(np.percentile(weights, percentile))
    trimmed = int(np.sum(weights > cap))
    return np.minimum(weights, cap), trimmed


def psw_ate(
    rows,
    groups=("A", "B", "C", "D"),
    baseline="D",
    covariates=DEFAULT_NUMERIC_COVARIATES,
    categorical_covariates=DEFAULT_CATEGORICAL_COVARIATES,
    method="logistic",
    outcome="logcit_future",
    seed=0,
    trim_percentile=99.0,
):
    """Inverse-propensity ATE of each group versus the baseline."""
    groups = [g for g in groups if (rows["group"] == g).any()]
    if len(groups) < 2 or baseline not in groups:
        raise ValueError("need >= 2 populated groups including the baseline")
    rows = rows[rows["group"].isin(groups)].reset_index(drop=True)
    counts = rows["group"].value_counts()
    small = [g for g in groups if counts.get(g, 0) < 2]
    if small:
        raise ValueError(f"group(s) too small: {', '.join(small)}")

    P = _propensity_matrix(rows, groups, covariates, categorical_covariates, method, seed)
    own = np.array([groups.index(g) for g in rows["group"]])
    w = 1.0 / P[np.arange(len(rows)), own]
    w, trimmed = _trim(w, trim_percentile)
    effects = _weighted_effects(rows, groups, baseline, w, outcome)
    return PswResult(
        estimand="ATE",
        baseline=baseline,
        effects=effects,
        weights=pd.DataFrame(
            {"author_id": rows["author_id"], "group": rows["group"], "weight": w}
        ),
        trimmed=trimmed,
        method=method,
        balance=_weighted_group_balance(rows, covariates, w, groups),
    )


def psw_att(
    rows,
    treated="A",
    control=None,
    covariates=DEFAULT_NUMERIC_COVARIATES,
    categorical_covariates=DEFAULT_CATEGORICAL_COVARIATES,
    method="logistic",
    outcome="logcit_future",
    seed=0,
    trim_percentile=99.0,
):
    """ATT of the treated group versus the control group (or everyone else)."""
    if control is None:
        rows = rows[rows["group"].notna() & (rows["group"] != "excluded")]
        rows = rows.copy()
        rows.loc[rows["group"] != treated, "group"] = "rest"
        control = "rest"
    else:
        rows = rows[rows["group"].isin([treated, control])].copy()
    rows = rows.reset_index(drop=True)
    groups = [treated, control]
    counts = rows["group"].value_counts()
    if any(counts.get(g, 0) < 2 for g in groups):
        raise ValueError("both groups need >= 2 members")

    P = _propensity_matrix(rows, groups, covariates, categorical_covariates, method, seed)
    is_treated = (rows["group"] == treated).to_numpy()
    w = np.where(is_treated, 1.0, P[:, 0] / P[:, 1])
    w, trimmed = _trim(w, trim_percentile)
    effects = _weighted_effects(rows, groups, control, w, outcome)
    return PswResult(
        estimand="ATT",
        baseline=control,
        effects=effects,
        weights=pd.DataFrame(
            {"author_id": rows["author_id"], "group": rows["group"], "weight": w}
        ),
        trimmed=trimmed,
        method=method,
        balance=_weighted_group_balance(rows, covariates, w, groups),
    )


def write_weights_csv(result, path):
    result.weights.to_csv(path, index=False)


# -- null models -----------------------------------------------------------


def null_author_shuffle(rows, seed, column="logcit_future"):
    """Permute the future-outcome column uniformly; everything else fixed."""
    if column not in rows.columns:
        raise KeyError(f"unknown column {column!r}")
    rng = np.random.default_rng(seed)
    out = rows.copy()
    out[column] = rng.permutation(out[column].to_numpy())
    return out


def null_paper_shuffle(corpus, seed, swaps_per_edge=10, filters=EligibilityFilter()):
    """Randomize the author-paper incidence within each calendar year.

    Repeated double-edge swaps preserve per-author yearly paper counts and
    per-paper author counts exactly; swaps that would give a paper the same
    author twice are rejected.  Only author slots held by career (eligible)
    authors take part in swaps, so incidental authorship — one-off authors
    below the eligibility threshold — stays fixed.  Years with fewer than
    two swappable edges are left unchanged and counted in the returned
    corpus's warnings.
    """
    rng = np.random.default_rng(seed)
    eligible = set(corpus.careers)
    by_year = {}
    for pid in sorted(corpus.papers):
        p = corpus.papers[pid]
        by_year.setdefault(p.date.year, []).append(p)

    new_authors = {}  # paper_id -> list of authors
    skipped_years = 0
    for year in sorted(by_year):
        papers = by_year[year]
        edges = []  # (paper position in `papers`, author slot)
        for i, p in enumerate(papers):
            for s, a in enumerate(p.authors):
                if a in eligible:
                    edges.append((i, s))
        assign = [list(p.authors) for p in papers]
        if len(edges) < 2:
            skipped_years += 1
            for p, a in zip(papers, assign):
                new_authors[p.paper_id] = a
            continue
        member = [set(a) for a in assign]
        n_swaps = swaps_per_edge * len(edges)
        picks = rng.integers(0, len(edges), size=(n_swaps, 2))
        for e1, e2 in picks:
            if e1 == e2:
                continue
            p1, s1 = edges[e1]
            p2, s2 = edges[e2]
            if p1 == p2:
                continue
            a1, a2 = assign[p1][s1], assign[p2][s2]
            if a1 == a2 or a1 in member[p2] or a2 in member[p1]:
                continue
            member[p1].discard(a1)
            member[p2].discard(a2)
            member[p1].add(a2)
            member[p2].add(a1)
            assign[p1][s1], assign[p2][s2] = a2, a1
        for p, a in zip(papers, assign):
            new_authors[p.paper_id] = a

    shuffled = []
    for pid in sorted(corpus.papers):
        p = corpus.papers[pid]
        authors = tuple(new_authors[pid])
        if authors == p.authors:
            shuffled.append(p)
        else:
            shuffled.append(
                Paper(
                    paper_id=p.paper_id,
                    date=p.date,
                    authors=authors,
                    codes=p.codes,
                    refs=p.refs,
                    institutions=p.institutions,
                )
            )
    warnings = dict(corpus.warnings)
    if skipped_years:
        warnings["unshuffled_years"] = skipped_years
    return Corpus.from_papers(shuffled, filters, warnings)


def null_exceedance_summary(observed, null_estimates):
    """Exceedance report: how often |null| reaches the observed |effect|."""
    null_estimates = [float(v) for v in null_estimates]
    exceed = sum(1 for v in null_estimates if abs(v) >= abs(observed))
    return {
        "observed": float(observed),
        "replicates": len(null_estimates),
        "exceedances": exceed,
        "exceedance_rate": exceed / len(null_estimates) if null_estimates else None,
        "null_abs_p95": float(np.percentile(np.abs(null_estimates), 95))
        if null_estimates
        else None,
    }


def replicated(fn, replicates, master_seed, threads=1):
    """Run fn(index, seed) over derived per-replicate seeds, order-stable."""
    seeds = [
        int(s.generate_state(1)[0])
        for s in np.random.SeedSequence(master_seed).spawn(replicates)
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda i: fn(i, seeds[i]), range(replicates)))
    return [fn(i, seeds[i]) for i in range(replicates)]


# -- perturbation ----------------------------------------------------------


def perturb_gaussian(rows, column, sigma, seed):
    """Add N(0, sigma^2) noise to one column; values are not re-clipped."""
    if column not in rows.columns:
        raise KeyError(f"unknown column {column!r}")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    out = rows.copy()
    rng = np.random.default_rng(seed)
    out[column] = out[column].to_numpy(dtype=float) + rng.normal(0.0, sigma, len(out))
    return out


# -- drastic strategy changes ----------------------------------------------


def drastic_change_analysis(
    rows_pre,
    rows_post,
    seed=0,
    covariates=DEFAULT_NUMERIC_COVARIATES,
    categorical_covariates=DEFAULT_CATEGORICAL_COVARIATES,
    outcome="logcit_future",
    transitions=(("D", "A"), ("A", "D")),
):
    """Outcome consequences of switching strategy between two split points.

    For each (origin, destination) transition: the fraction of the origin
    group that switched, their mean within-person change in future-vs-past
    impact, and a PSW comparison of switchers against same-origin stayers
    on the later split's outcome.
    """
    merged = rows_pre.merge(rows_post, on="author_id", suffixes=("_pre", "_post"))
    results = {}
    for origin, dest in transitions:
        in_origin = merged[merged["group_pre"] == origin]
        switchers = in_origin[in_origin["group_post"] == dest]
        stayers = in_origin[in_origin["group_post"] == origin]
        entry = {
            "origin": origin,
            "destination": dest,
            "n_origin": len(in_origin),
            "n_switchers": len(switchers),
            "fraction_of_origin": len(switchers) / len(in_origin) if len(in_origin) else None,
        }
        if len(switchers):
            delta = (
                switchers[f"{outcome}_post"] - switchers["logcit_past_post"]
            ).to_numpy(dtype=float)
            entry["mean_within_person_change"] = float(np.mean(delta))
        else:
            entry["mean_within_person_change"] = None
        if len(switchers) >= 2 and len(stayers) >= 2:
            frame = pd.concat([switchers, stayers]).reset_index(drop=True)
            frame = frame.rename(
                columns={f"{c}_post": c for c in
                         set(list(covariates) + list(categorical_covariates) + [outcome, "logcit_past"])}
            )
            frame["group"] = np.where(
                frame["group_post"] == dest, "switched", "stayed"
            )
            psw = psw_att(
                frame,
                treated="switched",
                control="stayed",
                covariates=covariates,
                categorical_covariates=categorical_covariates,
                outcome=outcome,
                seed=seed,
            )
            eff = psw.effects["switched"]
            entry["psw_effect"] = eff["estimate"]
            entry["psw_p"] = eff["p"]
            entry["psw_percent"] = log_to_percent(eff["estimate"])
        else:
            entry["psw_effect"] = entry["psw_p"] = entry["psw_percent"] = None
        results[f"{origin}->{dest}"] = entry
    return results
