"""Self-contained statistical estimators.

Linear and logistic regression (QR / IRLS), boosted stumps on Bernoulli
deviance, two-sample K-S and Kruskal-Wallis tests, E-values, standardized
coefficients, and OLS-based mediation with percentile bootstrap.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import special, stats as sps


class RankDeficiencyError(ValueError):
    pass


class SeparationError(RuntimeError):
    """Perfect separation in logistic regression (diverging coefficients)."""


# -- design matrices -------------------------------------------------------


@dataclass
class DesignMatrix:
    names: list
    X: np.ndarray
    row_mask: np.ndarray  # complete-case mask over the source frame


def build_design(df, numeric=(), categorical=(), intercept=True):
    """Numeric columns as-is; categoricals expanded to indicators with the
    lexicographically smallest level dropped as reference.  Rows with any
    missing value are masked out.  Rank deficiency raises, naming the
    collinear columns."""
    cols = list(numeric) + list(categorical)
    missing = [c for c in cols if c not in df.columns]
    if missing:
        raise KeyError(f"missing variable(s): {', '.join(missing)}")
    mask = np.ones(len(df), dtype=bool)
    for c in cols:
        mask &= df[c].notna().to_numpy()
    sub = df.loc[mask]

    names = []
    blocks = []
    if intercept:
        names.append("intercept")
        blocks.append(np.ones((len(sub), 1)))
    for c in numeric:
        names.append(c)
        blocks.append(sub[c].to_numpy(dtype=float).reshape(-1, 1))
    for c in categorical:
        levels = sorted(map(str, sub[c].unique()))
        vals = sub[c].astype(str).to_numpy()
        for lvl in levels[1:]:  # smallest level is the reference
            names.append(f"{c}[{lvl}]")
            blocks.append((vals == lvl).astype(float).reshape(-1, 1))
    X = np.hstack(blocks) if blocks else np.empty((len(sub), 0))

    if X.shape[1]:
        r_diag = np.abs(np.diag(np.linalg.qr(X, mode="r")))
        scale = max(X.shape) * np.finfo(float).eps * (r_diag.max() if len(r_diag) else 1.0)
        # columns beyond the row count cannot be independent
        bad = [
            names[i]
            for i in range(len(names))
            if i >= len(r_diag) or r_diag[i] <= scale
        ]
        if bad:
            raise RankDeficiencyError(f"collinear column(s): {', '.join(bad)}")
    return DesignMatrix(names=names, X=X, row_mask=mask)


# -- OLS -------------------------------------------------------------------

STAR_THRESHOLDS = ((0.01, "***"), (0.05, "**"), (0.1, "*"))


def significance_stars(p):
    for thr, stars in STAR_THRESHOLDS:
        if p < thr:
            return stars
    return ""


@dataclass
class RegressionResult:
    names: list
    coef: np.ndarray
    se: np.ndarray
    t: np.ndarray
    p: np.ndarray
    r2: float
    n: int
    df_resid: int
    residuals: np.ndarray = None

    def stars(self):
        return [significance_stars(p) for p in self.p]

    def coefficient(self, name):
        return float(self.coef[self.names.index(name)])

    def p_value(self, name):
        return float(self.p[self.names.index(name)])

    def table(self):
        return pd.DataFrame(
            {
                "term": self.names,
                "estimate": self.coef,
                "se": self.se,
                "t": self.t,
                "p_value": self.p,
                "stars": self.stars(),
            }
        )


def ols_fit(design, response, weights=None):
    """(Weighted) least squares via QR, with classical homoskedastic SEs."""
    X = design.X if isinstance(design, DesignMatrix) else np.asarray(design, float)
    names = (
        design.names
        if isinstance(design, DesignMatrix)
        else [f"x{i}" for i in range(X.shape[1])]
    )
    y = np.asarray(response, dtype=float)
    n, k = X.shape
    if n < k:
        raise ValueError(f"{n} rows < {k} columns")
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        sw = np.sqrt(w)
        Xw, yw = X * sw[:, None], y * sw
    else:
        w = None
        Xw, yw = X, y

    Q, R = np.linalg.qr(Xw)
    r_diag = np.abs(np.diag(R))
    scale = max(Xw.shape) * np.finfo(float).eps * (r_diag.max() if len(r_diag) else 1.0)
    bad = [names[i] for i in range(k) if r_diag[i] <= scale]
    if bad:
        raise RankDeficiencyError(f"collinear column(s): {', '.join(bad)}")
    coef = np.linalg.solve(R, Q.T @ yw)

    resid = y - X @ coef
    df_resid = n - k
    if w is None:
        rss = float(resid @ resid)
        ybar = float(np.mean(y))
        tss = float(np.sum((y - ybar) ** 2))
    else:
        rss = float(np.sum(w * resid**2))
        ybar = float(np.sum(w * y) / np.sum(w))
        tss = float(np.sum(w * (y - ybar) ** 2))
    sigma2 = rss / df_resid if df_resid > 0 else float("nan")
    Rinv = np.linalg.solve(R, np.eye(k))
    cov = sigma2 * (Rinv @ Rinv.T)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = coef / se
    p = 2.0 * sps.t.sf(np.abs(t), df_resid) if df_resid > 0 else np.full(k, np.nan)
    r2 = 1.0 - rss / tss if tss > 0 else 0.0
    return RegressionResult(
        names=list(names), coef=coef, se=se, t=t, p=p, r2=r2, n=n,
        df_resid=df_resid, residuals=resid,
    )


# -- model catalogue -------------------------------------------------------

_BASE_CONTROLS = dict(numeric=["logcit_past", "p_past"], categorical=["year_first", "area_first"])

MODEL_SPECS = ("S3", "S4", "S5", "S6", "S8", "S9", "S10", "S11")


def run_model(rows, spec, extra_covariates=(), outcome=None, weights=None):
    """Fit one of the catalogued row-level regressions.

    S3: past EP plus the usual controls; S4: S3 plus past ED; S5: EP and ED
    alone; S6: group dummies (baseline D) plus controls; S8: S4 with future
    EP/ED; S9: S4's regressors against a caller-named outcome; S10/S11: S4
    plus extra confounder covariates.
    """
    if spec not in MODEL_SPECS:
        raise ValueError(f"unknown model spec {spec!r}")
    extra = list(extra_covariates)
    categorical = []
    if spec == "S5":
        numeric = ["ep_past", "ed_past"]
    elif spec == "S3":
        numeric = _BASE_CONTROLS["numeric"] + ["ep_past"]
        categorical = _BASE_CONTROLS["categorical"]
    elif spec in ("S4", "S9", "S10", "S11"):
        numeric = _BASE_CONTROLS["numeric"] + ["ep_past", "ed_past"] + extra
        categorical = _BASE_CONTROLS["categorical"]
    elif spec == "S8":
        numeric = _BASE_CONTROLS["numeric"] + ["ep_future", "ed_future"]
        categorical = _BASE_CONTROLS["categorical"]
    elif spec == "S6":
        numeric = _BASE_CONTROLS["numeric"]
        categorical = _BASE_CONTROLS["categorical"] + ["group"]
        rows = rows[rows["group"].isin(["A", "B", "C", "D"])].copy()
        # baseline D: recode so that D sorts first and is dropped
        rows["group"] = rows["group"].map({"D": "0D", "A": "A", "B": "B", "C": "C"})

    if outcome is None:
        if spec == "S9":
            raise ValueError("spec S9 needs an explicit outcome column")
        outcome = "logcit_future"
    if outcome not in rows.columns:
        raise KeyError(f"missing variable(s): {outcome}")

    ok = rows[outcome].notna()
    rows = rows[ok]
    design = build_design(rows, numeric=numeric, categorical=categorical)
    y = rows.loc[design.row_mask, outcome].to_numpy(dtype=float)
    w = None
    if weights is not None:
        w = np.asarray(weights, float)[ok.to_numpy()][design.row_mask]
    return ols_fit(design, y, weights=w)


# -- logistic regression ---------------------------------------------------

PROB_CLIP = 1e-6


@dataclass
class LogisticModel:
    names: list
    coef: np.ndarray
    converged: bool
    n_iter: int

    def predict_logodds(self, X):
        return np.asarray(X, float) @ self.coef

    def predict_proba(self, X):
        eta = np.clip(self.predict_logodds(X), -700, 700)
        p = 1.0 / (1.0 + np.exp(-eta))
        return np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)


def logistic_fit(design, labels, weights=None, max_iter=100, tol=1e-8):
    """Maximum-likelihood logistic regression via IRLS.

    Raises SeparationError when coefficients diverge (perfect separation);
    the caller should trim covariates or apply a caliper instead.
    """
    X = design.X if isinstance(design, DesignMatrix) else np.asarray(design, float)
    names = (
        design.names
        if isinstance(design, DesignMatrix)
        else [f"x{i}" for i in range(X.shape[1])]
    )
    y = np.asarray(labels, dtype=float)
    if set(np.unique(y)) - {0.0, 1.0}:
        raise ValueError("labels must be binary 0/1")
    if y.min() == y.max():
        raise ValueError("both classes must be present")
    w = np.ones(len(y)) if weights is None else np.asarray(weights, float)

    beta = np.zeros(X.shape[1])
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = np.clip(X @ beta, -700, 700)
        p = 1.0 / (1.0 + np.exp(-eta))
        v = np.clip(p * (1.0 - p), 1e-10, None) * w
        z = eta + (y - p) / np.clip(p * (1.0 - p), 1e-10, None)
        sw = np.sqrt(v)
        Q, R = np.linalg.qr(X * sw[:, None])
        r_diag = np.abs(np.diag(R))
        if np.any(r_diag <= 1e-12 * max(r_diag.max(), 1.0)):
            raise RankDeficiencyError("rank-deficient design in IRLS step")
        new_beta = np.linalg.solve(R, Q.T @ (z * sw))
        step = np.max(np.abs(new_beta - beta))
        beta = new_beta
        if step < tol:
            converged = True
            break
        if np.max(np.abs(beta)) > 1e4:
            raise SeparationError(
                "coefficients diverging; likely perfect separation "
                "(consider a caliper or trimming)"
            )
    if not converged:
        eta = np.clip(X @ beta, -700, 700)
        p = 1.0 / (1.0 + np.exp(-eta))
        if np.max(np.abs(y - p)) < 1e-8:
            raise SeparationError(
                "perfect separation: every observation fitted exactly "
                "(consider a caliper or trimming)"
            )
    return LogisticModel(names=list(names), coef=beta, converged=converged, n_iter=it)


# -- boosted stumps --------------------------------------------------------


@dataclass
class BoostedStumpsModel:
    base_logodds: float
    stumps: list  # (feature, threshold, left_value, right_value)
    shrinkage: float

    def predict_logodds(self, X):
        X = np.asarray(X, float)
        eta = np.full(len(X), self.base_logodds)
        for feat, thr, left, right in self.stumps:
            eta += self.shrinkage * np.where(X[:, feat] <= thr, left, right)
        return eta

    def predict_proba(self, X):
        eta = np.clip(self.predict_logodds(X), -700, 700)
        return np.clip(1.0 / (1.0 + np.exp(-eta)), PROB_CLIP, 1.0 - PROB_CLIP)


def bernoulli_deviance(y, eta):
    eta = np.clip(eta, -700, 700)
    return float(2.0 * np.sum(np.log1p(np.exp(eta)) - y * eta))


def boosted_stumps_fit(design, labels, trees=100, shrinkage=0.1, seed=0):
    """Gradient boosting on Bernoulli deviance with depth-1 trees.

    Split candidates are midpoints of consecutive sorted feature values;
    leaf updates are Newton steps.  Ties between candidate splits break
    deterministically by (gain, feature, threshold).
    """
    X = design.X if isinstance(design, DesignMatrix) else np.asarray(design, float)
    y = np.asarray(labels, dtype=float)
    if trees < 1:
        raise ValueError("trees must be >= 1")
    if not 0 < shrinkage <= 1:
        raise ValueError("shrinkage must be in (0, 1]")
    if y.min() == y.max():
        raise ValueError("labels are constant")
    prevalence = float(np.mean(y))
    base = math.log(prevalence / (1.0 - prevalence))
    eta = np.full(len(y), base)
    stumps = []
    features = [f for f in range(X.shape[1]) if len(np.unique(X[:, f])) > 1]
    for _ in range(trees):
        p = 1.0 / (1.0 + np.exp(-np.clip(eta, -700, 700)))
        grad = y - p
        hess = np.clip(p * (1.0 - p), 1e-10, None)
        best = None
        for feat in features:
            order = np.argsort(X[:, feat], kind="stable")
            xs = X[order, feat]
            gs = np.cumsum(grad[order])
            hs = np.cumsum(hess[order])
            g_tot, h_tot = gs[-1], hs[-1]
            boundary = np.nonzero(np.diff(xs) > 0)[0]
            for idx in boundary:
                gl, hl = gs[idx], hs[idx]
                gr, hr = g_tot - gl, h_tot - hl
                gain = gl * gl / hl + gr * gr / hr
                thr = 0.5 * (xs[idx] + xs[idx + 1])
                cand = (gain, -feat, -thr)
                if best is None or cand > best[0]:
                    best = (cand, feat, thr, gl / hl, gr / hr)
        if best is None:
            break
        _, feat, thr, left, right = best
        stumps.append((feat, thr, left, right))
        eta = eta + shrinkage * np.where(X[:, feat] <= thr, left, right)
    return BoostedStumpsModel(base_logodds=base, stumps=stumps, shrinkage=shrinkage)


# -- assorted statistics ---------------------------------------------------


def standardized_coef(result, design, response):
    """coef * SD(x) / SD(y) with population SDs over the fitted rows."""
    X = design.X if isinstance(design, DesignMatrix) else np.asarray(design, float)
    y = np.asarray(response, dtype=float)
    sd_y = float(np.std(y))
    if sd_y == 0:
        raise ValueError("zero-variance response")
    out = {}
    for i, name in enumerate(result.names):
        if name == "intercept":
            continue
        sd_x = float(np.std(X[:, i]))
        if sd_x == 0:
            raise ValueError(f"zero-variance column {name!r}")
        out[name] = float(result.coef[i]) * sd_x / sd_y
    return out


def e_value(coef, sd_outcome):
    """Minimum confounder strength (risk-ratio scale) able to explain away a
    standardized effect of |coef| / sd_outcome."""
    if sd_outcome <= 0:
        raise ValueError("sd_outcome must be positive")
    d = abs(coef) / sd_outcome
    rr = math.exp(0.91 * d)
    if rr <= 1.0:
        return 1.0
    return rr + math.sqrt(rr * (rr - 1.0))


def pearson(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("need equal-length samples of size >= 2")
    if np.std(x) == 0 or np.std(y) == 0:
        raise ValueError("zero-variance sample")
    return float(np.corrcoef(x, y)[0, 1])


def ks_two_sample(x, y):
    """Two-sample Kolmogorov-Smirnov: sup ECDF gap and the asymptotic
    p-value at effective size n_x n_y / (n_x + n_y)."""
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    if len(x) == 0 or len(y) == 0:
        raise ValueError("both samples must be nonempty")
    grid = np.concatenate([x, y])
    cdf_x = np.searchsorted(x, grid, side="right") / len(x)
    cdf_y = np.searchsorted(y, grid, side="right") / len(y)
    d = float(np.max(np.abs(cdf_x - cdf_y)))
    en = math.sqrt(len(x) * len(y) / (len(x) + len(y)))
    p = float(special.kolmogorov(en * d))
    return d, min(max(p, 0.0), 1.0)


def kruskal_wallis(groups):
    """Rank-based H with tie correction; p from chi-square with k-1 df."""
    groups = [np.asarray(g, dtype=float) for g in groups]
    if len(groups) < 2 or any(len(g) == 0 for g in groups):
        raise ValueError("need at least two nonempty groups")
    pooled = np.concatenate(groups)
    n = len(pooled)
    ranks = sps.rankdata(pooled)
    if np.all(pooled == pooled[0]):
        return 0.0, 1.0
    h = 0.0
    start = 0
    for g in groups:
        r = ranks[start : start + len(g)]
        h += r.sum() ** 2 / len(g)
        start += len(g)
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(counts**3 - counts))
    correction = 1.0 - tie_term / (n**3 - n)
    if correction <= 0:
        return 0.0, 1.0
    h /= correction
    p = float(sps.chi2.sf(h, len(groups) - 1))
    return float(h), p


# -- mediation -------------------------------------------------------------


def mediation(
    rows,
    treatment,
    mediator,
    outcome,
    controls=(),
    categorical_controls=(),
    bootstrap_b=1000,
    seed=0,
    min_rows=10,
    collinearity_threshold=0.99,
):
    """Product-of-coefficients mediation with percentile bootstrap CIs.

    Mediator model: M ~ T + controls; outcome model: Y ~ T + M + controls.
    ACME = a*b, ADE = the direct coefficient, total = ACME + ADE exactly.
    """
    cols = [treatment, mediator, outcome] + list(controls) + list(categorical_controls)
    data = rows.dropna(subset=[c for c in cols if c in rows.columns]).reset_index(drop=True)
    if len(data) < min_rows:
        raise ValueError(f"only {len(data)} complete cases (minimum {min_rows})")
    t_vals = data[treatment].to_numpy(dtype=float)
    m_vals = data[mediator].to_numpy(dtype=float)
    if np.std(t_vals) > 0 and np.std(m_vals) > 0:
        r = abs(pearson(t_vals, m_vals))
        if r > collinearity_threshold:
            warnings.warn(
                f"treatment and mediator nearly collinear (|r| = {r:.4f})",
                stacklevel=2,
            )

    def estimate(frame):
        med_design = build_design(
            frame, numeric=[treatment] + list(controls), categorical=categorical_controls
        )
        a = ols_fit(med_design, frame.loc[med_design.row_mask, mediator].to_numpy(float))
        out_design = build_design(
            frame,
            numeric=[treatment, mediator] + list(controls),
            categorical=categorical_controls,
        )
        c = ols_fit(out_design, frame.loc[out_design.row_mask, outcome].to_numpy(float))
        acme = a.coefficient(treatment) * c.coefficient(mediator)
        ade = c.coefficient(treatment)
        return acme, ade

    acme, ade = estimate(data)
    total = acme + ade

    rng = np.random.default_rng(seed)
    draws = np.empty((bootstrap_b, 3))
    b_done = 0
    for rep in range(bootstrap_b):
        rep_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(rep,)))
        idx = rep_rng.integers(0, len(data), size=len(data))
        sample = data.iloc[idx].reset_index(drop=True)
        try:
            a_b, d_b = estimate(sample)
        except (RankDeficiencyError, ValueError):
            continue
        draws[b_done] = (a_b, d_b, a_b + d_b)
        b_done += 1
    draws = draws[:b_done]
    del rng

    def ci_and_p(col):
        vals = draws[:, col]
        lo, hi = np.percentile(vals, [2.5, 97.5])
        frac_le = np.mean(vals <= 0)
        frac_ge = np.mean(vals >= 0)
        p = min(1.0, 2.0 * min(frac_le, frac_ge))
        return (float(lo), float(hi)), float(p)

    acme_ci, acme_p = ci_and_p(0)
    ade_ci, ade_p = ci_and_p(1)
    total_ci, total_p = ci_and_p(2)
    return {
        "acme": acme,
        "ade": ade,
        "total": total,
        "acme_ci": acme_ci,
        "ade_ci": ade_ci,
        "total_ci": total_ci,
        "acme_p": acme_p,
        "ade_p": ade_p,
        "total_p": total_p,
        "n": len(data),
        "bootstrap_b": b_done,
        "seed": seed,
    }
