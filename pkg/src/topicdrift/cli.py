"""Command-line pipeline: validate / synth / graph / metrics / regress /
psm / psw / null / sweep / report.

Every command is driven by a TOML config (see docs/formats.md), is
idempotent for a fixed config and seed, and writes a manifest with the
config hash and a digest of every file it produced.  Exit codes:
0 success, 1 validation/config failure, 2 analysis error.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys

import numpy as np
import pandas as pd

from . import __version__
from .causal import (
    null_author_shuffle,
    null_exceedance_summary,
    null_paper_shuffle,
    psm,
    psw_ate,
    replicated,
    write_match_csv,
    write_weights_csv,
)
from .config import ConfigError, RunConfig, load_config
from .corpus import CodeScheme, CorpusError, FULL, load_corpus, write_corpus
from .metrics import LookbackWindow, SplitPoint, build_rows, temporal_trajectories
from .stats import SeparationError, run_model
from .synth import SyntheticConfig, generate_synthetic
from .topicgraph import DistanceProvider, build_graph

SWEEP_DIMENSIONS = ("split", "window", "quantile", "digits")
DIGIT_COMBOS = ((2, 2), (2, 4), (4, 4), (4, 6), (2, 6))


class PipelineError(RuntimeError):
    pass


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(cfg, stage, outputs, warnings=None):
    path = os.path.join(cfg.out_dir, f"manifest_{stage}.json")
    manifest = {
        "stage": stage,
        "version": __version__,
        "config_digest": cfg.digest(),
        "seed": cfg.seed,
        "outputs": {os.path.basename(p): _sha256(p) for p in sorted(outputs)},
        "warnings": warnings or {},
    }
    _write_json(manifest, path)
    return path


def _load(cfg):
    if not cfg.corpus_path:
        raise PipelineError("no corpus.path configured; run `synth` or point corpus.path at a JSONL file")
    if not os.path.exists(cfg.corpus_path):
        raise CorpusError(f"corpus file not found: {cfg.corpus_path} (produce it with `synth`)")
    return load_corpus(cfg.corpus_path, cfg.scheme, cfg.filters)


def _provider(cfg, corpus, scheme=None):
    graph = build_graph(corpus, scheme or cfg.scheme, cfg.graph_kind)
    return DistanceProvider(graph, metric=cfg.metric)


def _rows(cfg, corpus, provider, scheme=None, window=None, split=None, quantile=None):
    return build_rows(
        corpus,
        provider,
        scheme or cfg.scheme,
        window=window or cfg.window,
        split=split or cfg.split,
        impact_kind=cfg.impact,
        ed_mode=cfg.ed_mode,
        quantile_pct=cfg.quantile if quantile is None else quantile,
        min_past=cfg.min_past,
        min_future=cfg.min_future,
        threads=cfg.threads,
    )


# -- commands --------------------------------------------------------------


def cmd_validate(cfg, args):
    corpus = _load(cfg)
    report = corpus.validation_report()
    path = os.path.join(cfg.out_dir, "validation.json")
    _write_json(report, path)
    _write_manifest(cfg, "validate", [path], report["warnings"])
    print(f"validate: {report['papers']} papers, {report['authors']} authors")
    return 0


def _synth_config(cfg):
    section = dict(cfg.synth)
    if "ed_targets" in section:
        section["ed_targets"] = tuple(section["ed_targets"])
    if "topic_epoch" in section and isinstance(section["topic_epoch"], str):
        section["topic_epoch"] = datetime.date.fromisoformat(section["topic_epoch"])
    try:
        return SyntheticConfig(**section)
    except TypeError as exc:
        raise ConfigError(f"[synth]: {exc}") from exc


def cmd_synth(cfg, args):
    corpus, manifest = generate_synthetic(_synth_config(cfg), cfg.seed)
    corpus_path = os.path.join(cfg.out_dir, "corpus.jsonl")
    manifest_path = os.path.join(cfg.out_dir, "synth_manifest.json")
    write_corpus(corpus, corpus_path)
    _write_json(manifest, manifest_path)
    _write_manifest(cfg, "synth", [corpus_path, manifest_path])
    print(f"synth: {manifest['counts']['total_papers']} papers for "
          f"{manifest['counts']['authors']} authors -> {corpus_path}")
    return 0


def cmd_graph(cfg, args):
    corpus = _load(cfg)
    graph = build_graph(corpus, cfg.scheme, cfg.graph_kind)
    edges = os.path.join(cfg.out_dir, "graph_edges.csv")
    strengths = os.path.join(cfg.out_dir, "graph_strengths.csv")
    graph.write_edges_csv(edges)
    graph.write_strengths_csv(strengths)
    _write_manifest(cfg, "graph", [edges, strengths])
    print(f"graph: {len(graph.nodes)} topics -> {edges}")
    return 0


def cmd_metrics(cfg, args):
    corpus = _load(cfg)
    rows = _rows(cfg, corpus, _provider(cfg, corpus))
    path = os.path.join(cfg.out_dir, "rows.csv")
    rows.to_csv(path, index=False)
    _write_manifest(cfg, "metrics", [path])
    print(f"metrics: {len(rows)} author rows -> {path}")
    return 0


def cmd_regress(cfg, args):
    corpus = _load(cfg)
    rows = _rows(cfg, corpus, _provider(cfg, corpus))
    outputs = []
    for spec in cfg.analysis.regressions:
        fit = run_model(rows, spec)
        path = os.path.join(cfg.out_dir, f"regress_{spec}.csv")
        fit.table().to_csv(path, index=False)
        outputs.append(path)
        print(f"regress {spec}: n={fit.n} r2={fit.r2:.4f} -> {path}")
    _write_manifest(cfg, "regress", outputs)
    return 0


def cmd_psm(cfg, args):
    corpus = _load(cfg)
    rows = _rows(cfg, corpus, _provider(cfg, corpus))
    result = psm(
        rows,
        treat_on=cfg.psm_treat_on,
        caliper_sd=cfg.psm_caliper_sd,
        seed=cfg.seed,
        outcome="logcit_future",
    )
    pairs = os.path.join(cfg.out_dir, "psm_pairs.csv")
    balance = os.path.join(cfg.out_dir, "psm_balance.csv")
    summary = os.path.join(cfg.out_dir, "psm_summary.json")
    write_match_csv(result, pairs)
    result.balance.to_csv(balance, index=False)
    _write_json(
        {
            "att": result.att,
            "treated_mean": result.treated_mean,
            "control_mean": result.control_mean,
            "p_paired_t": result.p_paired_t,
            "p_kw": result.p_kw,
            "caliper": result.caliper,
            "pairs": len(result.pairs),
            "unmatched_treated": result.unmatched_treated,
        },
        summary,
    )
    _write_manifest(cfg, "psm", [pairs, balance, summary])
    print(f"psm: {len(result.pairs)} pairs, ATT={result.att:.4f}")
    return 0


def _run_psw(cfg, rows):
    return psw_ate(
        rows,
        baseline=cfg.psw_baseline,
        method=cfg.psw_method,
        outcome="logcit_future",
        seed=cfg.seed,
    )


def cmd_psw(cfg, args):
    corpus = _load(cfg)
    rows = _rows(cfg, corpus, _provider(cfg, corpus))
    result = _run_psw(cfg, rows)
    weights = os.path.join(cfg.out_dir, "psw_weights.csv")
    summary = os.path.join(cfg.out_dir, "psw_summary.json")
    write_weights_csv(result, weights)
    _write_json(
        {
            "estimand": result.estimand,
            "baseline": result.baseline,
            "method": result.method,
            "effects": result.effects,
            "trimmed_weights": result.trimmed,
        },
        summary,
    )
    _write_manifest(cfg, "psw", [weights, summary])
    for g, eff in sorted(result.effects.items()):
        print(f"psw: ATE[{g} vs {result.baseline}] = {eff['estimate']:.4f} "
              f"[{eff['lo']:.4f}, {eff['hi']:.4f}]")
    return 0


def cmd_null(cfg, args):
    replicates = args.replicates or cfg.analysis.nullmodels
    if replicates < 1:
        raise PipelineError("set --replicates or analysis.nullmodels > 0")
    target_group = args.group
    corpus = _load(cfg)
    provider = _provider(cfg, corpus)
    rows = _rows(cfg, corpus, provider)
    observed = _run_psw(cfg, rows).effect(target_group)

    def author_rep(i, seed):
        return _run_psw(cfg, null_author_shuffle(rows, seed)).effect(target_group)

    def paper_rep(i, seed):
        shuffled = null_paper_shuffle(corpus, seed, filters=cfg.filters)
        srows = _rows(cfg, shuffled, provider)
        try:
            return _run_psw(cfg, srows).effect(target_group)
        except (ValueError, SeparationError):
            # a randomized incidence can leave a group empty or separable;
            # skip the replicate rather than fabricate an estimate
            return None

    author_nulls = replicated(author_rep, replicates, cfg.seed * 2 + 1, cfg.threads)
    paper_nulls = replicated(paper_rep, replicates, cfg.seed * 2 + 2, cfg.threads)
    failed = sum(1 for v in paper_nulls if v is None)
    paper_nulls = [v for v in paper_nulls if v is not None]
    summary = {
        "group": target_group,
        "baseline": cfg.psw_baseline,
        "author_level": null_exceedance_summary(observed, author_nulls),
        "paper_level": null_exceedance_summary(observed, paper_nulls),
        "paper_level_failed_replicates": failed,
    }
    path = os.path.join(cfg.out_dir, "null_summary.json")
    _write_json(summary, path)
    _write_manifest(cfg, "null", [path])
    print(
        f"null: observed {observed:.4f}; exceedances "
        f"author {summary['author_level']['exceedances']}/{replicates}, "
        f"paper {summary['paper_level']['exceedances']}/{replicates}"
    )
    return 0


def _sweep_values(args, default):
    if args.values:
        return [int(v) for v in args.values.split(",")]
    return list(default)


def cmd_sweep(cfg, args):
    corpus = _load(cfg)
    spec = cfg.analysis.regressions[0] if cfg.analysis.regressions else "S4"
    records = []

    if args.dimension == "split":
        provider = _provider(cfg, corpus)
        for v in _sweep_values(args, range(2, 16)):
            rows = _rows(cfg, corpus, provider, split=SplitPoint(cfg.split.mode, v))
            fit = run_model(rows, spec)
            records.append(_coef_record({"split": v}, fit, len(rows)))
    elif args.dimension == "window":
        provider = _provider(cfg, corpus)
        mode = cfg.window.mode if cfg.window.mode != "all" else "papers"
        for v in _sweep_values(args, range(1, 16)):
            rows = _rows(cfg, corpus, provider, window=LookbackWindow(mode, v))
            fit = run_model(rows, spec)
            records.append(_coef_record({"window": v}, fit, len(rows)))
    elif args.dimension == "quantile":
        provider = _provider(cfg, corpus)
        for v in _sweep_values(args, (50, 40, 30, 25, 20, 10)):
            rows = _rows(cfg, corpus, provider, quantile=float(v))
            shares = rows["group"].value_counts(normalize=True).to_dict()
            records.append(
                {
                    "quantile": v,
                    "n": len(rows),
                    **{f"share_{g}": shares.get(g, 0.0) for g in ("A", "B", "C", "D")},
                }
            )
    elif args.dimension == "digits":
        for area, topic in DIGIT_COMBOS:
            scheme = CodeScheme(
                area_prefix_len=area,
                topic_prefix_len=FULL if topic == 0 else topic,
            )
            provider = _provider(cfg, corpus, scheme=scheme)
            rows = _rows(cfg, corpus, provider, scheme=scheme)
            fit = run_model(rows, spec)
            records.append(_coef_record({"area_digits": area, "topic_digits": topic}, fit, len(rows)))
    else:
        raise PipelineError(f"unknown sweep dimension {args.dimension!r}")

    path = os.path.join(cfg.out_dir, f"sweep_{args.dimension}.csv")
    pd.DataFrame(records).to_csv(path, index=False)
    _write_manifest(cfg, f"sweep_{args.dimension}", [path])
    print(f"sweep {args.dimension}: {len(records)} rows -> {path}")
    return 0


def _coef_record(base, fit, n_rows):
    rec = dict(base)
    rec["n"] = n_rows
    rec["r2"] = fit.r2
    for term in ("ep_past", "ed_past", "ep_future", "ed_future"):
        if term in fit.names:
            rec[f"coef_{term}"] = fit.coefficient(term)
            rec[f"se_{term}"] = float(fit.se[fit.names.index(term)])
            rec[f"p_{term}"] = fit.p_value(term)
    return rec


def cmd_report(cfg, args):
    corpus = _load(cfg)
    outputs = []
    if cfg.analysis.regressions or cfg.analysis.cohorts:
        provider = _provider(cfg, corpus)
        rows = _rows(cfg, corpus, provider)
        if cfg.analysis.regressions:
            fit = run_model(rows, cfg.analysis.regressions[0])
            design_means = _term_means(rows, fit)
            for term in ("ep_past", "ed_past"):
                if term not in fit.names:
                    continue
                grid = np.linspace(0.0, 1.0, 21)
                baseline = sum(
                    fit.coefficient(t) * design_means[t]
                    for t in fit.names
                    if t != term
                )
                series = pd.DataFrame(
                    {term: grid, "predicted": baseline + fit.coefficient(term) * grid}
                )
                path = os.path.join(cfg.out_dir, f"marginal_{term}.csv")
                series.to_csv(path, index=False)
                outputs.append(path)
            means = (
                rows.groupby("group")["logcit_future"]
                .agg(["mean", "count"])
                .reset_index()
            )
            path = os.path.join(cfg.out_dir, "group_means.csv")
            means.to_csv(path, index=False)
            outputs.append(path)
        if cfg.analysis.cohorts:
            traj = temporal_trajectories(corpus, provider, cfg.scheme, window=cfg.window)
            path = os.path.join(cfg.out_dir, "trajectories.csv")
            traj.to_csv(path, index=False)
            outputs.append(path)
    manifest = _write_manifest(cfg, "report", outputs)
    print(f"report: {len(outputs)} series -> {manifest}")
    return 0


def _term_means(rows, fit):
    """Mean value of every design term (intercept 1, dummies = level share)."""
    means = {}
    for name in fit.names:
        if name == "intercept":
            means[name] = 1.0
        elif "[" in name:
            col, level = name[:-1].split("[", 1)
            means[name] = float((rows[col].astype(str) == level).mean())
        else:
            means[name] = float(rows[name].mean())
    return means


# -- entry point -----------------------------------------------------------

_COMMANDS = {
    "validate": cmd_validate,
    "synth": cmd_synth,
    "graph": cmd_graph,
    "metrics": cmd_metrics,
    "regress": cmd_regress,
    "psm": cmd_psm,
    "psw": cmd_psw,
    "null": cmd_null,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="topicdrift",
        description="Exploration-metric pipeline over publication corpora",
    )
    parser.add_argument("--config", help="TOML run configuration")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--threads", type=int, help="worker threads (determinism-safe)")
    parser.add_argument("--out", help="override the output directory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        if name == "null":
            p.add_argument("--replicates", type=int, default=0)
            p.add_argument("--group", default="A", help="group whose effect is bounded")
        if name == "sweep":
            p.add_argument("--dimension", choices=SWEEP_DIMENSIONS, required=True)
            p.add_argument("--values", help="comma-separated override of swept values")
        if name == "validate":
            p.add_argument("path", nargs="?", help="corpus JSONL (overrides config)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            cfg.threads = args.threads
        if args.out:
            cfg.out_dir = args.out
        if getattr(args, "path", None):
            cfg.corpus_path = args.path
        os.makedirs(cfg.out_dir, exist_ok=True)
        return _COMMANDS[args.command](cfg, args)
    except (ConfigError, CorpusError, FileNotFoundError, PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # analysis failures
        print(f"analysis error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
