"""Run configuration: TOML parsing with validation and defaults.

A run config collects everything a pipeline command needs: corpus
location and eligibility, the code scheme, look-back window, career
split, impact measure, analysis selections, seeds and the output
directory.  Unknown keys are rejected so typos fail fast.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python < 3.11
    import tomli

from .corpus import CodeScheme, EligibilityFilter, FULL
from .metrics import IMPACT_KINDS, LookbackWindow, SplitPoint


class ConfigError(ValueError):
    pass


@dataclass
class AnalysisSelection:
    regressions: list = field(default_factory=lambda: ["S4"])
    psm: bool = False
    psw: bool = False
    nullmodels: int = 0
    mediation: bool = False
    cohorts: bool = False
    transitions: bool = False
    stability: bool = False
    drastic: bool = False


@dataclass
class RunConfig:
    corpus_path: str = None
    filters: EligibilityFilter = field(default_factory=EligibilityFilter)
    scheme: CodeScheme = field(default_factory=CodeScheme)
    graph_kind: str = "cooccurrence"
    metric: str = "weighted_overlap"
    window: LookbackWindow = field(default_factory=LookbackWindow)
    split: SplitPoint = field(default_factory=SplitPoint)
    min_past: int = None
    min_future: int = 3
    impact: str = "log_c5"
    ed_mode: str = "mean"
    quantile: float = 50.0
    analysis: AnalysisSelection = field(default_factory=AnalysisSelection)
    synth: dict = field(default_factory=dict)
    psm_treat_on: str = "EP"
    psm_caliper_sd: float = 0.2
    psw_baseline: str = "D"
    psw_method: str = "logistic"
    seed: int = 0
    threads: int = 1
    out_dir: str = "out"
    raw: dict = field(default_factory=dict)

    def digest(self):
        """Stable hash of the effective configuration.

        The thread count is excluded: it is an execution parameter that never
        changes results, so runs at different thread counts stay byte-identical.
        """
        payload = dict(self.raw)
        payload["_effective"] = {
            "seed": self.seed,
            "out_dir": self.out_dir,
        }
        blob = json.dumps(payload, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


_KNOWN_SECTIONS = {
    "corpus",
    "scheme",
    "graph",
    "window",
    "split",
    "metrics",
    "analysis",
    "synth",
    "psm",
    "psw",
    "seeds",
    "output",
}


def _take(section, key, default, kinds, name):
    value = section.pop(key, default)
    if value is not None and kinds is not None and not isinstance(value, kinds):
        raise ConfigError(f"{name}.{key}: expected {kinds}, got {type(value).__name__}")
    return value


def _reject_unknown(section, name):
    if section:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(section))}")


def load_config(path):
    with open(path, "rb") as fh:
        try:
            data = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data)


def parse_config(data):
    unknown = set(data) - _KNOWN_SECTIONS
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    cfg = RunConfig(raw=json.loads(json.dumps(data, default=str)))

    c = dict(data.get("corpus", {}))
    cfg.corpus_path = _take(c, "path", None, str, "corpus")
    min_papers = _take(c, "min_papers", 10, int, "corpus")
    policy = _take(c, "policy", "drop-paper", str, "corpus")
    _reject_unknown(c, "corpus")
    try:
        cfg.filters = EligibilityFilter(min_papers=min_papers, policy=policy)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    s = dict(data.get("scheme", {}))
    area = _take(s, "area_prefix", 2, int, "scheme")
    topic = _take(s, "topic_prefix", 0, int, "scheme")
    _reject_unknown(s, "scheme")
    try:
        cfg.scheme = CodeScheme(
            area_prefix_len=area, topic_prefix_len=FULL if topic == 0 else topic
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    g = dict(data.get("graph", {}))
    cfg.graph_kind = _take(g, "kind", "cooccurrence", str, "graph")
    cfg.metric = _take(g, "metric", "weighted_overlap", str, "graph")
    _reject_unknown(g, "graph")
    if cfg.graph_kind not in ("cooccurrence", "citation", "cociting"):
        raise ConfigError(f"unknown graph kind {cfg.graph_kind!r}")
    if cfg.metric not in ("weighted_overlap", "jaccard", "directed_overlap"):
        raise ConfigError(f"unknown metric {cfg.metric!r}")

    w = dict(data.get("window", {}))
    mode = _take(w, "mode", "papers", str, "window")
    value = _take(w, "value", 5, int, "window")
    _reject_unknown(w, "window")
    try:
        cfg.window = LookbackWindow(mode=mode, value=value)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    sp = dict(data.get("split", {}))
    mode = _take(sp, "mode", "career_years", str, "split")
    value = _take(sp, "value", 10, int, "split")
    cfg.min_past = _take(sp, "min_past", None, int, "split")
    cfg.min_future = _take(sp, "min_future", 3, int, "split")
    _reject_unknown(sp, "split")
    try:
        cfg.split = SplitPoint(mode=mode, value=value)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    m = dict(data.get("metrics", {}))
    cfg.impact = _take(m, "impact", "log_c5", str, "metrics")
    cfg.ed_mode = _take(m, "ed_mode", "mean", str, "metrics")
    cfg.quantile = float(_take(m, "quantile", 50.0, (int, float), "metrics"))
    _reject_unknown(m, "metrics")
    if cfg.impact not in IMPACT_KINDS:
        raise ConfigError(f"unknown impact measure {cfg.impact!r}")
    if cfg.ed_mode not in ("mean", "hausdorff"):
        raise ConfigError(f"unknown ed_mode {cfg.ed_mode!r}")
    if not 0 < cfg.quantile <= 50:
        raise ConfigError("metrics.quantile must be in (0, 50]")

    a = dict(data.get("analysis", {}))
    sel = AnalysisSelection()
    sel.regressions = _take(a, "regressions", ["S4"], list, "analysis")
    for flag in ("psm", "psw", "mediation", "cohorts", "transitions", "stability", "drastic"):
        setattr(sel, flag, _take(a, flag, False, bool, "analysis"))
    sel.nullmodels = _take(a, "nullmodels", 0, int, "analysis")
    _reject_unknown(a, "analysis")
    from .stats import MODEL_SPECS

    bad = [r for r in sel.regressions if r not in MODEL_SPECS]
    if bad:
        raise ConfigError(f"unknown regression spec(s): {', '.join(bad)}")
    if sel.nullmodels < 0:
        raise ConfigError("analysis.nullmodels must be >= 0")
    if sel.nullmodels and not sel.psw:
        raise ConfigError("analysis.nullmodels needs analysis.psw enabled (it bounds the PSW effect)")
    cfg.analysis = sel

    cfg.synth = dict(data.get("synth", {}))

    pm = dict(data.get("psm", {}))
    cfg.psm_treat_on = _take(pm, "treat_on", "EP", str, "psm")
    cfg.psm_caliper_sd = float(_take(pm, "caliper_sd", 0.2, (int, float), "psm"))
    _reject_unknown(pm, "psm")
    if cfg.psm_treat_on not in ("EP", "ED"):
        raise ConfigError("psm.treat_on must be 'EP' or 'ED'")

    pw = dict(data.get("psw", {}))
    cfg.psw_baseline = _take(pw, "baseline", "D", str, "psw")
    cfg.psw_method = _take(pw, "method", "logistic", str, "psw")
    _reject_unknown(pw, "psw")
    if cfg.psw_method not in ("logistic", "boosted"):
        raise ConfigError("psw.method must be 'logistic' or 'boosted'")

    sd = dict(data.get("seeds", {}))
    cfg.seed = _take(sd, "master", 0, int, "seeds")
    _reject_unknown(sd, "seeds")

    o = dict(data.get("output", {}))
    cfg.out_dir = _take(o, "dir", "out", str, "output")
    _reject_unknown(o, "output")
    return cfg
