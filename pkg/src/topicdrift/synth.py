"""Synthetic corpus generator with planted exploration effects.

Authors follow one of two policies: explorers publish in a fresh area
every paper (propensity exactly 1) and exploiters stay inside a single
area (propensity exactly 0).  Topic-space geometry is engineered so that
every author's exploration distance is a known constant, invariant to
the look-back window and the career split:

* a hub topic co-occurs with every real topic in ``background_papers``
  two-topic papers, so any two real topics share exactly one neighbor;
* each topic additionally co-occurs with a private neighbor in ``beta``
  papers, which tunes the pairwise distance to
  ``(beta_i + beta_j) / (background + beta_i + beta_j)``.

Citation counts realize a planted per-paper outcome
``base + ep_effect*EP + ed_effect*ED + group_effect*1[group] + quality +
noise`` through throw-away citer papers that fall below the career
eligibility threshold but still count as citations.  Ground truth is
returned in a manifest next to the corpus.
"""

from __future__ import annotations

import datetime
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, EligibilityFilter, Paper

_BASE36 = "0123456789abcdefghijklmnopqrstuvwxyz"


def _area_code(slot):
    return _BASE36[slot // 36] + _BASE36[slot % 36]


HUB_CODE = "zz.zz.zz"


@dataclass(frozen=True)
class SyntheticConfig:
    n_authors: int = 1000
    career_min: int = 24
    career_max: int = 32
    explore_fraction: float = 0.5
    ed_targets: tuple = (0.15, 0.35)  # ascending, each in (0, 0.5)
    background_papers: int = 40
    base_citation: float = 2.0
    ep_effect: float = 0.0
    ed_effect: float = 0.0
    group_effect: float = 0.0
    effect_group: str = "A"
    quality_sd: float = 0.0
    noise_sd: float = 0.1
    confounding: float = 0.0
    start_year: int = 1990
    start_span_days: int = 1095
    gap_min_days: int = 150
    gap_max_days: int = 450
    topic_epoch: datetime.date = datetime.date(1985, 1, 1)
    citations_per_citer: int = 20
    flip_fraction: float = 0.0
    min_papers: int = 10

    def __post_init__(self):
        if self.n_authors < 1:
            raise ValueError("n_authors must be positive")
        if not self.ed_targets:
            raise ValueError("need at least one exploration-distance target")
        if any(not 0 < d < 0.5 for d in self.ed_targets):
            raise ValueError("ed_targets must lie in (0, 0.5)")
        if list(self.ed_targets) != sorted(self.ed_targets):
            raise ValueError("ed_targets must be ascending")
        if not 4 <= self.career_min <= self.career_max:
            raise ValueError("need 4 <= career_min <= career_max")
        if self.career_max > 36 * 36 - 1:
            raise ValueError("career_max exceeds the area namespace")
        if self.background_papers < 1:
            raise ValueError("background_papers must be positive")
        if not 0 <= self.explore_fraction <= 1:
            raise ValueError("explore_fraction must be in [0, 1]")
        if self.gap_min_days < 1 or self.gap_max_days < self.gap_min_days:
            raise ValueError("bad inter-paper gap range")
        if self.citations_per_citer < 1:
            raise ValueError("citations_per_citer must be positive")
        if not 0 <= self.flip_fraction <= 1:
            raise ValueError("flip_fraction must be in [0, 1]")
        if len(self.ed_targets) > 9:
            raise ValueError("at most 9 distance levels supported")


def explorer_beta(background, d):
    """Private-neighbor paper count giving distance ~d between same-level
    explorer topics (2*beta / (background + 2*beta))."""
    return max(1, round(background * d / (2.0 * (1.0 - d))))


def exploiter_beta(background, d):
    """Private-neighbor paper count giving per-paper distance ~d for an
    exploiter alternating between a two-topic pair (beta / (background + 2*beta))."""
    return max(1, round(background * d / (1.0 - 2.0 * d)))


def explorer_distance(background, beta):
    return 2.0 * beta / (background + 2.0 * beta)


def exploiter_distance(background, beta):
    return beta / (background + 2.0 * beta)


def _combo_label(explore, level, n_levels):
    """Four-quadrant label of an (explore, distance-level) policy; None for
    middle distance levels."""
    if level == 0:
        return "A" if explore else "B"
    if level == n_levels - 1:
        return "C" if explore else "D"
    return None


def generate_synthetic(config, seed):
    """Build a planted-effect corpus; returns (corpus, manifest)."""
    rng = np.random.default_rng(seed)
    A = config.background_papers
    n_levels = len(config.ed_targets)
    pool = config.career_max  # one fresh area per explorer paper

    betas_x = [explorer_beta(A, d) for d in config.ed_targets]
    betas_e = [exploiter_beta(A, d) for d in config.ed_targets]
    ed_x = [explorer_distance(A, b) for b in betas_x]
    ed_e = [exploiter_distance(A, b) for b in betas_e]

    papers = []
    counters = {"bg": 0, "cit": 0}

    def background_for(topic_code, neighbor_code, beta):
        for code_pair, count in (((topic_code, HUB_CODE), A), ((topic_code, neighbor_code), beta)):
            for _ in range(count):
                n = counters["bg"]
                counters["bg"] += 1
                papers.append(
                    Paper(
                        paper_id=f"bg{n:07d}",
                        date=config.topic_epoch + datetime.timedelta(days=n % 730),
                        authors=(f"bga{n:07d}",),
                        codes=code_pair,
                    )
                )

    # topic vocabulary: per (level, slot) one explorer topic and one
    # exploiter pair, all sharing the slot's two-character area
    explorer_topic = {}
    exploiter_pair = {}
    for lvl in range(n_levels):
        for slot in range(pool):
            ar = _area_code(slot)
            t = f"{ar}.e{lvl}.00"
            explorer_topic[(lvl, slot)] = t
            background_for(t, f"{ar}.e{lvl}.qq", betas_x[lvl])
            a, b = f"{ar}.p{lvl}.aa", f"{ar}.p{lvl}.bb"
            exploiter_pair[(lvl, slot)] = (a, b)
            background_for(a, f"{ar}.p{lvl}.qa", betas_e[lvl])
            background_for(b, f"{ar}.p{lvl}.qb", betas_e[lvl])

    def paper_codes(explore, level, slot0, phase_index):
        """Codes of the phase_index-th paper of a policy phase."""
        if explore:
            return (explorer_topic[(level, (slot0 + phase_index) % pool)],)
        a, b = exploiter_pair[(level, slot0)]
        if phase_index == 0:
            return (a, b)
        return (a,) if phase_index % 2 == 1 else (b,)

    start_epoch = datetime.date(config.start_year, 1, 1)
    demand = {}  # 30-day bucket -> [(paper_id, citation_count), ...]
    manifest_authors = {}
    explorer_quota = 0.0
    level_counter = {True: 0, False: 0}

    for i in range(config.n_authors):
        author_id = f"auth{i:06d}"
        explorer_quota += config.explore_fraction
        explore = explorer_quota >= 1.0
        if explore:
            explorer_quota -= 1.0
        level = level_counter[explore] % n_levels
        level_counter[explore] += 1
        label = _combo_label(explore, level, n_levels)

        flipped = config.flip_fraction > 0 and label in ("A", "D") and (
            rng.random() < config.flip_fraction
        )
        career_len = int(rng.integers(config.career_min, config.career_max + 1))
        start = start_epoch + datetime.timedelta(days=int(rng.integers(0, config.start_span_days)))
        gaps = rng.integers(config.gap_min_days, config.gap_max_days + 1, size=career_len - 1)
        quality = float(rng.normal(0.0, config.quality_sd)) if config.quality_sd > 0 else 0.0
        if explore:
            quality += config.confounding
        slot0 = int(rng.integers(0, pool))
        flip_at = career_len // 2 if flipped else career_len
        # A <-> D flip swaps both the policy and the distance level
        flip_explore, flip_level = (not explore), (n_levels - 1 - level)
        flip_slot0 = int(rng.integers(0, pool))

        date = start
        ed_true = (ed_x if explore else ed_e)[level]
        for j in range(career_len):
            if j > 0:
                date = date + datetime.timedelta(days=int(gaps[j - 1]))
            if j < flip_at:
                cur = (explore, level, slot0, j)
            else:
                cur = (flip_explore, flip_level, flip_slot0, j - flip_at)
            codes = paper_codes(*cur)
            cur_label = _combo_label(cur[0], cur[1], n_levels)
            cur_ed = (ed_x if cur[0] else ed_e)[cur[1]]
            target = (
                config.base_citation
                + config.ep_effect * (1.0 if cur[0] else 0.0)
                + config.ed_effect * cur_ed
                + (config.group_effect if cur_label == config.effect_group else 0.0)
                + quality
                + float(rng.normal(0.0, config.noise_sd))
            )
            count = max(0, round(math.exp(target) - 1.0))
            pid = f"a{i:06d}p{j:02d}"
            papers.append(Paper(paper_id=pid, date=date, authors=(author_id,), codes=codes))
            if count:
                demand.setdefault(date.toordinal() // 30, []).append((pid, count))

        manifest_authors[author_id] = {
            "explore": bool(explore),
            "level": int(level),
            "ep": 1.0 if explore else 0.0,
            "ed": float(ed_true),
            "group": label,
            "quality": quality,
            "career_len": career_len,
            "flipped": bool(flipped),
        }

    # realize citation counts through throw-away citer papers, each citing
    # up to citations_per_citer distinct targets from one 30-day bucket
    for bucket in sorted(demand):
        cite_date = datetime.date.fromordinal(bucket * 30 + 395)
        active = [[pid, c] for pid, c in demand[bucket]]
        while active:
            take = active[: config.citations_per_citer]
            n = counters["cit"]
            counters["cit"] += 1
            papers.append(
                Paper(
                    paper_id=f"ct{n:07d}",
                    date=cite_date,
                    authors=(f"cta{n:07d}",),
                    codes=(),
                    refs=tuple(pid for pid, _ in take),
                )
            )
            for entry in take:
                entry[1] -= 1
            active = [e for e in active if e[1] > 0]

    corpus = Corpus.from_papers(papers, EligibilityFilter(min_papers=config.min_papers))
    manifest = {
        "seed": int(seed),
        "planted": {
            "base_citation": config.base_citation,
            "ep_effect": config.ep_effect,
            "ed_effect": config.ed_effect,
            "group_effect": config.group_effect,
            "effect_group": config.effect_group,
            "quality_sd": config.quality_sd,
            "noise_sd": config.noise_sd,
            "confounding": config.confounding,
        },
        "distance_levels": {
            "targets": list(config.ed_targets),
            "explorer_realized": ed_x,
            "exploiter_realized": ed_e,
            "explorer_beta": betas_x,
            "exploiter_beta": betas_e,
            "background_papers": A,
        },
        "counts": {
            "authors": config.n_authors,
            "background_papers": counters["bg"],
            "citer_papers": counters["cit"],
            "total_papers": len(papers),
        },
        "authors": manifest_authors,
    }
    return corpus, manifest
