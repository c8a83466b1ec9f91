"""Publication corpus: data model, JSONL ingestion, validation and citation indexing.

A corpus is an immutable store of papers plus derived author careers and a
citation index.  Papers are identified by string ids, carry a publication
date, an ordered author list, classification codes, reference ids and
(optionally) per-author institution sets.
"""

from __future__ import annotations

import datetime
import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace

DAYS_PER_YEAR = 365.25

FULL = None  # sentinel for "use the whole normalized code" as the topic key


class CorpusError(ValueError):
    """Raised for unrecoverable ingestion problems (bad JSON, duplicate ids)."""


@dataclass(frozen=True)
class Paper:
    paper_id: str
    date: datetime.date
    authors: tuple
    codes: tuple
    refs: tuple = ()
    institutions: tuple = None  # tuple of frozensets, parallel to authors

    def __post_init__(self):
        if not self.authors:
            raise CorpusError(f"paper {self.paper_id}: empty author list")
        if len(set(self.authors)) != len(self.authors):
            raise CorpusError(f"paper {self.paper_id}: duplicate author id")
        if self.institutions is not None and len(self.institutions) != len(self.authors):
            raise CorpusError(
                f"paper {self.paper_id}: institutions length {len(self.institutions)} "
                f"!= authors length {len(self.authors)}"
            )


@dataclass(frozen=True)
class CodeScheme:
    """How classification codes map to area and topic keys.

    Separator characters are stripped before prefixing.  ``topic_prefix_len``
    of FULL (None) keeps the whole normalized code.
    """

    area_prefix_len: int = 2
    topic_prefix_len: int = FULL
    separator_chars: frozenset = frozenset({".", "-", "+", " "})

    def __post_init__(self):
        if self.area_prefix_len < 1:
            raise ValueError("area_prefix_len must be positive")
        if self.topic_prefix_len is not FULL:
            if self.topic_prefix_len < 1:
                raise ValueError("topic_prefix_len must be positive")
            if self.area_prefix_len > self.topic_prefix_len:
                raise ValueError("area_prefix_len must not exceed topic_prefix_len")

    def _normalize(self, code):
        return "".join(c for c in code if c not in self.separator_chars)

    def area_key(self, code):
        return self._prefix(code, self.area_prefix_len)

    def topic_key(self, code):
        if self.topic_prefix_len is FULL:
            return self._normalize(code)
        return self._prefix(code, self.topic_prefix_len)

    def _prefix(self, code, n):
        if not code:
            raise ValueError("empty classification code")
        norm = self._normalize(code)
        # short codes fall back to the whole normalized code
        return norm[:n] if len(norm) >= n else norm

    def is_short(self, code, n):
        return len(self._normalize(code)) < n


@dataclass(frozen=True)
class EligibilityFilter:
    """Which authors/papers enter the corpus.

    ``policy`` controls what happens to papers with missing required fields:
    'drop-paper' discards just the paper, 'drop-author' additionally bars the
    paper's authors from getting careers.
    """

    min_papers: int = 10
    policy: str = "drop-paper"

    def __post_init__(self):
        if self.policy not in ("drop-paper", "drop-author"):
            raise ValueError(f"unknown policy {self.policy!r}")


@dataclass
class AuthorCareer:
    author_id: str
    papers: list  # paper ids, ascending by (date, paper_id)
    first_date: datetime.date
    attributes: dict = field(default_factory=dict)


def _parse_record(obj, lineno):
    required = ("paper_id", "date", "authors")
    missing = [k for k in required if not obj.get(k)]
    if missing:
        return None, missing
    try:
        date = datetime.date.fromisoformat(obj["date"])
    except (TypeError, ValueError):
        return None, ["date"]
    insts = obj.get("institutions")
    if insts is not None:
        insts = tuple(frozenset(s) for s in insts)
    paper = Paper(
        paper_id=str(obj["paper_id"]),
        date=date,
        authors=tuple(obj["authors"]),
        codes=tuple(obj.get("codes") or ()),
        refs=tuple(obj.get("refs") or ()),
        institutions=insts,
    )
    return paper, None


class Corpus:
    """Immutable after construction; safe to share across workers."""

    def __init__(self, papers, careers, warnings=None, author_attributes=None):
        self.papers = dict(papers)  # paper_id -> Paper
        self.careers = dict(careers)  # author_id -> AuthorCareer
        self.warnings = Counter(warnings or {})
        self._cited_by = None
        self._citation_count_cache = {}
        if author_attributes:
            for aid, attrs in author_attributes.items():
                if aid in self.careers:
                    self.careers[aid].attributes.update(attrs)

    # -- construction -----------------------------------------------------

    @classmethod
    def from_papers(cls, papers, filters=EligibilityFilter(), warnings=None):
        warnings = Counter(warnings or {})
        by_id = {}
        for p in papers:
            if p.paper_id in by_id:
                raise CorpusError(f"duplicate paper_id {p.paper_id!r}")
            by_id[p.paper_id] = p

        known = set(by_id)
        for p in by_id.values():
            dangling = sum(1 for r in p.refs if r not in known)
            if dangling:
                warnings["dangling_refs"] += dangling

        per_author = defaultdict(list)
        for p in by_id.values():
            for a in p.authors:
                per_author[a].append(p)

        careers = {}
        for aid, plist in per_author.items():
            if len(plist) < filters.min_papers:
                warnings["authors_below_min_papers"] += 1
                continue
            plist.sort(key=lambda p: (p.date, p.paper_id))
            careers[aid] = AuthorCareer(
                author_id=aid,
                papers=[p.paper_id for p in plist],
                first_date=plist[0].date,
            )
        return cls(by_id, careers, warnings)

    # -- citation index ---------------------------------------------------

    @property
    def cited_by(self):
        """paper_id -> sorted list of (citing_date, citing_paper_id)."""
        if self._cited_by is None:
            index = defaultdict(list)
            for p in self.papers.values():
                for ref in p.refs:
                    if ref in self.papers:
                        index[ref].append((p.date, p.paper_id))
            for lst in index.values():
                lst.sort()
            self._cited_by = dict(index)
        return self._cited_by

    def citation_counts(self, paper_id, horizon_years):
        """In-corpus citations strictly after publication, within the horizon."""
        key = (paper_id, horizon_years)
        cached = self._citation_count_cache.get(key)
        if cached is not None:
            return cached
        if paper_id not in self.papers:
            raise KeyError(f"unknown paper_id {paper_id!r}")
        if horizon_years < 1:
            raise ValueError("horizon_years must be positive")
        base = self.papers[paper_id].date
        cutoff = datetime.timedelta(days=horizon_years * DAYS_PER_YEAR)
        count = 0
        for citing_date, _ in self.cited_by.get(paper_id, ()):
            if base < citing_date and (citing_date - base) <= cutoff:
                count += 1
        self._citation_count_cache[key] = count
        return count

    # -- convenience ------------------------------------------------------

    def career_papers(self, author_id):
        career = self.careers[author_id]
        return [self.papers[pid] for pid in career.papers]

    def all_author_papers(self):
        """author_id -> chronologically sorted papers, including authors below
        the eligibility threshold (needed for co-author covariates)."""
        if getattr(self, "_all_author_papers", None) is None:
            per_author = defaultdict(list)
            for p in self.papers.values():
                for a in p.authors:
                    per_author[a].append(p)
            for lst in per_author.values():
                lst.sort(key=lambda p: (p.date, p.paper_id))
            self._all_author_papers = dict(per_author)
        return self._all_author_papers

    def validation_report(self):
        return {
            "papers": len(self.papers),
            "authors": len(self.careers),
            "warnings": dict(self.warnings),
        }

    def replace_papers(self, new_papers, filters=EligibilityFilter()):
        """Rebuild careers and citation index after structural edits (null models)."""
        return Corpus.from_papers(new_papers, filters)


def load_corpus(path, scheme=CodeScheme(), filters=EligibilityFilter()):
    """Read line-delimited paper records and build a validated corpus.

    Malformed JSON raises CorpusError with the line number.  Records missing
    required fields are dropped (and their authors barred under the
    'drop-author' policy), counted in the validation warnings.
    """
    warnings = Counter()
    papers = []
    barred_authors = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed line: {exc}") from exc
            paper, missing = _parse_record(obj, lineno)
            if missing is not None:
                warnings["incomplete_record"] += 1
                if filters.policy == "drop-author":
                    barred_authors.update(obj.get("authors") or ())
                continue
            papers.append(paper)

    if barred_authors:
        kept = []
        for p in papers:
            if any(a in barred_authors for a in p.authors):
                warnings["papers_of_barred_authors"] += 1
            else:
                kept.append(p)
        papers = kept

    return Corpus.from_papers(papers, filters, warnings)


def write_corpus(corpus, path):
    """Write papers back out as JSONL (inverse of load_corpus)."""
    with open(path, "w", encoding="utf-8") as fh:
        for pid in sorted(corpus.papers):
            p = corpus.papers[pid]
            rec = {
                "paper_id": p.paper_id,
                "date": p.date.isoformat(),
                "authors": list(p.authors),
                "codes": list(p.codes),
                "refs": list(p.refs),
            }
            if p.institutions is not None:
                rec["institutions"] = [sorted(s) for s in p.institutions]
            fh.write(json.dumps(rec) + "\n")
