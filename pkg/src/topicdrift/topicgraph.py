"""Weighted topic graphs and pairwise topic distances.

Three graph constructions over a corpus's classification codes:

* co-occurrence: topics sharing a paper, each paper with n distinct topics
  contributing 1/(n-1) per topic pair;
* citation: directed, each citation spreading 1/(n_citing * refs_citing *
  n_cited) over cross topic pairs;
* co-citing: two papers citing the same paper contribute 1/(n_1 * n_2) per
  cross topic pair.

Distances come from neighbourhood overlap on the resulting graph (weighted
overlap, its unweighted Jaccard cousin, or the averaged directed variant),
with distance = 1 - similarity.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np


class TopicGraph:
    """Sparse weighted graph over topic keys.

    Undirected graphs store each edge in both adjacency dicts; directed
    (citation) graphs keep separate out- and in-adjacency.
    """

    def __init__(self, kind, directed=False):
        self.kind = kind
        self.directed = directed
        self.adj = defaultdict(dict)  # out-adjacency for directed graphs
        self.in_adj = defaultdict(dict) if directed else None
        self.nodes = set()

    def add_node(self, node):
        self.nodes.add(node)

    def add_weight(self, i, j, w):
        if i == j:
            raise ValueError("self-loops are not allowed")
        if w <= 0:
            raise ValueError("edge weights must be positive")
        self.nodes.add(i)
        self.nodes.add(j)
        self.adj[i][j] = self.adj[i].get(j, 0.0) + w
        if self.directed:
            self.in_adj[j][i] = self.in_adj[j].get(i, 0.0) + w
        else:
            self.adj[j][i] = self.adj[j].get(i, 0.0) + w

    def weight(self, i, j):
        return self.adj.get(i, {}).get(j, 0.0)

    def strength(self, i):
        return sum(self.adj.get(i, {}).values())

    def in_strength(self, i):
        if not self.directed:
            return self.strength(i)
        return sum(self.in_adj.get(i, {}).values())

    def neighbors(self, i):
        return self.adj.get(i, {})

    def in_neighbors(self, i):
        if not self.directed:
            return self.adj.get(i, {})
        return self.in_adj.get(i, {})

    def sorted_nodes(self):
        return sorted(self.nodes)

    # -- exports ----------------------------------------------------------

    def write_edges_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["src", "dst", "weight"])
            for i in self.sorted_nodes():
                for j in sorted(self.adj.get(i, {})):
                    if self.directed or i < j:
                        writer.writerow([i, j, repr(self.adj[i][j])])

    def write_strengths_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            if self.directed:
                writer.writerow(["node", "out_strength", "in_strength"])
                for i in self.sorted_nodes():
                    writer.writerow([i, repr(self.strength(i)), repr(self.in_strength(i))])
            else:
                writer.writerow(["node", "strength"])
                for i in self.sorted_nodes():
                    writer.writerow([i, repr(self.strength(i))])


def paper_topics(paper, scheme):
    """Distinct topic keys of a paper, in stable sorted order."""
    return sorted({scheme.topic_key(c) for c in paper.codes})


def build_cooccurrence(corpus, scheme):
    graph = TopicGraph("cooccurrence")
    for pid in sorted(corpus.papers):
        topics = paper_topics(corpus.papers[pid], scheme)
        for t in topics:
            graph.add_node(t)
        n = len(topics)
        if n < 2:
            continue
        w = 1.0 / (n - 1)
        for a in range(n):
            for b in range(a + 1, n):
                graph.add_weight(topics[a], topics[b], w)
    return graph


def build_citation(corpus, scheme):
    graph = TopicGraph("citation", directed=True)
    for pid in sorted(corpus.papers):
        citing = corpus.papers[pid]
        topics_i = paper_topics(citing, scheme)
        for t in topics_i:
            graph.add_node(t)
        if not topics_i or not citing.refs:
            continue
        r_p = len(citing.refs)
        for ref in citing.refs:
            cited = corpus.papers.get(ref)
            if cited is None:
                continue
            topics_j = paper_topics(cited, scheme)
            if not topics_j:
                continue
            w = 1.0 / (len(topics_i) * r_p * len(topics_j))
            for ti in topics_i:
                for tj in topics_j:
                    if ti != tj:
                        graph.add_weight(ti, tj, w)
    return graph


def build_cociting(corpus, scheme):
    graph = TopicGraph("cociting")
    for pid in sorted(corpus.papers):
        for t in paper_topics(corpus.papers[pid], scheme):
            graph.add_node(t)
    for cited_id in sorted(corpus.cited_by):
        citers = sorted({cid for _, cid in corpus.cited_by[cited_id]})
        for a in range(len(citers)):
            topics_a = paper_topics(corpus.papers[citers[a]], scheme)
            if not topics_a:
                continue
            for b in range(a + 1, len(citers)):
                topics_b = paper_topics(corpus.papers[citers[b]], scheme)
                if not topics_b:
                    continue
                w = 1.0 / (len(topics_a) * len(topics_b))
                for ti in topics_a:
                    for tj in topics_b:
                        if ti != tj:
                            graph.add_weight(ti, tj, w)
    return graph


_BUILDERS = {
    "cooccurrence": build_cooccurrence,
    "citation": build_citation,
    "cociting": build_cociting,
}


def build_graph(corpus, scheme, kind="cooccurrence"):
    try:
        builder = _BUILDERS[kind]
    except KeyError:
        raise ValueError(f"unknown graph kind {kind!r}") from None
    return builder(corpus, scheme)


METRICS = ("weighted_overlap", "jaccard", "directed_overlap")


@dataclass
class DistanceProvider:
    """Cached pairwise topic-distance oracle.

    Below ``full_matrix_threshold`` nodes the whole float32 distance matrix
    is materialized once; above it a bounded per-pair cache is used.  Results
    are identical either way.
    """

    graph: TopicGraph
    metric: str = "weighted_overlap"
    full_matrix_threshold: int = 8000
    pair_cache_size: int = 2_000_000
    _index: dict = field(default_factory=dict, repr=False)
    _matrix: np.ndarray = field(default=None, repr=False)
    _pair_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.metric == "directed_overlap" and not self.graph.directed:
            raise ValueError("directed_overlap requires a directed graph")
        if self.metric != "directed_overlap" and self.graph.directed:
            raise ValueError(f"{self.metric} requires an undirected graph")
        self._nodes = self.graph.sorted_nodes()
        self._index = {n: i for i, n in enumerate(self._nodes)}
        if len(self._nodes) <= self.full_matrix_threshold:
            self._matrix = self._build_full_matrix()

    # -- public API -------------------------------------------------------

    def distance(self, i, j):
        """Topic distance in [0, 1]; 0 on the diagonal, symmetric."""
        if i not in self._index:
            raise KeyError(f"unknown topic {i!r}")
        if j not in self._index:
            raise KeyError(f"unknown topic {j!r}")
        if i == j:
            return 0.0
        if self._matrix is not None:
            return float(self._matrix[self._index[i], self._index[j]])
        key = (i, j) if i <= j else (j, i)
        cached = self._pair_cache.get(key)
        if cached is None:
            cached = self._pair_distance(*key)
            if len(self._pair_cache) >= self.pair_cache_size:
                self._pair_cache.clear()
            self._pair_cache[key] = cached
        return cached

    def distance_matrix(self, nodes, max_nodes=20000):
        """Dense symmetric distance matrix over a node subset."""
        nodes = list(nodes)
        if len(nodes) > max_nodes:
            raise MemoryError(
                f"{len(nodes)} nodes exceed the matrix budget of {max_nodes}; "
                "use write_matrix_csv for streaming export"
            )
        out = np.zeros((len(nodes), len(nodes)), dtype=np.float64)
        for a, i in enumerate(nodes):
            for b in range(a + 1, len(nodes)):
                d = self.distance(i, nodes[b])
                out[a, b] = d
                out[b, a] = d
        return out

    def write_matrix_csv(self, nodes, path):
        """Streaming row-by-row export; header row carries the topic keys."""
        nodes = list(nodes)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["topic"] + nodes)
            for i in nodes:
                writer.writerow([i] + [repr(self.distance(i, j)) for j in nodes])

    # -- per-pair computation ---------------------------------------------

    def _pair_distance(self, i, j):
        if self.metric == "weighted_overlap":
            return 1.0 - self._overlap_undirected(i, j)
        if self.metric == "jaccard":
            ni = set(self.graph.neighbors(i))
            nj = set(self.graph.neighbors(j))
            union = ni | nj
            if not union:
                return 1.0
            return 1.0 - len(ni & nj) / len(union)
        # directed_overlap
        w_ij = self.graph.weight(i, j)
        w_ji = self.graph.weight(j, i)
        o_out = self._overlap_directed(
            self.graph.neighbors(i), self.graph.neighbors(j), w_ij, w_ji
        )
        o_in = self._overlap_directed(
            self.graph.in_neighbors(i), self.graph.in_neighbors(j), w_ij, w_ji
        )
        return 1.0 - 0.5 * (o_out + o_in)

    def _overlap_undirected(self, i, j):
        ni = self.graph.neighbors(i)
        nj = self.graph.neighbors(j)
        if len(nj) < len(ni):
            ni, nj = nj, ni
        w_overlap = sum(0.5 * (w + nj[k]) for k, w in ni.items() if k in nj)
        if w_overlap == 0.0:
            return 0.0
        s_i = sum(self.graph.neighbors(i).values())
        s_j = sum(self.graph.neighbors(j).values())
        denom = s_i + s_j - 2.0 * self.graph.weight(i, j) - w_overlap
        return w_overlap / denom

    @staticmethod
    def _overlap_directed(ni, nj, w_ij, w_ji):
        small, big = (ni, nj) if len(ni) <= len(nj) else (nj, ni)
        w_overlap = sum(0.5 * (w + big[k]) for k, w in small.items() if k in big)
        if w_overlap == 0.0:
            return 0.0
        denom = sum(ni.values()) + sum(nj.values()) - w_ij - w_ji - w_overlap
        return w_overlap / denom

    # -- full-matrix construction -----------------------------------------

    def _build_full_matrix(self):
        n = len(self._nodes)
        if n == 0:
            return np.zeros((0, 0), dtype=np.float32)
        if self.metric == "weighted_overlap":
            mat = self._overlap_matrix(self.graph.adj, self.graph.adj, both_dirs=False)
            td = 1.0 - mat
        elif self.metric == "jaccard":
            td = self._jaccard_matrix()
        else:
            out = self._overlap_matrix(self.graph.adj, self.graph.adj, both_dirs=True)
            inn = self._overlap_matrix(self.graph.in_adj, self.graph.in_adj, both_dirs=True)
            td = 1.0 - 0.5 * (out + inn)
        np.fill_diagonal(td, 0.0)
        return np.clip(td, 0.0, 1.0).astype(np.float32)

    def _adjacency_array(self, adj):
        n = len(self._nodes)
        mat = np.zeros((n, n), dtype=np.float64)
        for i, nbrs in adj.items():
            a = self._index[i]
            for j, w in nbrs.items():
                mat[a, self._index[j]] = w
        return mat

    def _overlap_matrix(self, adj, _unused, both_dirs):
        # W[i,j] = sum over common neighbours k of (w_ik + w_jk) / 2
        A = self._adjacency_array(adj)
        M = (A > 0).astype(np.float64)
        W = 0.5 * (A @ M.T + M @ A.T)
        s = A.sum(axis=1)
        if both_dirs:
            # directed denominators subtract w(i->j) and w(j->i) once each
            Aout = self._adjacency_array(self.graph.adj)
            direct = Aout + Aout.T
        else:
            direct = 2.0 * A
        denom = s[:, None] + s[None, :] - direct - W
        with np.errstate(divide="ignore", invalid="ignore"):
            O = np.where(W > 0, W / denom, 0.0)
        return O

    def _jaccard_matrix(self):
        A = self._adjacency_array(self.graph.adj)
        M = (A > 0).astype(np.float64)
        inter = M @ M.T
        deg = M.sum(axis=1)
        union = deg[:, None] + deg[None, :] - inter
        with np.errstate(divide="ignore", invalid="ignore"):
            jac = np.where(union > 0, inter / union, 0.0)
        return 1.0 - jac


def strength_paper_count_check(corpus, scheme, graph):
    """Co-occurrence strength identity: s_i equals the number of papers
    containing topic i that have at least two distinct topics."""
    counts = defaultdict(int)
    for p in corpus.papers.values():
        topics = paper_topics(p, scheme)
        if len(topics) >= 2:
            for t in topics:
                counts[t] += 1
    report = {}
    for node in graph.sorted_nodes():
        report[node] = (graph.strength(node), counts.get(node, 0))
    return report


def period_stability(corpus, periods, scheme, metric="weighted_overlap", kind="cooccurrence"):
    """Pairwise Pearson correlations between per-period distance matrices.

    Each period is an inclusive (start_date, end_date) pair; an extra 'all'
    pseudo-period over the whole corpus is always included.  Only nodes
    present in every period's graph enter the matrices.
    """
    if len(periods) < 2:
        raise ValueError("need at least two periods")
    from .corpus import Corpus

    labels = ["all"] + [f"{a.isoformat()}..{b.isoformat()}" for a, b in periods]
    graphs = [build_graph(corpus, scheme, kind)]
    degenerate = []
    for (start, end), label in zip(periods, labels[1:]):
        sub_papers = [p for p in corpus.papers.values() if start <= p.date <= end]
        sub = Corpus.from_papers(sub_papers, _NO_FILTER)
        g = build_graph(sub, scheme, kind)
        multi = sum(1 for p in sub_papers if len(paper_topics(p, scheme)) >= 2)
        if multi < 2:
            degenerate.append(label)
        graphs.append(g)

    common = set(graphs[0].nodes)
    for g in graphs[1:]:
        common &= g.nodes
    common = sorted(common)

    vectors = []
    for g in graphs:
        provider = DistanceProvider(g, metric=metric)
        mat = provider.distance_matrix(common)
        iu = np.triu_indices(len(common), k=1)
        vectors.append(mat[iu])

    k = len(labels)
    corr = np.full((k, k), np.nan)
    for a in range(k):
        corr[a, a] = 1.0
        for b in range(a + 1, k):
            x, y = vectors[a], vectors[b]
            if len(x) < 2 or np.std(x) == 0 or np.std(y) == 0:
                continue
            corr[a, b] = corr[b, a] = float(np.corrcoef(x, y)[0, 1])
    return {"labels": labels, "correlations": corr, "degenerate": degenerate,
            "common_nodes": len(common)}


# period subcorpora keep every author regardless of paper count
from .corpus import EligibilityFilter as _EF

_NO_FILTER = _EF(min_papers=1)
