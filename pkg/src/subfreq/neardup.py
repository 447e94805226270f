"""Near-duplicate detection with unigram TF-IDF cosine similarity."""

from __future__ import annotations

import heapq
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse
from sklearn.base import BaseEstimator

DEFAULT_THRESHOLD = 0.95
# cosines of identical documents can land a few ulps below 1.0
COS_EPS = 1e-9


@dataclass(frozen=True)
class SparseVector:
    entries: dict[int, float]
    norm: float

    @classmethod
    def from_entries(cls, entries: Mapping[int, float]) -> "SparseVector":
        if any(w <= 0 for w in entries.values()):
            raise ValueError("sparse vector weights must be positive")
        return cls(dict(entries), math.sqrt(math.fsum(w * w for w in entries.values())))

    def dot(self, other: "SparseVector") -> float:
        a, b = (self, other) if len(self.entries) <= len(other.entries) else (other, self)
        return math.fsum(w * b.entries[t] for t, w in a.entries.items() if t in b.entries)


def cosine(u: SparseVector, v: SparseVector) -> float:
    return u.dot(v) / (u.norm * v.norm)


def _as_counts(doc: Mapping[str, int] | Iterable[str]) -> Mapping[str, int]:
    return doc if isinstance(doc, Mapping) else Counter(doc)


def vectorize(tokens_by_doc: Mapping[str, Mapping[str, int] | Iterable[str]]) -> dict[str, SparseVector]:
    """L2-normalized TF-IDF vectors, raw tf and idf = ln((1+N)/(1+df)) + 1.

    Documents may be given as token sequences or term counts.
    """
    if not tokens_by_doc:
        raise ValueError("need at least one document")
    counts = {doc_id: _as_counts(doc) for doc_id, doc in tokens_by_doc.items()}
    term_ids: dict[str, int] = {}
    df: Counter = Counter()
    for doc_id, c in counts.items():
        if not any(n > 0 for n in c.values()):
            raise ValueError(f"document {doc_id} has no tokens")
        for term, n in c.items():
            if n > 0:
                term_ids.setdefault(term, len(term_ids))
                df[term] += 1
    n_docs = len(counts)
    idf = {t: math.log((1 + n_docs) / (1 + d)) + 1.0 for t, d in df.items()}
    out = {}
    for doc_id, c in counts.items():
        raw = {term_ids[t]: n * idf[t] for t, n in c.items() if n > 0}
        norm = math.sqrt(math.fsum(w * w for w in raw.values()))
        out[doc_id] = SparseVector.from_entries({t: w / norm for t, w in raw.items()})
    return out


@dataclass
class DuplicateGraph:
    nodes: tuple[str, ...]
    edges: dict[tuple[str, str], float]
    threshold: float = DEFAULT_THRESHOLD
    sizes: dict[str, int] = field(default_factory=dict)

    def neighbors(self) -> dict[str, dict[str, float]]:
        adj: dict[str, dict[str, float]] = {n: {} for n in self.nodes}
        for (a, b), c in self.edges.items():
            adj[a][b] = c
            adj[b][a] = c
        return adj


def _check_threshold(threshold: float) -> None:
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"duplicate threshold must be in (0, 1], got {threshold}")


def find_duplicates(
    vectors: Mapping[str, SparseVector],
    threshold: float = DEFAULT_THRESHOLD,
    sizes: Mapping[str, int] | None = None,
    block_rows: int = 2048,
) -> DuplicateGraph:
    """All document pairs with cosine >= ``threshold``.

    Scores come from a sparse product of the document-term matrix with its
    transpose, so only pairs sharing a term are ever touched.
    """
    _check_threshold(threshold)
    ids = tuple(vectors)
    if not ids:
        return DuplicateGraph((), {}, threshold, dict(sizes or {}))
    n_terms = 1 + max((t for v in vectors.values() for t in v.entries), default=0)
    indptr, indices, data = [0], [], []
    for doc_id in ids:
        v = vectors[doc_id]
        items = sorted(v.entries.items())
        indices.extend(t for t, _ in items)
        data.extend(w / v.norm for _, w in items)
        indptr.append(len(indices))
    X = sparse.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices), np.asarray(indptr)),
        shape=(len(ids), n_terms),
    )
    XT = X.T.tocsc()
    edges: dict[tuple[str, str], float] = {}
    cut = threshold - COS_EPS
    for lo in range(0, len(ids), block_rows):
        S = (X[lo : lo + block_rows] @ XT).tocoo()
        for i, j, c in zip(S.row, S.col, S.data):
            i = int(i) + lo
            j = int(j)
            if j <= i or c < cut:
                continue
            a, b = sorted((ids[i], ids[j]))
            edges[(a, b)] = float(min(1.0, max(c, threshold)))
    return DuplicateGraph(ids, dict(sorted(edges.items())), threshold, dict(sizes or {}))


def eliminate(graph: DuplicateGraph) -> set[str]:
    """Greedy removal until no edge remains.

    Repeatedly drops the node with the highest remaining degree; ties go to
    the node with fewer tokens, then to the lexicographically smaller id.
    """
    adj = {n: set(nb) for n, nb in graph.neighbors().items()}
    size = lambda n: graph.sizes.get(n, 0)  # noqa: E731
    heap = [(-len(nb), size(n), n) for n, nb in adj.items() if nb]
    heapq.heapify(heap)
    removed: set[str] = set()
    while heap:
        neg_deg, _, node = heapq.heappop(heap)
        if node in removed or -neg_deg != len(adj[node]):
            continue  # stale entry
        if not adj[node]:
            continue
        removed.add(node)
        for nb in adj.pop(node):
            adj[nb].discard(node)
            if adj[nb]:
                heapq.heappush(heap, (-len(adj[nb]), size(nb), nb))
        adj[node] = set()
    return removed


def report_rows(graph: DuplicateGraph, removed: set[str]) -> list[tuple[str, str, float]]:
    """``(removed_id, kept_neighbor_id, cosine)``, best surviving neighbor first.

    When every neighbor was removed too, the most similar one is reported.
    """
    adj = graph.neighbors()
    rows = []
    for node in sorted(removed):
        nbs = adj[node]
        kept = {n: c for n, c in nbs.items() if n not in removed} or nbs
        best = min(kept, key=lambda n: (-kept[n], n))
        rows.append((node, best, kept[best]))
    return rows


class NearDuplicateRemover(BaseEstimator):
    """Estimator wrapper: ``fit`` on a corpus, ``transform`` drops duplicates.

    ``X`` is a mapping of document id to tokens (or term counts).
    """

    def __init__(self, threshold: float = DEFAULT_THRESHOLD):
        self.threshold = threshold

    def fit(self, X: Mapping[str, Sequence[str] | Mapping[str, int]], y=None):
        _check_threshold(self.threshold)
        counts = {k: _as_counts(v) for k, v in X.items()}
        sizes = {k: sum(c.values()) for k, c in counts.items()}
        self.vectors_ = vectorize(counts)
        self.graph_ = find_duplicates(self.vectors_, self.threshold, sizes)
        self.removed_ = eliminate(self.graph_)
        return self

    def transform(self, X):
        return {k: v for k, v in X.items() if k not in self.removed_}

    def fit_transform(self, X, y=None):
        return self.fit(X).transform(X)
