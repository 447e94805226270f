"""Slow reference implementations used by the tests."""

from __future__ import annotations

import math
from collections import Counter
from itertools import combinations


def dense_tfidf(docs: dict[str, list[str]]) -> dict[str, list[float]]:
    """Double-loop TF-IDF: raw tf, idf = ln((1+N)/(1+df)) + 1, L2 normalized."""
    vocab = sorted({t for toks in docs.values() for t in toks})
    n = len(docs)
    out = {}
    for vid, toks in docs.items():
        c = Counter(toks)
        vec = []
        for w in vocab:
            df = sum(1 for other in docs.values() if w in other)
            vec.append(c[w] * (math.log((1 + n) / (1 + df)) + 1))
        norm = math.sqrt(sum(x * x for x in vec))
        out[vid] = [x / norm for x in vec]
    return out


def dense_cosines(docs: dict[str, list[str]]) -> dict[tuple[str, str], float]:
    vecs = dense_tfidf(docs)
    return {
        (a, b): sum(x * y for x, y in zip(vecs[a], vecs[b]))
        for a, b in combinations(sorted(vecs), 2)
    }


def pearson_fsum(x, y) -> float:
    """Two-pass Pearson with exactly rounded sums."""
    n = len(x)
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    dx = [a - mx for a in x]
    dy = [b - my for b in y]
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    return sxy / math.sqrt(math.fsum(a * a for a in dx) * math.fsum(b * b for b in dy))


def steiger_z1_star(r12, r13, r23, n):
    """Steiger's Z1* for two dependent correlations sharing variable 1."""
    z12 = 0.5 * math.log((1 + r12) / (1 - r12))
    z13 = 0.5 * math.log((1 + r13) / (1 - r13))
    rbar_sq = (r12 ** 2 + r13 ** 2) / 2.0
    f = (1 - r23) / (2 * (1 - rbar_sq))
    if f > 1:
        f = 1.0
    h = (1 - f * rbar_sq) / (1 - rbar_sq)
    z = (z12 - z13) * math.sqrt(n - 3) / math.sqrt(2 * (1 - r23) * h)
    p = 2 * (1 - 0.5 * (1 + math.erf(abs(z) / math.sqrt(2))))
    return z, p
