"""Independent brute-force reference implementations used by the tests.

Nothing here imports the package's numerics; everything is plain loops.
"""

import math

import numpy as np


def naive_distances(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = len(x)
    d = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i != j:
                d[i][j] = math.sqrt(sum((a - b) ** 2 for a, b in zip(x[i], x[j])))
    return d


def enumerate_triplets(labels):
    n = len(labels)
    return [(a, p, k) for a in range(n) for p in range(n) for k in range(n)
            if a != p and labels[a] == labels[p] and labels[a] != labels[k]]


def batch_all_oracle(x, labels, margin):
    d = naive_distances(x)
    active = []
    for a, p, n in enumerate_triplets(labels):
        h = d[a][p] - d[a][n] + margin
        if h > 0:
            active.append(h)
    if not active:
        return 0.0, 0
    return math.fsum(active) / len(active), len(active)


def per_anchor_oracle(x, labels, margin, easy_positive):
    """Mean hinge over anchors with >= 1 positive and >= 1 negative."""
    d = naive_distances(x)
    n = len(labels)
    terms = []
    for a in range(n):
        pos = [j for j in range(n) if j != a and labels[j] == labels[a]]
        neg = [k for k in range(n) if labels[k] != labels[a]]
        if not pos or not neg:
            continue
        dp = [d[a][j] for j in pos]
        p_dist = min(dp) if easy_positive else max(dp)
        n_dist = min(d[a][k] for k in neg)
        terms.append(max(p_dist - n_dist + margin, 0.0))
    if not terms:
        return 0.0
    return math.fsum(terms) / len(terms)


def auc_pairs(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else (0.5 if p == q else 0.0)
    return total / (len(pos) * len(neg))


def central_diff(f, x, h=1e-5):
    """Central finite-difference gradient of scalar ``f`` at array ``x``."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), np.linalg.norm(a), 1e-12))


def near_boundary(x, labels, margin, tol=1e-3):
    """True if any valid-triplet hinge or any per-anchor extreme selection is within ``tol`` of a switch."""
    d = naive_distances(x)
    n = len(labels)
    for a, p, k in enumerate_triplets(labels):
        if abs(d[a][p] - d[a][k] + margin) < tol:
            return True
    for a in range(n):
        pos = sorted(d[a][j] for j in range(n) if j != a and labels[j] == labels[a])
        neg = sorted(d[a][k] for k in range(n) if labels[k] != labels[a])
        for vals in (pos, neg):
            if any(v2 - v1 < tol for v1, v2 in zip(vals, vals[1:])):
                return True
        if pos and pos[0] < tol:
            return True
    return False
