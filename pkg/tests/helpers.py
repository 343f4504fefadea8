"""Independent oracles and small builders shared by the tests."""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

from leap.autodiff import Tape, Tensor
from leap.graph import build_graph


def random_graph(n: int, p: float, rng: np.random.Generator, dim: int = 3):
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    return build_graph(pairs, n, rng.normal(size=(n, dim)))


def path_graph(n: int, dim: int = 1):
    return build_graph([(i, i + 1) for i in range(n - 1)], n, np.ones((n, dim)))


def two_triangles():
    edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]
    return build_graph(edges, 6, np.ones((6, 1)))


# --- shortest paths -------------------------------------------------------------

def floyd_warshall(n: int, edges) -> np.ndarray:
    d = np.full((n, n), math.inf)
    np.fill_diagonal(d, 0.0)
    for u, v in edges:
        d[u, v] = d[v, u] = 1.0
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i, k] + d[k, j] < d[i, j]:
                    d[i, j] = d[i, k] + d[k, j]
    return d


# --- PageRank -------------------------------------------------------------------

def dense_pagerank(n: int, edges, damping: float = 0.85, iters: int = 5000) -> np.ndarray:
    """Plain dense power iteration; dangling nodes spread uniformly."""
    a = np.zeros((n, n))
    for u, v in edges:
        a[u, v] = a[v, u] = 1.0
    out = a.sum(axis=1)
    p = np.zeros((n, n))
    for i in range(n):
        p[i] = a[i] / out[i] if out[i] > 0 else 1.0 / n
    x = np.full(n, 1.0 / n)
    for _ in range(iters):
        x = damping * (x @ p) + (1 - damping) / n
    return x


# --- partitions -----------------------------------------------------------------

def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def modularity_oracle(n: int, edges, blocks) -> float:
    m = len(edges)
    deg = np.zeros(n)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    label = {u: i for i, b in enumerate(blocks) for u in b}
    inside = sum(1 for u, v in edges if label[u] == label[v])
    tot = sum(sum(deg[u] for u in b) ** 2 for b in blocks)
    return inside / m - tot / (4 * m * m)


def best_partition(n: int, edges):
    return max(set_partitions(range(n)), key=lambda b: modularity_oracle(n, edges, b))


# --- ranking metrics ------------------------------------------------------------

def brute_auc(pos, neg) -> float:
    wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return wins / (len(pos) * len(neg))


def brute_ap(pos, neg) -> float:
    """Precision at each positive under the worst order among ties.

    The j-th of m positives tied at score s sees everything scored above s,
    every negative tied at s, and j of the tied positives.
    """
    terms = []
    for s in sorted(set(pos), reverse=True):
        above_pos = sum(p > s for p in pos)
        above = above_pos + sum(q > s for q in neg)
        tied_neg = sum(q == s for q in neg)
        m = sum(p == s for p in pos)
        for j in range(1, m + 1):
            terms.append(float(Fraction(above_pos + j, above + tied_neg + j)))
    return math.fsum(terms) / len(pos)


def score_lists(grid, max_len: int):
    for total in range(2, max_len + 1):
        for n_pos in range(1, total):
            for pos in itertools.product(grid, repeat=n_pos):
                for neg in itertools.product(grid, repeat=total - n_pos):
                    yield pos, neg


# --- gradients ------------------------------------------------------------------

def numeric_grad(f, t: Tensor, eps: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(t.values)
    for idx in np.ndindex(*t.shape):
        orig = t.values[idx]
        t.values[idx] = orig + eps
        hi = f(Tape(record=False)).item()
        t.values[idx] = orig - eps
        lo = f(Tape(record=False)).item()
        t.values[idx] = orig
        g[idx] = (hi - lo) / (2 * eps)
    return g


def analytic_grads(f, tensors) -> list[np.ndarray]:
    for t in tensors:
        t.grad = None
    tape = Tape()
    tape.backward(f(tape))
    return [np.zeros_like(t.values) if t.grad is None else t.grad.copy() for t in tensors]


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale < 1e-12 else float(np.linalg.norm(a - b) / scale)


def max_grad_error(f, tensors, eps: float = 1e-5) -> float:
    analytic = analytic_grads(f, tensors)
    return max(rel_error(a, numeric_grad(f, t, eps)) for a, t in zip(analytic, tensors))
