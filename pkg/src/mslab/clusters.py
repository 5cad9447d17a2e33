"""Cluster extraction from a converged state and the purity metrics.

Extraction is single-linkage: two points share a cluster iff they are joined
by a chain of pairwise distances strictly below the merge radius.  At full
convergence the terminal-separation guarantee makes any radius between the
intra-cluster diameter and the inter-cluster gap produce the same partition;
single linkage additionally degrades gracefully when a run is stopped early.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Clustering:
    """Per-point labels 0..M-1 plus per-cluster centroids and sizes."""

    labels: np.ndarray
    centers: np.ndarray
    sizes: np.ndarray

    @property
    def cluster_count(self) -> int:
        return int(self.centers.shape[0])


class _UnionFind:
    def __init__(self, n: int):
        self.parent = np.arange(n)

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def extract_clusters(state: np.ndarray, merge_radius: float) -> Clustering:
    """Connected components of the strict merge-radius distance graph."""
    if merge_radius <= 0:
        raise ValueError("merge radius must be positive")
    state = np.asarray(state, dtype=float)
    n = state.shape[0]
    uf = _UnionFind(n)
    r2 = merge_radius * merge_radius
    d2 = np.sum((state[:, None, :] - state[None, :, :]) ** 2, axis=-1)
    ii, jj = np.nonzero(np.triu(d2 < r2, k=1))
    for a, b in zip(ii.tolist(), jj.tolist()):
        uf.union(a, b)
    roots = np.array([uf.find(i) for i in range(n)])
    # relabel components 0..M-1 in order of first appearance
    _, first_pos, labels = np.unique(roots, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first_pos))
    labels = order[labels]
    m = labels.max() + 1
    centers = np.vstack([state[labels == l].mean(axis=0) for l in range(m)])
    sizes = np.bincount(labels, minlength=m)
    return Clustering(labels.astype(np.int64), centers, sizes.astype(np.int64))


def contingency(pred, truth) -> np.ndarray:
    """Cluster-by-label count matrix with empty rows and columns pruned."""
    pred = np.asarray(pred.labels if isinstance(pred, Clustering) else pred)
    truth = np.asarray(truth)
    if pred.shape[0] != truth.shape[0]:
        raise ValueError(
            f"label length mismatch: {pred.shape[0]} predictions, "
            f"{truth.shape[0]} truth labels"
        )
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    counts = np.zeros((pi.max() + 1, ti.max() + 1), dtype=np.int64)
    np.add.at(counts, (pi, ti), 1)
    return counts


def acp(counts: np.ndarray) -> float:
    """Average cluster purity: mean over clusters of sum_r P(label r | cluster)^2."""
    counts = np.asarray(counts, dtype=float)
    counts = counts[counts.sum(axis=1) > 0]
    if counts.size == 0:
        raise ValueError("contingency table has no occupied clusters")
    p = counts / counts.sum(axis=1, keepdims=True)
    return float(np.mean(np.sum(p * p, axis=1)))


def alp(counts: np.ndarray) -> float:
    """Average label purity: mean over labels of sum_q P(cluster q | label)^2."""
    counts = np.asarray(counts, dtype=float)
    counts = counts[:, counts.sum(axis=0) > 0]
    if counts.size == 0:
        raise ValueError("contingency table has no occupied labels")
    p = counts / counts.sum(axis=0, keepdims=True)
    return float(np.mean(np.sum(p * p, axis=0)))


def k_score(counts: np.ndarray) -> float:
    """Geometric mean of average cluster purity and average label purity."""
    return float(np.sqrt(acp(counts) * alp(counts)))


def purity_metrics(pred, truth) -> dict:
    """All three purity figures plus the cluster count, as a flat record."""
    table = contingency(pred, truth)
    labels = pred.labels if isinstance(pred, Clustering) else np.asarray(pred)
    return {
        "acp": acp(table),
        "alp": alp(table),
        "k": k_score(table),
        "cluster_count": int(np.unique(labels).size),
    }
