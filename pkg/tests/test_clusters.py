import math

import numpy as np
import pytest

from mslab.clusters import (
    Clustering,
    acp,
    alp,
    contingency,
    extract_clusters,
    k_score,
    purity_metrics,
)


def bfs_components(points, radius):
    """Independent oracle: breadth-first search on the strict distance graph."""
    n = len(points)
    adj = [
        [j for j in range(n) if j != i
         and math.dist(points[i], points[j]) < radius]
        for i in range(n)
    ]
    label = [-1] * n
    current = 0
    for start in range(n):
        if label[start] != -1:
            continue
        queue = [start]
        label[start] = current
        while queue:
            a = queue.pop()
            for b in adj[a]:
                if label[b] == -1:
                    label[b] = current
                    queue.append(b)
        current += 1
    return label


def brute_purity(pred, truth):
    """Independent oracle: purity sums from raw label pairs, no numpy."""
    clusters = sorted(set(pred))
    labels = sorted(set(truth))
    acp_total = 0.0
    for q in clusters:
        members = [t for p, t in zip(pred, truth) if p == q]
        acp_total += sum(
            (members.count(r) / len(members)) ** 2 for r in labels
        )
    alp_total = 0.0
    for r in labels:
        members = [p for p, t in zip(pred, truth) if t == r]
        alp_total += sum(
            (members.count(q) / len(members)) ** 2 for q in clusters
        )
    a = acp_total / len(clusters)
    b = alp_total / len(labels)
    return a, b, math.sqrt(a * b)


def same_partition(a, b):
    mapping = {}
    for x, y in zip(a, b):
        if x in mapping and mapping[x] != y:
            return False
        mapping[x] = y
    return len(set(mapping.values())) == len(mapping)


class TestExtractClusters:
    def test_single_blob(self):
        pts = np.array([[0.0, 0.0], [0.01, 0.0], [0.0, 0.01]])
        c = extract_clusters(pts, 0.1)
        assert c.cluster_count == 1
        assert c.sizes.tolist() == [3]

    def test_two_groups(self):
        pts = np.array([[0.0, 0.0], [0.05, 0.0], [3.0, 0.0], [3.05, 0.0]])
        c = extract_clusters(pts, 0.2)
        assert c.cluster_count == 2
        assert c.labels.tolist() == [0, 0, 1, 1]

    def test_chain_is_transitive(self):
        r = 0.5
        pts = np.array([[0.0], [0.9 * r], [1.8 * r]])
        c = extract_clusters(pts, r)
        assert c.cluster_count == 1
        assert c.labels.tolist() == bfs_components(pts.tolist(), r)

    def test_exact_radius_not_linked(self):
        pts = np.array([[0.0], [0.5]])
        assert extract_clusters(pts, 0.5).cluster_count == 2

    def test_labels_contiguous_and_sizes_sum(self):
        rng = np.random.default_rng(2)
        pts = rng.uniform(-2, 2, (50, 2))
        c = extract_clusters(pts, 0.4)
        assert sorted(set(c.labels.tolist())) == list(range(c.cluster_count))
        assert c.sizes.sum() == 50
        for l in range(c.cluster_count):
            np.testing.assert_allclose(
                c.centers[l], pts[c.labels == l].mean(axis=0), rtol=1e-12
            )

    def test_matches_bfs_oracle_on_random_data(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            pts = rng.uniform(-1.5, 1.5, (int(rng.integers(2, 35)), 2))
            r = float(rng.uniform(0.1, 1.0))
            got = extract_clusters(pts, r).labels.tolist()
            want = bfs_components(pts.tolist(), r)
            assert same_partition(got, want)

    def test_order_invariance(self):
        rng = np.random.default_rng(13)
        pts = rng.uniform(-1, 1, (30, 2))
        base = extract_clusters(pts, 0.3).labels
        for _ in range(10):
            perm = rng.permutation(30)
            permuted = extract_clusters(pts[perm], 0.3).labels
            assert same_partition(base[perm].tolist(), permuted.tolist())

    def test_radius_validation(self):
        with pytest.raises(ValueError):
            extract_clusters(np.zeros((2, 2)), 0.0)


class TestContingency:
    def test_identity_partition(self):
        t = contingency([0, 0, 1, 1], [5, 5, 9, 9])
        assert t.tolist() == [[2, 0], [0, 2]]

    def test_single_cluster_two_labels(self):
        t = contingency([0] * 10, [0] * 5 + [1] * 5)
        assert t.tolist() == [[5, 5]]

    def test_example_table(self):
        pred = [0, 0, 1, 1]
        truth = [0, 0, 0, 1]
        assert contingency(pred, truth).tolist() == [[2, 0], [1, 1]]

    def test_mismatch_raises(self):
        with pytest.raises(ValueError, match="mismatch"):
            contingency([0, 1], [0])

    def test_accepts_clustering(self):
        c = Clustering(
            labels=np.array([0, 0, 1]),
            centers=np.zeros((2, 2)),
            sizes=np.array([2, 1]),
        )
        assert contingency(c, [0, 0, 1]).tolist() == [[2, 0], [0, 1]]


class TestPurity:
    def test_perfect_scores_one(self):
        t = contingency([0, 0, 1, 1, 2], [7, 7, 3, 3, 1])
        assert acp(t) == 1.0
        assert alp(t) == 1.0
        assert k_score(t) == 1.0

    def test_single_cluster_two_even_labels(self):
        t = contingency([0] * 8, [0] * 4 + [1] * 4)
        assert acp(t) == pytest.approx(0.5, abs=1e-15)
        assert alp(t) == pytest.approx(1.0, abs=1e-15)
        assert k_score(t) == pytest.approx(math.sqrt(0.5), rel=1e-15)

    def test_example_table_values(self):
        pred = [0, 0, 1, 1]
        truth = [0, 0, 0, 1]
        t = contingency(pred, truth)
        a, b, k = brute_purity(pred, truth)
        assert acp(t) == pytest.approx(a, abs=1e-15)
        assert alp(t) == pytest.approx(b, abs=1e-15)
        assert k_score(t) == pytest.approx(k, abs=1e-15)
        # hand evaluation: rows [2,0] and [1,1]; columns [2,1] and [0,1]
        assert acp(t) == pytest.approx(0.75, abs=1e-15)
        assert alp(t) == pytest.approx(7.0 / 9.0, rel=1e-15)
        assert k_score(t) == pytest.approx(math.sqrt(0.75 * 7.0 / 9.0), rel=1e-15)

    def test_row_column_permutation_invariance(self):
        rng = np.random.default_rng(3)
        t = rng.integers(0, 6, size=(4, 3))
        t[0, 0] += 1  # ensure non-empty
        for _ in range(10):
            rp = rng.permutation(4)
            cp = rng.permutation(3)
            tp = t[rp][:, cp]
            occupied_rows = t[t.sum(axis=1) > 0]
            assert acp(tp) == pytest.approx(acp(t), rel=1e-14)
            assert alp(tp) == pytest.approx(alp(t), rel=1e-14)

    def test_k_one_iff_matching_partition(self):
        truth = [0, 0, 1, 1, 2, 2]
        relabeled = [5, 5, 3, 3, 8, 8]
        assert k_score(contingency(relabeled, truth)) == 1.0
        merged = [0, 0, 0, 0, 1, 1]
        assert k_score(contingency(merged, truth)) < 1.0

    def test_single_label_alp(self):
        # one true label split across clusters: alp = sum of squared shares
        pred = [0, 0, 0, 1, 2]
        t = contingency(pred, [4] * 5)
        expected = (3 / 5) ** 2 + (1 / 5) ** 2 + (1 / 5) ** 2
        assert alp(t) == pytest.approx(expected, rel=1e-15)
        assert alp(contingency([0] * 5, [4] * 5)) == 1.0

    def test_values_in_unit_interval(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            n = int(rng.integers(2, 30))
            pred = rng.integers(0, 5, n)
            truth = rng.integers(0, 4, n)
            rec = purity_metrics(pred, truth)
            for key in ("acp", "alp", "k"):
                assert 0.0 < rec[key] <= 1.0

    def test_matches_brute_force_on_random_partitions(self):
        rng = np.random.default_rng(9)
        for _ in range(150):
            n = int(rng.integers(2, 40))
            pred = rng.integers(0, 6, n).tolist()
            truth = rng.integers(0, 5, n).tolist()
            t = contingency(pred, truth)
            a, b, k = brute_purity(pred, truth)
            assert acp(t) == pytest.approx(a, abs=1e-12)
            assert alp(t) == pytest.approx(b, abs=1e-12)
            assert k_score(t) == pytest.approx(k, abs=1e-12)
