"""Independent reference implementations used to check the fast paths.

Everything here is deliberately written the slow, obvious way (python loops,
eigendecompositions, exhaustive searches) and never shares code with the
package modules it verifies.
"""

from __future__ import annotations

import numpy as np

from driftids.metrics import f1 as _f1
from driftids.training import batch_loss


def forward_brute(weights, biases, x, relu_except_last=True):
    """Loop-based MLP forward pass (ReLU hidden, linear last layer)."""
    out = []
    for row in np.asarray(x, dtype=np.float64):
        h = row.copy()
        for i, (w, b) in enumerate(zip(weights, biases)):
            pre = np.zeros(w.shape[1])
            for j in range(w.shape[1]):
                acc = b[j]
                for k in range(w.shape[0]):
                    acc += h[k] * w[k, j]
                pre[j] = acc
            last = i == len(weights) - 1
            h = pre if (last and relu_except_last) else np.maximum(pre, 0.0)
        out.append(h)
    return np.vstack(out)


def fd_gradients(params, x, triplets, snapshots, weights, step=1e-5):
    """Central finite differences of the composite loss over every parameter."""
    grads = []
    for arr in params.flat_arrays():
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            original = arr[idx]
            arr[idx] = original + step
            up = batch_loss(params, x, triplets, snapshots, weights).total
            arr[idx] = original - step
            down = batch_loss(params, x, triplets, snapshots, weights).total
            arr[idx] = original
            g[idx] = (up - down) / (2.0 * step)
            it.iternext()
        grads.append(g)
    return grads


def max_relative_error(analytic, numeric):
    """Worst per-coordinate relative disagreement between gradient sets.

    The denominator floor sits well above central-difference roundoff
    (~1e-11 at step 1e-5), so coordinates whose true gradient is zero
    compare as equal instead of amplifying the oracle's own noise.
    """
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.abs(a) + np.abs(n), 1e-6)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def smoothness_gap(params, x, triplets, margin):
    """Distance of the configuration from the nearest non-smooth point.

    Central differences are only meaningful away from the ReLU and hinge
    kinks; configurations closer than the finite-difference step must be
    resampled, not compared.
    """
    import driftids.autoencoder as ae

    h, enc_cache = ae.encode_with_cache(params, np.asarray(x, dtype=np.float64))
    _, dec_cache = ae.decode_with_cache(params, h)
    gap = np.inf
    for cache, weights in ((enc_cache, params.encoder_weights), (dec_cache, params.decoder_weights)):
        for i, (_, pre) in enumerate(cache):
            if i != len(weights) - 1:  # last layer is linear, no kink
                gap = min(gap, float(np.abs(pre).min()))
    if triplets is not None:
        a, p, n = triplets.anchors, triplets.positives, triplets.negatives
        d_ap = np.sqrt(((h[a] - h[p]) ** 2).sum(axis=1))
        d_an = np.sqrt(((h[a] - h[n]) ** 2).sum(axis=1))
        gap = min(gap, float(np.abs(d_ap - d_an + margin).min()))
        gap = min(gap, float(d_ap.min()), float(d_an.min()))
    return gap


def pca_covariance_oracle(data):
    """Eigendecomposition of the population (1/n) covariance, descending."""
    data = np.asarray(data, dtype=np.float64)
    mean = data.mean(axis=0)
    centered = data - mean
    cov = centered.T @ centered / data.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    return mean, eigvals[order], eigvecs[:, order]


def fre_discarded_oracle(data, h, k):
    """Anomaly score as the energy on the discarded eigenvectors."""
    mean, _, eigvecs = pca_covariance_oracle(data)
    discarded = eigvecs[:, k:]
    centered = np.asarray(h, dtype=np.float64) - mean
    projections = centered @ discarded
    return (projections * projections).sum(axis=1)


def threshold_candidates(scores):
    unique = np.unique(scores)
    cands = [unique[0] - 1.0]
    for a, b in zip(unique[:-1], unique[1:]):
        cands.append((a + b) / 2.0)
    cands.append(unique[-1] + 1.0)
    return cands


def best_f_brute(scores, labels):
    """Exhaustive search over threshold candidates, recomputing F1 each time."""
    best_tau, best_f1 = None, -1.0
    for tau in threshold_candidates(scores):
        value = _f1(np.asarray(scores) > tau, labels)
        if value >= best_f1:
            best_tau, best_f1 = float(tau), value
    return best_tau, best_f1


def pr_auc_brute(scores, labels):
    """Prefix enumeration over descending distinct scores, O(n^2)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    total_pos = int(np.sum(labels == 1))
    area = 0.0
    prev_recall = 0.0
    for s in sorted(set(scores.tolist()), reverse=True):
        predicted = scores >= s
        tp = int(np.sum(predicted & (labels == 1)))
        fp = int(np.sum(predicted & (labels == 0)))
        precision = tp / (tp + fp)
        recall = tp / total_pos
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def nearest_centroid_brute(x, centroids):
    """Per-row nearest centroid via explicit distance loops."""
    assignment = []
    for row in np.asarray(x, dtype=np.float64):
        best_j, best_d = -1, np.inf
        for j, c in enumerate(np.asarray(centroids, dtype=np.float64)):
            d = float(((row - c) ** 2).sum())
            if d < best_d:
                best_j, best_d = j, d
        assignment.append(best_j)
    return np.asarray(assignment, dtype=np.int64)


def summarize_direct(f1_matrix):
    """Direct evaluation of the three stream metrics on a full matrix."""
    m = f1_matrix.shape[0]
    avg = sum(f1_matrix[i, i] for i in range(m)) / m
    fwd = sum(f1_matrix[i, j] for i in range(m) for j in range(m) if j > i) / (m * (m - 1) / 2)
    bwd = sum(f1_matrix[m - 1, i] - f1_matrix[i, i] for i in range(m)) / (m * (m - 1) / 2)
    return avg, fwd, bwd
