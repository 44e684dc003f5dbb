"""Independent reference implementations used as test oracles.

Everything here is deliberately written the dumb way: literal piecewise
branches, pure-Python scalar loops, full sorts, and central finite
differences. None of it shares code with the package's vectorized
implementations.
"""

from __future__ import annotations

import math

import numpy as np


# --- metric formulas ---------------------------------------------------------

def recall_piecewise(recommended: set, true_tags: set, k: int) -> float:
    """Literal piecewise branch: divide by K when |true| > K, else by |true|."""
    hits = len(recommended & true_tags)
    if len(true_tags) > k:
        return hits / k
    return hits / len(true_tags)


def recall_min_denominator(recommended: set, true_tags: set, k: int) -> float:
    return len(recommended & true_tags) / min(k, len(true_tags))


def precision_strict(recommended: set, true_tags: set, k: int) -> float:
    return len(recommended & true_tags) / k


def precision_effective(recommended: set, true_tags: set) -> float:
    if not recommended:
        return 0.0
    return len(recommended & true_tags) / len(recommended)


def f1_combine(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def mean(values) -> float:
    values = list(values)
    return sum(values) / len(values)


# --- recommendation ----------------------------------------------------------

def topk_threshold_bruteforce(scores, tau: float, k: int) -> list[int]:
    """Full sort with explicit (score desc, index asc) tie-break, filter,
    then truncate."""
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return [i for i in order if scores[i] >= tau][:k]


# --- corpus ------------------------------------------------------------------

def count_tag_frequencies(records) -> dict[str, int]:
    """One-pass frequency counter over raw records (set semantics per object)."""
    counts: dict[str, int] = {}
    for rec in records:
        for tag in {t.strip().lower() for t in rec["tags"] if t.strip()}:
            counts[tag] = counts.get(tag, 0) + 1
    return counts


# --- head --------------------------------------------------------------------

def scalar_forward(model, x) -> list[float]:
    """Loop-only re-implementation of the head's forward pass.

    Works on Python floats and nested lists; mirrors the architecture
    (conv per region, ReLU, max-over-time, dense+ReLU, sigmoid) without
    any vectorized code path.
    """
    cfg = model.config
    rows = [[float(v) for v in row] for row in x.values[: x.valid_len]]
    feats: list[float] = []
    for r in cfg.region_sizes:
        w = model.conv_w[r]
        b = model.conv_b[r]
        for filt in range(cfg.filters_per_region):
            best = None
            for t in range(len(rows) - r + 1):
                acc = float(b[filt])
                for a in range(r):
                    for d in range(cfg.embed_dim):
                        acc += rows[t + a][d] * float(w[a][d][filt])
                acc = acc if acc > 0.0 else 0.0
                if best is None or acc > best:
                    best = acc
            feats.append(best)
    hidden: list[float] = []
    for j in range(cfg.hidden_units):
        acc = float(model.dense_b[j])
        for i, f in enumerate(feats):
            acc += f * float(model.dense_w[i][j])
        hidden.append(acc if acc > 0.0 else 0.0)
    scores: list[float] = []
    for n in range(cfg.num_tags):
        acc = float(model.out_b[n])
        for j in range(cfg.hidden_units):
            acc += hidden[j] * float(model.out_w[j][n])
        scores.append(1.0 / (1.0 + math.exp(-acc)))
    return scores


def finite_difference_grads(model, x, labels, h: float = 1e-3) -> dict[str, np.ndarray]:
    """Central finite differences of loss_bce(forward(x), labels) for every
    parameter coordinate. Perturbs the model's own arrays in place and
    restores them."""
    from tagrec import head as head_mod

    fd: dict[str, np.ndarray] = {}
    for name, param in model.parameters():
        grad = np.zeros(param.shape, dtype=np.float64)
        flat = param.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = head_mod.loss_bce(head_mod.forward(model, x), labels)
            flat[i] = orig - h
            down = head_mod.loss_bce(head_mod.forward(model, x), labels)
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * h)
        fd[name] = grad
    return fd


def max_relative_gradient_error(analytic: dict, numeric: dict, floor: float = 1e-10) -> float:
    """Worst per-coordinate relative error between two gradient sets.

    Coordinates where both gradients are below ``floor`` in magnitude
    count as zero error (relative error is meaningless at zero).
    """
    worst = 0.0
    for name, a in analytic.items():
        f = numeric[name]
        for av, fv in zip(a.reshape(-1), f.reshape(-1)):
            denom = max(abs(av), abs(fv))
            if denom < floor:
                continue
            worst = max(worst, abs(av - fv) / denom)
    return worst


# --- optimizer ---------------------------------------------------------------

def quadratic_minimum(a: float, b: float, c: float) -> float:
    """argmin of a*x^2 + b*x + c."""
    return -b / (2.0 * a)
