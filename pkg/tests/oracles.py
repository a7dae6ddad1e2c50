"""Independent reference computations shared by the unit and acceptance tests."""

from __future__ import annotations

import numpy as np

from smnet.classify import loss_and_grad


def finite_difference_error(kind, params, X, y, l2_lambda, h=1e-6):
    """Largest entry-wise relative gap between analytic and central-difference gradients."""
    _, grads = loss_and_grad(kind, params, X, y, l2_lambda)
    worst = 0.0
    for name, value in params.items():
        for idx in np.ndindex(value.shape):
            plus = {k: v.copy() for k, v in params.items()}
            minus = {k: v.copy() for k, v in params.items()}
            plus[name][idx] += h
            minus[name][idx] -= h
            numeric = (loss_and_grad(kind, plus, X, y, l2_lambda)[0]
                       - loss_and_grad(kind, minus, X, y, l2_lambda)[0]) / (2 * h)
            analytic = grads[name][idx]
            worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8))
    return worst


def concat_argmax(stream_probs, rosters):
    """Class of the largest probability over all streams, lowest class id on ties."""
    best_c, best_p = None, -np.inf
    for probs, roster in zip(stream_probs, rosters):
        for p, c in zip(probs, roster):
            if p > best_p or (p == best_p and c < best_c):
                best_c, best_p = c, p
    return best_c


def brute_mean_weighted(stream_probs, rosters, means, v, eps):
    best_c, best_s = None, -np.inf
    for probs, roster in zip(stream_probs, rosters):
        for p, c in zip(probs, roster):
            d = np.sqrt(np.sum((np.asarray(v) - means[c]) ** 2))
            s = p * (1.0 / max(eps, d))
            if s > best_s or (s == best_s and c < best_c):
                best_c, best_s = c, s
    return best_c


def brute_min_distance(stream_probs, rosters, bank, v):
    """argmin over per-stream raw winners of the nearest banked member distance."""
    best_c, best_d = None, np.inf
    for probs, roster in zip(stream_probs, rosters):
        winner = roster[int(np.argmax(probs))]
        d = min(np.sqrt(np.sum((m - v) ** 2)) for m in bank[winner])
        if d < best_d or (d == best_d and winner < best_c):
            best_c, best_d = winner, d
    return best_c


def random_fusion_case(rng, max_streams=5, max_roster=5, dim=3):
    """A random plan-shaped instance: rosters, per-stream probabilities, means, bank, test vector."""
    from smnet.partition import StreamPlan

    n = int(rng.integers(1, max_streams + 1))
    sizes = rng.integers(1, max_roster + 1, n)
    classes = rng.permutation(int(sizes.sum()))
    rosters, start = [], 0
    for s in sizes:
        rosters.append(tuple(sorted(int(c) for c in classes[start:start + s])))
        start += s
    plan = StreamPlan(n, {c: i for i, r in enumerate(rosters) for c in r},
                      {c: 0 for r in rosters for c in r}, tuple(rosters),
                      {0: tuple((c, 100.0) for r in rosters for c in r)})
    probs = [rng.dirichlet(np.ones(len(r))) for r in rosters]
    means = {c: rng.standard_normal(dim) for r in rosters for c in r}
    bank = {c: rng.standard_normal((int(rng.integers(1, 6)), dim)) for r in rosters for c in r}
    v = rng.standard_normal(dim)
    return plan, probs, means, bank, v
