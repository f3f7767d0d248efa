"""Independent reference values for the frozen constants in the Rust tests.

Run with `python3 tools/oracles/derived_values.py`; prints JSON.
"""
import itertools
import json
import math
from fractions import Fraction

import mpmath
import numpy as np

mpmath.mp.dps = 40


def leaf_probs(transitions):
    # transitions listed breadth first, one row per internal node
    probs = [1.0]
    row = 0
    while row < len(transitions):
        nxt = []
        for p in probs:
            for q in transitions[row]:
                nxt.append(p * q)
            row += 1
        probs = nxt
    return probs


def count_stopping_times(depth, branching=2):
    # a stopping time either stops at the node or defers to every child independently;
    # a leaf may also never stop
    if depth == 0:
        return 2
    return 1 + count_stopping_times(depth - 1, branching) ** branching


def q2_fair_coin():
    w = [Fraction(2), Fraction(1, 2)]
    half = Fraction(1, 2)
    best = Fraction(0)
    # stopping choices: root, or each leaf independently stop/never
    root = (half * w[0] + half * w[1]) * (half / w[0] + half / w[1])
    best = max(best, root)
    best = max(best, Fraction(1))
    return best


def doob(p):
    pd = p / (p - 1)
    return p ** pd / (p - 1)


def extrapolate(n_r, r, p, b):
    if p == r:
        return n_r(b)
    if p > r:
        pd = p / (p - 1)
        return 2 ** (1 / r) * n_r(2 * doob(pd) ** ((p - r) / (p - 1)) * b)
    return 2 ** ((r - 1) / r) * n_r(2 ** (r - 1) * (doob(p) ** (p - r) * b) ** ((r - 1) / (p - 1)))


def hitting_probability(y0, t_max):
    # variance-rate-2 motion: P(tau <= t) = erfc(y0 / (2 sqrt t))
    return float(mpmath.erfc(mpmath.mpf(y0) / (2 * mpmath.sqrt(t_max))))


def gauss_he2_bin_targets(bins):
    edges = [mpmath.mpf(-mpmath.inf)] + [mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(i) / bins - 1) for i in range(1, bins)] + [mpmath.inf]
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        num = mpmath.quad(lambda x: mpmath.sqrt(2) * x * mpmath.npdf(x), [a, b])
        out.append(float(num * bins))
    return out


def torus_cos_bin_targets(bins):
    # exact average of -sin over each bin
    return [float((mpmath.cos(2 * mpmath.pi * (i + 1) / bins) - mpmath.cos(2 * mpmath.pi * i / bins)) / (2 * mpmath.pi / bins)) for i in range(bins)]


def main():
    out = {
        "leaf_probs_depth2": leaf_probs([[0.3, 0.7], [0.5, 0.5], [0.2, 0.8]]),
        "stopping_times_depth1": count_stopping_times(1),
        "stopping_times_depth2": count_stopping_times(2),
        "stopping_times_depth3": count_stopping_times(3),
        "q2_fair_coin": str(q2_fair_coin()),
        "weighted_norm_fair_coin": math.sqrt(0.5 * 1 * 2 + 0.5 * 9 * 0.5),
        "doob_1.5": doob(1.5),
        "doob_2": doob(2.0),
        "doob_3": doob(3.0),
        "extrap_r2_p4_b1": extrapolate(lambda a: 8 * a, 2, 4, 1.0),
        "extrap_r2_p3_b1": extrapolate(lambda a: 8 * a, 2, 3, 1.0),
        "extrap_r2_p1.5_b1": extrapolate(lambda a: 8 * a, 2, 1.5, 1.0),
        "extrap_r2_p1.5_b2": extrapolate(lambda a: 8 * a, 2, 1.5, 2.0),
        "hitting_y1_t50": hitting_probability(1, 50),
        "gauss_he2_targets_64": gauss_he2_bin_targets(64),
        "torus_cos_targets_64": torus_cos_bin_targets(64),
        "normal_quantile_0.975": float(mpmath.sqrt(2) * mpmath.erfinv(mpmath.mpf(0.95))),
    }
    # brute-force cross-check of the stopping time count on the depth-2 dyadic tree
    leaves = 4
    count = 0
    # nodes: root(0), level1 (1,2), leaves (3..6); a stopping time is an antichain plus "never" elsewhere
    nodes = {0: [1, 2], 1: [3, 4], 2: [5, 6]}
    parents = {1: 0, 2: 0, 3: 1, 4: 1, 5: 2, 6: 2}
    for mask in range(1 << 7):
        chosen = [v for v in range(7) if mask >> v & 1]
        ok = True
        for v in chosen:
            u = v
            while u in parents:
                u = parents[u]
                if u in chosen:
                    ok = False
        count += ok
    assert count == out["stopping_times_depth2"], count
    del leaves, nodes
    assert abs(np.sum(out["gauss_he2_targets_64"])) < 1e-10
    print(json.dumps(out, indent=1))


if __name__ == "__main__":
    main()
