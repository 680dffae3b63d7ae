"""Independent reference implementations used by the tests.

Plain Python loops over scalars, written without reference to the package
internals, so that agreement with the vectorized code is meaningful.
"""

import math
from itertools import permutations

from scipy.stats import norm


def epanechnikov(x):
    return 0.75 * (1.0 - x * x) if abs(x) <= 1.0 else 0.0


def bandwidth(scale, n):
    R, mu2 = 3.0 / 5.0, 1.0 / 5.0
    return (243.0 * R / (35.0 * mu2 * mu2 * n)) ** 0.2 * scale


def ikose(residuals, K, E, max_iter=50):
    r = sorted(residuals)
    rk = r[K - 1]
    nu = len(r)
    s = None
    for _ in range(max_iter):
        s = rk / norm.ppf(0.5 * (1.0 + K / nu))
        new_nu = sum(1 for x in r if x <= E * s)
        if new_nu == nu:
            break
        nu = new_nu
    return s, nu


def inlier_weight(residual_row, scale, bw, E):
    """Vertex weight by a loop over every hyperedge, with the incidence test inline."""
    total, degree = 0.0, 0
    for r in residual_row:
        h = 1 if r <= E * scale else 0
        degree += h
        total += h * epanechnikov(r / bw) / (scale * bw)
    return total / degree


def full_weight(residual_row, scale, bw):
    return sum(epanechnikov(r / bw) / (scale * bw) for r in residual_row) / len(residual_row)


def preference(residual_row, scale, E):
    return [math.exp(-r / scale) if r <= E * scale else 0.0 for r in residual_row]


def tanimoto(p, q):
    pq = sum(a * b for a, b in zip(p, q))
    pp = sum(a * a for a in p)
    qq = sum(b * b for b in q)
    return 1.0 - pq / (pp + qq - pq)


def mtd(prefs, weights):
    """Minimum T-distance by a double loop: for each vertex, the minimum over
    vertices ranked above it (heavier, or equally heavy with a lower index);
    the top vertex gets the maximum over all others."""
    n = len(prefs)
    top = max(range(n), key=lambda i: (weights[i], -i))
    out = []
    for i in range(n):
        if i == top:
            d = [tanimoto(prefs[i], prefs[j]) for j in range(n) if j != i]
            out.append(max(d) if d else 0.0)
            continue
        d = [tanimoto(prefs[i], prefs[j]) for j in range(n)
             if weights[j] > weights[i] or (weights[j] == weights[i] and j < i)]
        out.append(min(d))
    return out


def misclassification(pred, gt):
    """Exhaustive search over injective maps of predicted structures to
    ground-truth structures; outliers only match outliers."""
    P = sorted({int(p) for p in pred} - {0})
    G = sorted({int(g) for g in gt} - {0})
    best = 0
    slots = G + [None] * len(P)
    for perm in set(permutations(slots, len(P))):
        mapping = {0: 0}
        mapping.update({p: g for p, g in zip(P, perm)})
        hits = sum(1 for p, g in zip(pred, gt) if mapping.get(int(p)) == int(g))
        best = max(best, hits)
    return 100.0 * (len(gt) - best) / len(gt)
