"""Independent reference implementations used to derive expected values.

Everything here is deliberately naive: plain Python loops, exact rational
arithmetic or numerical quadrature, sharing no code with the package.
"""

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy import integrate
from scipy.stats import norm


def c_of_k_exact(k, s):
    """2k / Σ_{i,j<k} C(s-1,i) C(s-1,j) / C(2s-2,i+j) in exact rationals."""
    total = Fraction(0)
    for i in range(k):
        for j in range(k):
            total += Fraction(math.comb(s - 1, i) * math.comb(s - 1, j),
                              math.comb(2 * s - 2, i + j))
    return float(Fraction(2 * k) / total)


def pairwise_variance(y):
    pairs = list(itertools.combinations(y, 2))
    return sum((a - b) ** 2 for a, b in pairs) / len(pairs)


def knn_brute(X, y, x0, k):
    d = [(sum((a - b) ** 2 for a, b in zip(row, x0)), i) for i, row in enumerate(X)]
    d.sort()
    return sum(y[i] for _, i in d[:k]) / k


def kpnn_brute(X, x0, k):
    members = []
    for i, xi in enumerate(X):
        lo = [min(a, b) for a, b in zip(xi, x0)]
        hi = [max(a, b) for a, b in zip(xi, x0)]
        count = 0
        for j, xj in enumerate(X):
            if j != i and all(l <= v <= h for v, l, h in zip(xj, lo, hi)):
                count += 1
        if count < k:
            members.append(i)
    return members


def cart_brute(X, y, x0, k):
    """Path-only CART with the objective spelled out through sums of squares."""
    X = [list(r) for r in X]
    y = list(y)
    idx = list(range(len(y)))

    def sse(ids):
        if not ids:
            return 0.0
        m = sum(y[i] for i in ids) / len(ids)
        return sum((y[i] - m) ** 2 for i in ids)

    while True:
        if len(idx) <= k or max(y[i] for i in idx) == min(y[i] for i in idx):
            break
        base = sse(idx)
        best = None
        for j in range(len(X[0])):
            vals = sorted(set(X[i][j] for i in idx))
            for a, b in zip(vals, vals[1:]):
                z = (a + b) / 2
                left = [i for i in idx if X[i][j] < z]
                right = [i for i in idx if X[i][j] >= z]
                gain = (base - sse(left) - sse(right)) / len(idx)
                if best is None or gain > best[0] + 1e-12 * base / len(idx):
                    best = (gain, j, z)
        if best is None or best[0] <= 1e-12 * base / len(idx):
            break
        _, j, z = best
        if x0[j] < z:
            idx = [i for i in idx if X[i][j] < z]
        else:
            idx = [i for i in idx if X[i][j] >= z]
    return sum(y[i] for i in idx) / len(idx)


def ks_brute(samples):
    """sup_x |F_n(x) - Φ(x)| checked on both sides of every sample point."""
    xs = sorted(samples)
    R = len(xs)
    best = 0.0
    for x in xs:
        below = sum(1 for v in xs if v < x) / R
        upto = sum(1 for v in xs if v <= x) / R
        F = norm.cdf(x)
        best = max(best, abs(upto - F), abs(below - F))
    return best


def hdecomp_brute(fn, support, probs, s):
    """V_j by inclusion-exclusion over conditional means, pure Python.

    h^(c)(z_1..z_c) = Σ_{S ⊆ {1..c}} (-1)^{c-|S|} h_{|S|}(z_S), where h_r
    integrates the remaining s - r arguments against ``probs``.
    """
    m = len(support)
    cache = {}

    def h_c(ids):
        key = tuple(ids)
        if key not in cache:
            r = s - len(ids)
            tot = 0.0
            for rest in itertools.product(range(m), repeat=r):
                w = 1.0
                for t in rest:
                    w *= probs[t]
                tot += w * fn([support[t] for t in list(ids) + list(rest)])
            cache[key] = tot
        return cache[key]

    V = []
    for c in range(1, s + 1):
        acc = 0.0
        for ids in itertools.product(range(m), repeat=c):
            w = 1.0
            for t in ids:
                w *= probs[t]
            comp = 0.0
            for r in range(c + 1):
                for S in itertools.combinations(range(c), r):
                    comp += (-1) ** (c - r) * h_c([ids[i] for i in S])
            acc += w * comp * comp
        V.append(acc)
    theta = h_c([])
    return theta, V


def u_variance_brute(fn, support, probs, n, s):
    m = len(support)
    combos = list(itertools.combinations(range(n), s))
    mean = 0.0
    second = 0.0
    for data in itertools.product(range(m), repeat=n):
        w = 1.0
        for t in data:
            w *= probs[t]
        u = sum(fn([support[data[i]] for i in c]) for c in combos) / len(combos)
        mean += w * u
        second += w * u * u
    return second - mean * mean


def one_nn_zetas_quad(s, sigma2):
    """ζ_s and ζ_1 of the 1-NN prediction at 0 for y = 1 - x + ε by quadrature."""
    dens = lambda x: s * (1 - x) ** (s - 1)
    m1 = integrate.quad(lambda x: (1 - x) * dens(x), 0, 1, epsabs=1e-14)[0]
    m2 = integrate.quad(lambda x: (1 - x) ** 2 * dens(x), 0, 1, epsabs=1e-14)[0]
    zeta_s = sigma2 + m2 - m1 ** 2
    # E[φ | X_1 = x, ε_1 = e] = P(other min <= x) E[f(min) | min <= x] + (1 - x + e)(1 - x)^{s-1}
    def g0(x):
        inner = integrate.quad(lambda t: (1 - t) * (s - 1) * (1 - t) ** (s - 2), 0, x,
                               epsabs=1e-14)[0]
        return inner + (1 - x) * (1 - x) ** (s - 1)
    e1 = integrate.quad(g0, 0, 1, epsabs=1e-14, limit=200)[0]
    e2 = integrate.quad(lambda x: g0(x) ** 2, 0, 1, epsabs=1e-14, limit=200)[0]
    noise = sigma2 * integrate.quad(lambda x: (1 - x) ** (2 * s - 2), 0, 1,
                                    epsabs=1e-14)[0]
    return zeta_s, e2 - e1 ** 2 + noise
