"""Variance components of (generalized) U-statistic kernels.

Monte Carlo estimators draw fresh data from a known generator:

* ``zeta_s``: the kernel's variance Var(h).
* ``zeta_c``: Var(E[h | Z_1..Z_c]), i.e. the covariance of two kernel
  values sharing ``c`` data points with independent completions and ω.
* ``zeta1_omega``: ``zeta_c`` at c = 1.
* ``zeta_s_omega``: ``zeta_c`` at c = s, sharing all data but not ω.

Exact routines enumerate finite-support distributions to obtain the
orthogonal H-decomposition of a kernel and the variance identities that
follow from it.
"""

from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import gammaln

from .core import DEFAULT_ENUMERATION_CAP, child_rng
from .exceptions import CapExceeded, DegenerateProjection, InvalidArgs
from .generators import Discrete, Generator, parse_generator
from .learners import Kernel, make_kernel

# Target number of scalars generated per Monte Carlo chunk.
_MC_ELEMS = 1_000_000


# ---------------------------------------------------------------------------
# Monte Carlo plumbing
# ---------------------------------------------------------------------------


def _draw_omega(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.integers(0, 2**64, size=shape, dtype=np.uint64, endpoint=False)


def _chunk_plan(total: int, per_unit: int) -> list[tuple[int, int]]:
    step = max(1, _MC_ELEMS // max(1, per_unit))
    return [(a, min(total, a + step)) for a in range(0, total, step)]


def _mc_map(fn, total: int, per_unit: int, seed: int, threads: int = 1,
            stream: int = 0) -> list:
    """Run ``fn(rng, count)`` over fixed-size chunks.

    Chunk ``i`` uses a generator keyed by ``(stream, i)``, and the chunk
    size depends only on the problem, so results do not depend on
    ``threads``.
    """
    plan = _chunk_plan(total, per_unit)

    def run(item):
        i, (a, b) = item
        return fn(child_rng(seed, stream, i), b - a)

    items = list(enumerate(plan))
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, items))
    return [run(it) for it in items]


def _jackknife_se(loo: np.ndarray) -> float:
    G = loo.size
    return float(np.sqrt((G - 1) / G * np.sum((loo - loo.mean()) ** 2)))


def _loo_var(a: np.ndarray) -> np.ndarray:
    """Leave-one-out unbiased variances of ``a``."""
    G = a.size
    c = a - a.mean()
    S1, S2 = c.sum(), (c * c).sum()
    return ((S2 - c * c) - (S1 - c) ** 2 / (G - 1)) / (G - 2)


def _variance_with_se(v: np.ndarray) -> tuple[float, float]:
    if v.size < 3:
        return float(np.var(v, ddof=1)) if v.size > 1 else float("nan"), float("nan")
    return float(np.var(v, ddof=1)), _jackknife_se(_loo_var(v))


@dataclass
class Estimate:
    """Monte Carlo estimate with its standard error and bookkeeping."""

    value: float
    se: float
    n_used: int
    failures: int = 0
    extra: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.value
        yield self.se

    def to_dict(self) -> dict:
        return {"value": self.value, "se": self.se, "n_used": self.n_used,
                "failures": self.failures, **self.extra}


def _setup(kernel, generator, s):
    kernel = make_kernel(kernel)
    gen = parse_generator(generator)
    if s < 1:
        raise InvalidArgs("s must be >= 1")
    kernel.check(s, gen.p)
    return kernel, gen


def kernel_draws(kernel, generator, s: int, M: int, seed: int = 0,
                 threads: int = 1, stream: int = 0) -> np.ndarray:
    """``M`` independent kernel values on fresh data and fresh ω (NaN on failure)."""
    kernel, gen = _setup(kernel, generator, s)

    def fn(rng, B):
        X, y = gen.draw(rng, (B, s))
        om = _draw_omega(rng, B)
        return kernel.batch(X, y, om)

    return np.concatenate(_mc_map(fn, M, s * gen.p, seed, threads, stream))


# ---------------------------------------------------------------------------
# Monte Carlo estimators
# ---------------------------------------------------------------------------


def estimate_zeta_s(kernel, generator, s: int, M: int = 20000, seed: int = 0,
                    threads: int = 1) -> Estimate:
    """Sample variance of ``M`` independent kernel draws; jackknife SE."""
    if M < 3:
        raise InvalidArgs("M must be >= 3")
    v = kernel_draws(kernel, generator, s, M, seed, threads, stream=1)
    ok = ~np.isnan(v)
    val, se = _variance_with_se(v[ok])
    return Estimate(val, se, int(ok.sum()), int((~ok).sum()),
                    {"mean": float(v[ok].mean())})


def _shared_groups(kernel, gen, s, c, m, rng, G):
    """Kernel values of shape (G, m): c shared rows, m independent completions."""
    Xc, yc = gen.draw(rng, (G, 1, c))
    Xr, yr = gen.draw(rng, (G, m, s - c))
    om = _draw_omega(rng, (G, m))
    X = np.concatenate([np.broadcast_to(Xc, (G, m, c, gen.p)), Xr], axis=2)
    y = np.concatenate([np.broadcast_to(yc, (G, m, c)), yr], axis=2)
    return kernel.batch(X.reshape(G * m, s, gen.p), y.reshape(G * m, s),
                        om.reshape(-1)).reshape(G, m)


def _anova_between(vals: np.ndarray) -> tuple[float, float]:
    """Unbiased Var(E[h | group]) from a (G, m) table, with jackknife SE."""
    G, m = vals.shape
    means = vals.mean(axis=1)
    within = vals.var(axis=1, ddof=1)
    est = float(np.var(means, ddof=1) - within.mean() / m)
    if G < 3:
        return est, float("nan")
    loo_w = (within.sum() - within) / (G - 1)
    loo = _loo_var(means) - loo_w / m
    return est, _jackknife_se(loo)


def estimate_zeta_c(kernel, generator, s: int, c: int, M_outer: int = 2000,
                    M_inner: int = 2, seed: int = 0, threads: int = 1) -> Estimate:
    """Covariance of kernel values sharing ``c`` data points.

    Each outer draw fixes Z_1..Z_c and evaluates the kernel on ``M_inner``
    independent completions (with independent ω). The between-group
    variance minus the within-group variance over ``M_inner`` is unbiased
    for ζ_c; the SE is a jackknife over outer draws.
    """
    kernel, gen = _setup(kernel, generator, s)
    if not 1 <= c <= s:
        raise InvalidArgs(f"need 1 <= c <= s, got c={c}")
    if M_outer < 3 or M_inner < 2:
        raise InvalidArgs("need M_outer >= 3 and M_inner >= 2")

    def fn(rng, G):
        return _shared_groups(kernel, gen, s, c, M_inner, rng, G)

    vals = np.concatenate(_mc_map(fn, M_outer, M_inner * s * gen.p, seed, threads,
                                  stream=100 + c))
    ok = ~np.isnan(vals).any(axis=1)
    est, se = _anova_between(vals[ok])
    return Estimate(est, se, int(ok.sum()), int((~ok).sum()),
                    {"method": "anova", "c": c, "M_inner": M_inner})


def _crossed_blocks(kernel, gen, s, A, m, rng, B):
    """Per-block unbiased estimates of ζ_1 from A first points x m completions.

    Within a block every first point Z_1^a is combined with every shared
    completion R_j (data and ω), giving a table H[a, j]. For a != b and
    j != l, E[(H_aj - H_bj)(H_al - H_bl)] = 2 ζ_1; the block estimate is the
    average of these products, computed from row and column sums.
    """
    Zx, Zy = gen.draw(rng, (B, A))
    Rx, Ry = gen.draw(rng, (B, m, s - 1))
    om = _draw_omega(rng, (B, m))
    p = gen.p
    X = np.concatenate([np.broadcast_to(Zx[:, :, None, None, :], (B, A, m, 1, p)),
                        np.broadcast_to(Rx[:, None], (B, A, m, s - 1, p))], axis=3)
    y = np.concatenate([np.broadcast_to(Zy[:, :, None, None], (B, A, m, 1)),
                        np.broadcast_to(Ry[:, None], (B, A, m, s - 1))], axis=3)
    oms = np.broadcast_to(om[:, None], (B, A, m)).reshape(-1)
    H = kernel.batch(X.reshape(-1, s, p), y.reshape(-1, s), oms).reshape(B, A, m)
    r = H.sum(axis=2)
    c = H.sum(axis=1)
    T = r.sum(axis=1)
    P = (r * r).sum(axis=1) - (H * H).sum(axis=(1, 2))
    total = 2 * A * P - 2 * (T * T - (c * c).sum(axis=1))
    return total / (2 * A * (A - 1) * m * (m - 1))


def estimate_zeta1_omega(kernel, generator, s: int, M_outer: int = 2000,
                         M_inner: int = 4, seed: int = 0, threads: int = 1,
                         method: str = "difference", n_first: int = 8) -> Estimate:
    """First-order component ζ_{1,ω} = Var(E[h | Z_1]).

    ``method="difference"`` runs ``M_outer`` independent blocks. A block
    draws ``n_first`` candidate first points and ``M_inner`` completions
    (data and ω) shared by all of them; differences between first points
    on a common completion isolate the first point's effect, and products
    of such differences over two distinct completions are unbiased for
    2 ζ_1. Shared completions cancel most of the kernel's own noise, which
    matters when ζ_1 is of order 1/s² or smaller.

    ``method="pair"`` is the direct design: one shared Z_1 and ``M_inner``
    independent completions, see :func:`estimate_zeta_c`.
    """
    if method == "pair":
        return estimate_zeta_c(kernel, generator, s, 1, M_outer, M_inner, seed, threads)
    if method != "difference":
        raise InvalidArgs(f"unknown method {method!r}")
    kernel, gen = _setup(kernel, generator, s)
    if M_outer < 2 or M_inner < 2 or n_first < 2:
        raise InvalidArgs("need M_outer >= 2, M_inner >= 2 and n_first >= 2")

    def fn(rng, B):
        return _crossed_blocks(kernel, gen, s, n_first, M_inner, rng, B)

    q = np.concatenate(_mc_map(fn, M_outer, n_first * M_inner * s * gen.p, seed,
                               threads, stream=2))
    ok = ~np.isnan(q)
    q = q[ok]
    val = float(q.mean())
    se = float(q.std(ddof=1) / math.sqrt(q.size)) if q.size > 1 else float("nan")
    return Estimate(val, se, int(q.size), int((~ok).sum()),
                    {"method": "difference", "M_inner": M_inner, "n_first": n_first})


def estimate_zeta_s_omega(kernel, generator, s: int, M: int = 2000,
                          M_omega: int = 2, seed: int = 0, threads: int = 1,
                          force: bool = False) -> Estimate:
    """Covariance of two kernel values on the same data with independent ω."""
    k = make_kernel(kernel)
    if not (k.uses_omega or force):
        raise InvalidArgs("kernel does not use auxiliary randomness")
    return estimate_zeta_c(k, generator, s, s, M, M_omega, seed, threads)


@dataclass
class VarianceComponents:
    """Estimates of ζ_{1,ω}, ζ_{s,ω} and ζ_s with standard errors."""

    s: int
    zeta1_omega: float
    zeta_s_omega: float
    zeta_s: float
    se_zeta1_omega: float
    se_zeta_s_omega: float
    se_zeta_s: float
    mc_sizes: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return variance_ratio(self, self.s, check=False)

    @property
    def ratio_se(self) -> float:
        return variance_ratio_se(self, self.s)

    def to_dict(self) -> dict:
        d = {
            "s": self.s,
            "zeta1_omega": self.zeta1_omega, "se_zeta1_omega": self.se_zeta1_omega,
            "zeta_s_omega": self.zeta_s_omega, "se_zeta_s_omega": self.se_zeta_s_omega,
            "zeta_s": self.zeta_s, "se_zeta_s": self.se_zeta_s,
            "mc_sizes": self.mc_sizes, "failures": self.failures,
        }
        if self.zeta1_omega > 0:
            d["variance_ratio"] = self.ratio
            d["variance_ratio_se"] = self.ratio_se
        return d


def estimate_components(kernel, generator, s: int, M_outer: int = 2000,
                        M_inner: int = 4, M_s: int | None = None, seed: int = 0,
                        threads: int = 1, method: str = "difference",
                        n_first: int = 8) -> VarianceComponents:
    """All three components; ζ_{s,ω} equals ζ_s for kernels without ω."""
    kernel, gen = _setup(kernel, generator, s)
    M_s = M_s or max(M_outer, 3)
    z1 = estimate_zeta1_omega(kernel, gen, s, M_outer, M_inner, seed, threads, method,
                              n_first)
    zs = estimate_zeta_s(kernel, gen, s, M_s, seed, threads)
    if kernel.uses_omega:
        zso = estimate_zeta_s_omega(kernel, gen, s, M_outer, 2, seed, threads)
    else:
        zso = zs
    return VarianceComponents(
        s, z1.value, zso.value, zs.value, z1.se, zso.se, zs.se,
        {"M_outer": M_outer, "M_inner": M_inner, "M_s": M_s, "method": method,
         "n_first": n_first},
        {"zeta1_omega": z1.failures, "zeta_s": zs.failures,
         "zeta_s_omega": zso.failures})


def variance_ratio(components: VarianceComponents, s: int | None = None,
                   check: bool = True) -> float:
    """ζ_s / (s ζ_{1,ω}).

    Raises ``DegenerateProjection`` when ζ_{1,ω} is not above its own SE.
    """
    s = components.s if s is None else s
    z1 = components.zeta1_omega
    if check and not z1 > components.se_zeta1_omega:
        raise DegenerateProjection(
            f"zeta1_omega={z1:g} does not exceed its SE {components.se_zeta1_omega:g}")
    if z1 <= 0:
        raise DegenerateProjection("zeta1_omega must be positive")
    return components.zeta_s / (s * z1)


def variance_ratio_se(components: VarianceComponents, s: int | None = None) -> float:
    """Delta-method SE of the ratio, treating the two estimates as independent."""
    r = variance_ratio(components, s, check=False)
    rel = (components.se_zeta_s / components.zeta_s) ** 2 if components.zeta_s else 0.0
    rel += (components.se_zeta1_omega / components.zeta1_omega) ** 2
    return abs(r) * math.sqrt(rel)


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RatioLimit:
    """Ratio known only through its large-s limit."""

    limit: str
    scalar: float
    note: str = ""


def one_nn_zetas(s: int, sigma2: float = 1.0) -> tuple[float, float]:
    """Exact (ζ_s, ζ_1) of the 1-NN prediction at x = 0 for y = 1 - x + ε, x ~ U[0, 1]."""
    if s < 1:
        raise InvalidArgs("s must be >= 1")
    zeta_s = sigma2 + s / ((s + 2) * (s + 1) ** 2)
    zeta_1 = 1.0 / ((2 * s + 1) * (s + 1) ** 2) + sigma2 / (2 * s - 1)
    return zeta_s, zeta_1


def closed_form_ratio(example: str, s: int | None = None, sigma2: float = 1.0,
                      mu4: float | None = None, k: int | None = None):
    """Exact variance ratio ζ_s / (s ζ_1) for kernels with known components.

    Parameters
    ----------
    example : {"mean", "variance", "ols", "one_nn", "random_k"}
    s : int
        Subsample size (not needed for ``mean`` and ``ols``).
    sigma2, mu4 : float
        Variance and fourth central moment of the response (``variance``),
        or noise variance (``one_nn``).
    k : int
        Selection size for ``random_k``.

    Returns
    -------
    float or RatioLimit
        ``ols`` returns the identity-matrix limit descriptor.
    """
    ex = str(example).lower().replace("-", "_")
    if ex == "mean":
        return 1.0
    if ex == "variance":
        if s is None or s < 2:
            raise InvalidArgs("variance example needs s >= 2")
        if mu4 is None or not mu4 > sigma2 ** 2:
            raise InvalidArgs("need mu4 > sigma2**2")
        return 1.0 + 2.0 / (s - 1) * sigma2 ** 2 / (mu4 - sigma2 ** 2)
    if ex == "ols":
        return RatioLimit("identity", 1.0,
                          "(s zeta_1)^-1 zeta_s tends to the identity matrix")
    if ex in ("one_nn", "onenn", "1nn"):
        if s is None or s < 1:
            raise InvalidArgs("one_nn example needs s >= 1")
        zs, z1 = one_nn_zetas(s, sigma2)
        return zs / (s * z1)
    if ex in ("random_k", "randomk"):
        if s is None or k is None or not 1 <= k <= s:
            raise InvalidArgs("random_k example needs 1 <= k <= s")
        return s / k
    raise InvalidArgs(f"unknown example {example!r}")


def _log_comb(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def knn_v(k: int, s: int) -> float:
    """Σ_{i,j<k} C(s-1,i) C(s-1,j) / C(2s-2,i+j), in log space."""
    i = np.arange(k)
    a = _log_comb(s - 1, i)
    logt = a[:, None] + a[None, :] - _log_comb(2 * s - 2, i[:, None] + i[None, :])
    return float(np.exp(logt).sum())


def c_of_k(k: int, s_approx: int = 2000, converge: bool = True,
           tol: float = 1e-3, max_s: int = 2**22) -> float:
    """Limiting kNN variance-ratio bound c(k) = lim 2k / V(k, s).

    Evaluated at ``s_approx``; with ``converge`` the size is doubled until
    successive values differ by less than ``tol`` and the last value is
    returned.
    """
    if k < 1:
        raise InvalidArgs("k must be >= 1")
    if s_approx < 2 * k:
        raise InvalidArgs("s_approx must be >= 2k")
    val = 2 * k / knn_v(k, s_approx)
    if not converge:
        return val
    s = s_approx
    while s < max_s:
        s *= 2
        nxt = 2 * k / knn_v(k, s)
        if abs(nxt - val) < tol:
            return nxt
        val = nxt
    warnings.warn(f"c({k}) did not converge to {tol} by s={s}")
    return val


def linear_smoother_bound(sigma2: float, f_sup: float, s: int) -> float:
    """Worst-case ratio s (σ² + f_sup²/4) / σ² for a linear smoother."""
    if not sigma2 > 0:
        raise InvalidArgs("sigma2 must be positive")
    return s * (sigma2 + 0.25 * f_sup ** 2) / sigma2


# ---------------------------------------------------------------------------
# Exact H-decomposition
# ---------------------------------------------------------------------------


@dataclass
class HDecomposition:
    """Exact orthogonal decomposition of a kernel under a discrete law.

    Attributes
    ----------
    V : ndarray of shape (s,)
        V[j-1] = Var(h^(j)).
    theta : float
        E[h].
    zeta : ndarray of shape (s,)
        zeta[c-1] = Var(h_c) computed directly from the conditional means.
    var_h : float
        Var(h) computed directly from the kernel table.
    h_tables : list of ndarray
        h_tables[c] is h_c on support^c (h_tables[0] is θ).
    components : list of ndarray
        components[j] is h^(j) on support^j (components[0] is unused).
    probs : ndarray
        Support probabilities.
    """

    V: np.ndarray
    theta: float
    zeta: np.ndarray
    var_h: float
    s: int
    h_tables: list = field(repr=False, default_factory=list)
    components: list = field(repr=False, default_factory=list)
    probs: np.ndarray | None = field(repr=False, default=None)
    omega_se: float = 0.0

    def var_h_from_components(self) -> float:
        return math.fsum(math.comb(self.s, j) * float(self.V[j - 1])
                         for j in range(1, self.s + 1))


def _product_weights(probs: np.ndarray, r: int) -> np.ndarray:
    w = np.ones(())
    for _ in range(r):
        w = np.multiply.outer(w, probs)
    return w


def kernel_table(kernel, dist: Discrete, s: int, cap: int = DEFAULT_ENUMERATION_CAP,
                 M_omega: int = 200, seed: int = 0) -> tuple[np.ndarray, float]:
    """Kernel values on every support^s tuple, shape (m,)*s.

    Kernels using ω are averaged over ``M_omega`` seeds per tuple; the
    largest standard error of those averages is returned alongside.
    """
    kernel = make_kernel(kernel)
    m = dist.m
    total = m ** s
    if total > cap:
        raise CapExceeded(f"support^s = {total} exceeds cap {cap}")
    kernel.check(s, dist.p)
    tuples = np.indices((m,) * s).reshape(s, -1).T
    X = dist.X_support[tuples]
    y = dist.y_support[tuples]
    if not kernel.uses_omega:
        vals = kernel.batch(X, y, np.zeros(total, dtype=np.uint64))
        return vals.reshape((m,) * s), 0.0
    rng = np.random.default_rng(seed)
    om = _draw_omega(rng, (M_omega, total))
    runs = np.stack([kernel.batch(X, y, om[r]) for r in range(M_omega)])
    se = float((runs.std(axis=0, ddof=1) / math.sqrt(M_omega)).max())
    return runs.mean(axis=0).reshape((m,) * s), se


def h_decomposition_exact(kernel, dist: Discrete, s: int,
                          cap: int = DEFAULT_ENUMERATION_CAP, M_omega: int = 200,
                          seed: int = 0) -> HDecomposition:
    """Exact θ, conditional means h_c and components h^(j) by enumeration.

    h^(c)(z_1..z_c) = h_c(z_1..z_c) - Σ_{j<c} Σ_{|S|=j} h^(j)(z_S) - θ.
    """
    if not isinstance(dist, Discrete):
        dist = parse_generator(dist)
        if not isinstance(dist, Discrete):
            raise InvalidArgs("exact decomposition needs a finite-support law")
    T, se = kernel_table(kernel, dist, s, cap, M_omega, seed)
    probs = dist.p_support
    # h_c from h_{c+1} by integrating out the last argument.
    tables = [None] * (s + 1)
    tables[s] = T
    for c in range(s - 1, -1, -1):
        tables[c] = np.tensordot(tables[c + 1], probs, axes=([c], [0]))
    theta = float(tables[0])
    comps = [np.zeros(())] * (s + 1)
    for c in range(1, s + 1):
        acc = tables[c] - theta
        for j in range(1, c):
            for S in itertools.combinations(range(c), j):
                shape = [1] * c
                for ax in S:
                    shape[ax] = dist.m
                acc = acc - comps[j].reshape(shape)
        comps[c] = acc
    V = np.array([float((_product_weights(probs, j) * comps[j] ** 2).sum())
                  for j in range(1, s + 1)])
    zeta = np.array([float((_product_weights(probs, c) * (tables[c] - theta) ** 2).sum())
                     for c in range(1, s + 1)])
    var_h = float((_product_weights(probs, s) * (T - theta) ** 2).sum())
    return HDecomposition(V, theta, zeta, var_h, s, tables, comps, probs, se)


def u_variance_from_components(hd: HDecomposition, n: int, s: int | None = None) -> float:
    """Var(U_{n,s}) = Σ_j C(s,j)² / C(n,j) V_j."""
    s = hd.s if s is None else s
    if n < s:
        raise InvalidArgs("need n >= s")
    terms = []
    for j in range(1, s + 1):
        coef = Fraction(math.comb(s, j) ** 2, math.comb(n, j))
        terms.append(float(coef) * float(hd.V[j - 1]))
    return math.fsum(terms)


def enumerate_u_variance(kernel, dist: Discrete, n: int, s: int,
                         cap: int = 10**8, M_omega: int = 200, seed: int = 0
                         ) -> tuple[float, float]:
    """Brute-force (E[U], Var(U_{n,s})) over every support^n data tuple."""
    m = dist.m
    C = math.comb(n, s)
    if m ** n * C > cap:
        raise CapExceeded(f"{m}^{n} data tuples x {C} subsamples exceeds cap {cap}")
    T, _ = kernel_table(kernel, dist, s, M_omega=M_omega, seed=seed)
    flatT = T.reshape(-1)
    data = np.indices((m,) * n).reshape(n, -1).T
    combos = np.array(list(itertools.combinations(range(n), s)))
    place = m ** np.arange(s - 1, -1, -1)
    codes = (data[:, combos] * place).sum(axis=2)
    U = flatT[codes].mean(axis=1)
    w = np.prod(dist.p_support[data], axis=1)
    mean = float(np.dot(w, U))
    return mean, float(np.dot(w, (U - mean) ** 2))


def lemma_chain_holds(zeta: np.ndarray, rtol: float = 1e-10) -> bool:
    """Check ζ_c / c is nondecreasing in c."""
    scaled = np.asarray(zeta) / np.arange(1, len(zeta) + 1)
    slack = rtol * np.maximum(np.abs(scaled[1:]), np.abs(scaled[:-1]))
    return bool(np.all(scaled[:-1] <= scaled[1:] + slack))
