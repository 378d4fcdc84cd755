"""Normal-approximation confidence intervals and Berry-Esseen bound evaluators.

Bounds come in four forms:

``complete``
    6.1 E|g|³ / (√n ζ₁^{3/2}) + (1 + √2) [ (s/n)(ρ - 1) ]^{1/2}
``incomplete``
    the complete bound plus (1 + √(1/s)) [ (n/N)(1 - p) ρ ]^{1/2}
``convolution``
    C ( E|g|³/(√n (E g²)^{3/2}) + E|h|³/(√N (E h²)^{3/2})
    + [ (s/n)(ρ - 1) ]^{1/2} + (s/n)^{1/3} )
``subgaussian``
    the convolution form with (s/n)^η, 0 < η < 1/2, as the last term

where ρ = ζ_s / (s ζ₁) and h moments are central. The constant C of the
last two forms is not known; outputs are stated up to C (reports use C = 1).
A sharper alternative for the complete case replaces the moment term by
4 c₀ / √n for any c₀ bounding the linear part's distance to normal.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.special import ndtr, ndtri

from .core import HUGE, n_subsamples
from .exceptions import InvalidArgs
from .variance import _mc_map, _setup, _shared_groups, kernel_draws

FORMS = ("complete", "incomplete", "convolution", "subgaussian")


def normal_quantile(q: float) -> float:
    """Standard normal quantile Φ^{-1}(q)."""
    if not 0.0 < q < 1.0:
        raise InvalidArgs("quantile level must lie in (0, 1)")
    return float(ndtri(q))


def normal_cdf(x):
    """Standard normal distribution function Φ."""
    return ndtr(x)


@dataclass(frozen=True)
class ConfidenceInterval:
    center: float
    half_width: float
    level: float
    variance_used: float

    @property
    def lower(self) -> float:
        return self.center - self.half_width

    @property
    def upper(self) -> float:
        return self.center + self.half_width

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        return {**asdict(self), "lower": self.lower, "upper": self.upper}


def ci_variance(zeta1_omega: float, zeta_s: float, n: int, s: int,
                N: float | None) -> float:
    """s² ζ₁ / n + ζ_s / N; the second term is dropped when N is None or inf."""
    if zeta1_omega < 0 or zeta_s < 0:
        raise InvalidArgs("variance components must be nonnegative")
    if n < 1 or s < 1:
        raise InvalidArgs("need n >= 1 and s >= 1")
    v = s * s * zeta1_omega / n
    if N is not None and math.isfinite(N):
        if N <= 0:
            raise InvalidArgs("N must be positive")
        v += zeta_s / N
    return v


def build_ci(theta_hat: float, zeta1_omega: float, zeta_s: float, n: int, s: int,
             N: float | None, level: float = 0.95) -> ConfidenceInterval:
    """Asymptotic-normal interval θ̂ ± z √(s² ζ₁ / n + ζ_s / N).

    Pass ``N=None`` for a complete U-statistic.
    """
    if not 0.0 < level < 1.0:
        raise InvalidArgs("level must lie in (0, 1)")
    v = ci_variance(zeta1_omega, zeta_s, n, s, N)
    if not v > 0:
        raise InvalidArgs("interval variance must be positive")
    z = normal_quantile(0.5 + 0.5 * level)
    return ConfidenceInterval(float(theta_hat), z * math.sqrt(v), level, v)


@dataclass
class BEInputs:
    """Moments feeding the Berry-Esseen bounds.

    ``Eg2``/``Eg3`` are moments of the centered projection g; ``Eh2``/``Eh3``
    central absolute moments of the kernel. ``p`` defaults to N / C(n, s).
    """

    n: int
    s: int
    zeta1: float
    zeta_s: float
    N: float | None = None
    Eg2: float | None = None
    Eg3: float | None = None
    Eh2: float | None = None
    Eh3: float | None = None
    kur1: float | None = None
    kur2: float | None = None
    p: float | None = None

    def __post_init__(self):
        if self.n < 1 or self.s < 1 or self.s > self.n:
            raise InvalidArgs("need 1 <= s <= n")
        for f in ("zeta1", "zeta_s", "Eg2", "Eg3", "Eh2", "Eh3"):
            v = getattr(self, f)
            if v is not None and not v >= 0:
                raise InvalidArgs(f"{f} must be nonnegative")
        if self.kur1 is not None and self.kur1 < 1:
            raise InvalidArgs("kur1 must be >= 1")
        if self.p is None and self.N is not None:
            C = n_subsamples(self.n, self.s)
            self.p = 0.0 if C == HUGE else min(1.0, self.N / C)
        if self.p is not None and not 0.0 <= self.p <= 1.0:
            raise InvalidArgs("p must lie in [0, 1]")

    @property
    def ratio(self) -> float:
        return self.zeta_s / (self.s * self.zeta1)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BEInputs":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidArgs(f"unknown BEInputs fields {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidArgs(str(exc)) from None

    @classmethod
    def from_json_file(cls, path) -> "BEInputs":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _need(inputs: BEInputs, *names):
    for name in names:
        if getattr(inputs, name) is None:
            raise InvalidArgs(f"bound needs {name}")


def _bracket(value: float, label: str) -> float:
    if value < 0:
        warnings.warn(f"{label} bracket is negative ({value:g}); clamped to 0",
                      RuntimeWarning, stacklevel=3)
        return 0.0
    return value


def bound_breakdown(form: str, inputs: BEInputs, C: float = 1.0,
                    eta: float | None = None) -> dict:
    """Per-term values of a Berry-Esseen bound and their sum under ``total``."""
    form = str(form).lower()
    if form not in FORMS:
        raise InvalidArgs(f"unknown bound form {form!r}; use one of {FORMS}")
    n, s = inputs.n, inputs.s
    z1 = inputs.zeta1
    if not z1 > 0:
        raise InvalidArgs("zeta1 must be positive")
    _need(inputs, "Eg3")
    ratio = inputs.ratio
    nonlin = math.sqrt(_bracket(s / n * (ratio - 1.0), "nonlinearity"))
    terms: dict[str, float] = {}
    if form in ("complete", "incomplete"):
        _need(inputs, "Eg3")
        terms["linear"] = 6.1 * inputs.Eg3 / (math.sqrt(n) * z1 ** 1.5)
        terms["nonlinearity"] = (1.0 + math.sqrt(2.0)) * nonlin
        if form == "incomplete":
            _need(inputs, "N", "p")
            rem = _bracket(n / inputs.N * (1.0 - inputs.p) * ratio, "sampling")
            terms["sampling"] = (1.0 + math.sqrt(1.0 / s)) * math.sqrt(rem)
        scale = 1.0
    else:
        if not C > 0:
            raise InvalidArgs("C must be positive")
        _need(inputs, "Eg3", "Eh3", "N")
        if form == "convolution":
            eta = 1.0 / 3.0
        elif eta is None or not 0.0 < eta < 0.5:
            raise InvalidArgs("eta must lie in (0, 1/2)")
        Eg2 = inputs.Eg2 if inputs.Eg2 is not None else z1
        Eh2 = inputs.Eh2 if inputs.Eh2 is not None else inputs.zeta_s
        if not (Eg2 > 0 and Eh2 > 0):
            raise InvalidArgs("second moments must be positive")
        terms["linear"] = inputs.Eg3 / (math.sqrt(n) * Eg2 ** 1.5)
        terms["sampling"] = inputs.Eh3 / (math.sqrt(inputs.N) * Eh2 ** 1.5)
        terms["nonlinearity"] = nonlin
        terms["order"] = (s / n) ** eta
        scale = C
    out = {k: scale * v for k, v in terms.items()}
    out["total"] = math.fsum(out.values())
    out["form"] = form
    if form in ("convolution", "subgaussian"):
        out["C"] = C
        out["eta"] = eta
        out["note"] = "up to the universal constant C"
    return out


def be_bound_complete(inputs: BEInputs) -> float:
    """Bound for the complete (generalized) U-statistic, standardized by s² ζ₁ / n."""
    return bound_breakdown("complete", inputs)["total"]


def be_bound_incomplete_linear(inputs: BEInputs) -> float:
    """Complete bound plus the subsampling term, standardized by s² ζ₁ / n."""
    return bound_breakdown("incomplete", inputs)["total"]


def be_bound_convolution(inputs: BEInputs, C: float) -> float:
    """Bound under the two-component standardization s² ζ₁ / n + ζ_s / N."""
    return bound_breakdown("convolution", inputs, C)["total"]


def be_bound_subgaussian(inputs: BEInputs, C: float, eta: float) -> float:
    """Convolution form with (s/n)^η as the last term, for sub-Gaussian kernels."""
    return bound_breakdown("subgaussian", inputs, C, eta)["total"]


# ---------------------------------------------------------------------------
# Moment estimators
# ---------------------------------------------------------------------------


@dataclass
class GMoments:
    Eg2: float
    Eg3: float
    se_Eg2: float
    se_Eg3: float
    M: int
    m_inner: int
    center: float
    note: str = ("Eg3 is computed from inner averages and is biased upward; "
                 "the bias shrinks as m_inner grows")

    def __iter__(self):
        yield self.Eg2
        yield self.Eg3


def estimate_g_moments(kernel, generator, s: int, M: int = 2000, seed: int = 0,
                       m_inner: int = 64, center: float | None = None,
                       threads: int = 1) -> GMoments:
    """E g² and E|g|³ for g(z) = E[h(z, Z_2, ..., Z_s)] - θ.

    Each of ``M`` outer draws of Z_1 is completed ``m_inner`` times. E g²
    uses the off-diagonal products of the centered inner values, which is
    unbiased when ``center`` is the true θ; E|g|³ uses the cube of the inner
    average. θ is the grand mean unless ``center`` is given.
    """
    kernel, gen = _setup(kernel, generator, s)
    if M < 2 or m_inner < 2:
        raise InvalidArgs("need M >= 2 and m_inner >= 2")

    def fn(rng, G):
        return _shared_groups(kernel, gen, s, 1, m_inner, rng, G)

    H = np.concatenate(_mc_map(fn, M, m_inner * s * gen.p, seed, threads, stream=300))
    H = H[~np.isnan(H).any(axis=1)]
    theta = float(H.mean()) if center is None else float(center)
    Cc = H - theta
    S = Cc.sum(axis=1)
    g2 = (S * S - (Cc * Cc).sum(axis=1)) / (m_inner * (m_inner - 1))
    g3 = np.abs(Cc.mean(axis=1)) ** 3
    Mu = H.shape[0]
    return GMoments(float(g2.mean()), float(g3.mean()),
                    float(g2.std(ddof=1) / math.sqrt(Mu)),
                    float(g3.std(ddof=1) / math.sqrt(Mu)), Mu, m_inner, theta)


@dataclass
class HMoments:
    Eh2: float
    Eh3: float
    kur1: float
    kur2: float
    se_Eh2: float
    se_Eh3: float
    se_kur1: float
    se_kur2: float
    M: int
    center: float

    def __iter__(self):
        yield from (self.Eh2, self.Eh3, self.kur1, self.kur2)


def moments_from_values(v, center: float | None = None) -> HMoments:
    """Central absolute moments and kurtosis-type ratios of a sample."""
    v = np.asarray(v, dtype=float)
    if v.size < 4:
        raise InvalidArgs("need at least 4 values")
    theta = float(v.mean()) if center is None else float(center)
    c = np.abs(v - theta)
    c2, c3 = c ** 2, c ** 3
    c4, c6 = c2 * c2, c3 * c3
    a2, a3, a4, a6 = c2.mean(), c3.mean(), c4.mean(), c6.mean()
    rt = math.sqrt(v.size)
    if a2 > 0:
        kur1 = a4 / a2 ** 2
        kur2 = a6 / a3 ** 2
        psi1 = (c4 - a4) / a2 ** 2 - 2 * a4 * (c2 - a2) / a2 ** 3
        psi2 = (c6 - a6) / a3 ** 2 - 2 * a6 * (c3 - a3) / a3 ** 3
        se1, se2 = psi1.std(ddof=1) / rt, psi2.std(ddof=1) / rt
    else:
        warnings.warn("kernel is degenerate; kurtosis ratios are undefined",
                      RuntimeWarning, stacklevel=2)
        kur1 = kur2 = se1 = se2 = float("nan")
    return HMoments(float(a2), float(a3), float(kur1), float(kur2),
                    float(c2.std(ddof=1) / rt), float(c3.std(ddof=1) / rt),
                    float(se1), float(se2), int(v.size), theta)


def estimate_h_moments(kernel, generator, s: int, M: int = 20000, seed: int = 0,
                       center: float | None = None, threads: int = 1) -> HMoments:
    """E|h-θ|², E|h-θ|³ and Kur₁ = E|h-θ|⁴/(E|h-θ|²)², Kur₂ = E|h-θ|⁶/(E|h-θ|³)²."""
    if M < 4:
        raise InvalidArgs("M must be >= 4")
    v = kernel_draws(kernel, generator, s, M, seed, threads, stream=400)
    return moments_from_values(v[~np.isnan(v)], center)
