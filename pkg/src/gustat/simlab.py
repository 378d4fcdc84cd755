"""Simulation experiments and long-format report emission.

Every experiment is a pure function of its configuration: replicate ``r``
at grid point ``g`` draws from a generator keyed by ``(seed, g, r)``, and
rows are assembled in (grid point, statistic) order, so reports are
byte-identical across runs and thread counts.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import (DEFAULT_ENUMERATION_CAP, EnsembleConfig, child_seed,
                   n_subsamples)
from .ensemble import complete_u, generalized_incomplete_u
from .exceptions import InvalidArgs
from .generators import generate, parse_generator
from .inference import BEInputs, bound_breakdown, build_ci, ci_variance, normal_cdf
from .learners import KernelSpec, make_kernel
from .variance import (c_of_k, closed_form_ratio, estimate_components,
                       kernel_draws)

CSV_COLUMNS = ("experiment", "grid_key", "grid_value", "stat", "value", "se")
EXPERIMENTS = ("clt", "coverage", "ratio", "ck")

# Standard deviation of the limiting Kolmogorov distribution.
KOLMOGOROV_SD = 0.26044


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov distance
# ---------------------------------------------------------------------------


def ks_to_standard_normal(samples) -> float:
    """Sup-distance between the empirical distribution and Φ."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    R = x.size
    if R == 0:
        raise InvalidArgs("need at least one sample")
    F = normal_cdf(x)
    i = np.arange(1, R + 1)
    return float(max(np.max(i / R - F), np.max(F - (i - 1) / R)))


def ks_se(R: int) -> float:
    """Approximate standard error of the KS statistic from R draws."""
    return KOLMOGOROV_SD / math.sqrt(R)


# ---------------------------------------------------------------------------
# Configuration and reports
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Parameters of one experiment.

    ``grid`` maps ``n``, ``s``, ``N`` to lists; ``s_exponent`` (β) replaces
    ``s`` with the schedule s = ⌈n^β⌉. The ``ck`` experiment reads ``k_max``
    and ``s_approx`` instead. ``zeta`` optionally supplies pre-computed
    ``zeta1``/``zeta_s`` (with optional ``se_*``) and ``theta`` a pre-computed
    target; otherwise analytic values are used for the mean kernel and Monte
    Carlo oracles (sized by ``mc``) for everything else.
    """

    experiment: str
    kernel: dict = field(default_factory=lambda: {"kind": "mean"})
    generator: dict = field(default_factory=lambda: {"family": "LinearGaussian",
                                                     "beta": [0.0], "sigma": 1.0})
    grid: dict = field(default_factory=dict)
    s_exponent: float | None = None
    scheme: str = "bernoulli"
    R: int = 200
    level: float = 0.95
    seed: int = 0
    zeta: dict | None = None
    theta: float | None = None
    theta_se: float | None = None
    mc: dict = field(default_factory=dict)
    C: float = 1.0
    eta: float = 0.4
    k_max: int = 50
    s_approx: int = 2000
    out: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise InvalidArgs(f"unknown experiment {self.experiment!r}; use one of {EXPERIMENTS}")
        if self.experiment != "ck":
            if self.R < 2:
                raise InvalidArgs("R must be >= 2")
            if not self.grid or any(not list(v) for v in self.grid.values()):
                raise InvalidArgs("grid must be nonempty")
        unknown = set(self.grid) - {"n", "s", "N"}
        if unknown:
            raise InvalidArgs(f"unknown grid keys {sorted(unknown)}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidArgs(f"bad experiment config: {exc}") from None

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentReport:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, experiment, key, value, stat, v, se=None):
        self.rows.append((experiment, key, value, stat, v, se))

    def value(self, stat: str, grid_value: str | None = None):
        for r in self.rows:
            if r[3] == stat and (grid_value is None or r[2] == grid_value):
                return r[4]
        raise KeyError(stat)

    def select(self, stat: str) -> list:
        return [(r[2], r[4], r[5]) for r in self.rows if r[3] == stat]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def report_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in report.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def emit_report(report: ExperimentReport, path) -> None:
    """Write the CSV and a JSON metadata sidecar next to it."""
    path = Path(path)
    path.write_text(report_csv(report))
    path.with_suffix(".json").write_text(json.dumps(report.metadata, indent=2,
                                                    sort_keys=True, default=str) + "\n")


# ---------------------------------------------------------------------------
# Grids and oracles
# ---------------------------------------------------------------------------


def grid_points(cfg: ExperimentConfig) -> list[dict]:
    ns = list(cfg.grid.get("n", []))
    if cfg.s_exponent is not None:
        if not ns:
            raise InvalidArgs("s_exponent needs an n grid")
        pts = [{"n": int(n), "s": int(math.ceil(n ** cfg.s_exponent - 1e-12))}
               for n in ns]
    else:
        keys = [k for k in ("n", "s") if k in cfg.grid]
        pts = [dict(zip(keys, map(int, combo)))
               for combo in itertools.product(*(cfg.grid[k] for k in keys))]
    Ns = cfg.grid.get("N")
    if Ns:
        pts = [{**p, "N": int(N)} for p in pts for N in Ns]
    return pts


def _key(pt: dict) -> tuple[str, str]:
    keys = [k for k in ("n", "s", "N") if k in pt]
    return ";".join(keys), ";".join(str(pt[k]) for k in keys)


@dataclass
class Truth:
    """θ and the ζ's used to standardize, with provenance."""

    theta: float
    zeta1: float
    zeta_s: float
    source: str
    theta_se: float = 0.0
    se_zeta1: float = 0.0
    se_zeta_s: float = 0.0
    Eg3: float | None = None
    Eh3: float | None = None


def _analytic_truth(kernel, gen, s) -> Truth | None:
    if kernel.name != "mean":
        return None
    mu, var = gen.response_mean(), gen.response_var()
    if mu is None or var is None:
        return None
    a3 = gen.response_abs_moment(3)
    Eg3 = None if a3 is None else a3 / s ** 3
    Eh3 = None
    if a3 is not None and getattr(gen, "family", "") == "LinearGaussian":
        # the mean of s Gaussians is Gaussian
        Eh3 = (var / s) ** 1.5 * 2.0 * math.sqrt(2.0 / math.pi)
    return Truth(mu, var / s ** 2, var / s, "analytic", Eg3=Eg3, Eh3=Eh3)


def resolve_truth(cfg: ExperimentConfig, kernel, gen, s: int, threads: int = 1,
                  stream: int = 0) -> Truth:
    """Analytic values for the mean kernel, else declared or Monte Carlo oracles."""
    truth = _analytic_truth(kernel, gen, s)
    if truth is not None and cfg.zeta is None and cfg.theta is None:
        return truth
    mc = cfg.mc
    oracle_seed = child_seed(cfg.seed, 10**6, stream).generate_state(1)[0]
    if cfg.zeta is not None:
        z1, zs = float(cfg.zeta["zeta1"]), float(cfg.zeta["zeta_s"])
        se1, ses = cfg.zeta.get("se_zeta1", 0.0), cfg.zeta.get("se_zeta_s", 0.0)
        src = "declared"
    elif truth is not None:
        z1, zs, se1, ses, src = truth.zeta1, truth.zeta_s, 0.0, 0.0, "analytic"
    else:
        comp = estimate_components(kernel, gen, s, mc.get("M_outer", 20000),
                                   mc.get("M_inner", 4), mc.get("M_s", 100000),
                                   int(oracle_seed), threads,
                                   n_first=mc.get("n_first", 8))
        z1, zs, se1, ses, src = (comp.zeta1_omega, comp.zeta_s, comp.se_zeta1_omega,
                                 comp.se_zeta_s, "monte-carlo")
    if cfg.theta is not None:
        theta, tse = float(cfg.theta), float(cfg.theta_se or 0.0)
    elif truth is not None:
        theta, tse = truth.theta, 0.0
    else:
        M = mc.get("theta_M", 10**6)
        v = kernel_draws(kernel, gen, s, M, int(oracle_seed) + 1, threads, stream=7)
        v = v[~np.isnan(v)]
        theta, tse = float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))
    return Truth(theta, z1, zs, src, tse, se1, ses)


# ---------------------------------------------------------------------------
# Replications
# ---------------------------------------------------------------------------


def _one_estimate(cfg, kernel, gen, pt, g_idx, r):
    n, s = pt["n"], pt["s"]
    seed = child_seed(cfg.seed, g_idx, r).generate_state(2, dtype=np.uint64)
    data = generate(gen, n, int(seed[0]))
    master = int(seed[1])
    if cfg.scheme == "complete":
        if kernel.name == "mean" and n_subsamples(n, s) > DEFAULT_ENUMERATION_CAP:
            # every subsample mean averages to the grand mean
            return float(math.fsum(data.y.tolist()) / n), None
        res = complete_u(data, kernel, s, master)
        return res.theta_hat, res.realized_N
    conf = EnsembleConfig(s, pt["N"], cfg.scheme, master)
    res = generalized_incomplete_u(data, kernel, conf)
    return res.theta_hat, res.realized_N


def replicate(cfg, kernel, gen, pt, g_idx, threads=1) -> tuple[np.ndarray, np.ndarray]:
    """R independent estimates at one grid point, in replicate order."""
    def run(r):
        return _one_estimate(cfg, kernel, gen, pt, g_idx, r)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(run, range(cfg.R)))
    else:
        out = [run(r) for r in range(cfg.R)]
    est = np.array([o[0] for o in out])
    nhat = np.array([np.nan if o[1] is None else o[1] for o in out], dtype=float)
    return est, nhat


def _target_N(cfg, pt):
    return None if cfg.scheme == "complete" else pt.get("N")


def _setup(cfg):
    kernel = make_kernel(KernelSpec.from_dict(cfg.kernel))
    gen = parse_generator(cfg.generator)
    return kernel, gen


def _metadata(cfg, t0, extra=None) -> dict:
    md = {"config": cfg.to_dict(), "seed": cfg.seed, "package_version": __version__,
          "numpy_version": np.__version__, "python_version": platform.python_version(),
          "wall_time_s": time.perf_counter() - t0}
    if extra:
        md.update(extra)
    return md


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def run_clt_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """KS distance to N(0, 1) of standardized estimates across a grid.

    Two standardizations are reported: ``full`` divides by
    √(s² ζ₁ / n + ζ_s / N) and ``linear`` by √(s² ζ₁ / n). When third
    moments are known, Berry-Esseen bounds are emitted alongside.
    """
    t0 = time.perf_counter()
    kernel, gen = _setup(cfg)
    rep = ExperimentReport()
    sources = {}
    for g_idx, pt in enumerate(grid_points(cfg)):
        key, val = _key(pt)
        n, s = pt["n"], pt["s"]
        N = _target_N(cfg, pt)
        truth = resolve_truth(cfg, kernel, gen, s, threads, g_idx)
        sources[val] = truth.source
        est, nhat = replicate(cfg, kernel, gen, pt, g_idx, threads)
        v_full = ci_variance(truth.zeta1, truth.zeta_s, n, s, N)
        v_lin = ci_variance(truth.zeta1, truth.zeta_s, n, s, None)
        ksse = ks_se(cfg.R)
        for label, var in (("full", v_full), ("linear", v_lin)):
            z = (est - truth.theta) / math.sqrt(var)
            rep.add("clt", key, val, f"ks_{label}", ks_to_standard_normal(z), ksse)
            rep.add("clt", key, val, f"mean_{label}", float(z.mean()),
                    float(z.std(ddof=1) / math.sqrt(z.size)))
            rep.add("clt", key, val, f"var_{label}", float(z.var(ddof=1)),
                    float(z.var(ddof=1) * math.sqrt(2.0 / (z.size - 1))))
        # the standardizing components, with their Monte Carlo SEs when estimated
        rep.add("clt", key, val, "zeta1_used", truth.zeta1, truth.se_zeta1)
        rep.add("clt", key, val, "zeta_s_used", truth.zeta_s, truth.se_zeta_s)
        if N is not None:
            rep.add("clt", key, val, "realized_N_mean", float(np.nanmean(nhat)),
                    float(np.nanstd(nhat, ddof=1) / math.sqrt(cfg.R)))
        if truth.Eg3 is not None:
            inp = BEInputs(n=n, s=s, zeta1=truth.zeta1, zeta_s=truth.zeta_s, N=N,
                           Eg2=truth.zeta1, Eg3=truth.Eg3, Eh2=truth.zeta_s,
                           Eh3=truth.Eh3)
            rep.add("clt", key, val, "be_complete",
                    bound_breakdown("complete", inp)["total"])
            if N is not None:
                rep.add("clt", key, val, "be_incomplete",
                        bound_breakdown("incomplete", inp)["total"])
                if truth.Eh3 is not None:
                    rep.add("clt", key, val, "be_convolution",
                            bound_breakdown("convolution", inp, cfg.C)["total"])
                    rep.add("clt", key, val, "be_subgaussian",
                            bound_breakdown("subgaussian", inp, cfg.C, cfg.eta)["total"])
    rep.metadata = _metadata(cfg, t0, {"truth_source": sources,
                                       "bound_constant_C": cfg.C})
    return rep


def run_coverage_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Fraction of replicate intervals covering θ, with binomial SE."""
    t0 = time.perf_counter()
    kernel, gen = _setup(cfg)
    rep = ExperimentReport()
    sources = {}
    for g_idx, pt in enumerate(grid_points(cfg)):
        key, val = _key(pt)
        n, s = pt["n"], pt["s"]
        N = _target_N(cfg, pt)
        truth = resolve_truth(cfg, kernel, gen, s, threads, g_idx)
        sources[val] = truth.source
        est, nhat = replicate(cfg, kernel, gen, pt, g_idx, threads)
        var = ci_variance(truth.zeta1, truth.zeta_s, n, s, N)
        degenerate = not var > 0
        if degenerate:
            covered = np.abs(est - truth.theta) <= 1e-12 * max(1.0, abs(truth.theta))
            half = 0.0
        else:
            ci = build_ci(0.0, truth.zeta1, truth.zeta_s, n, s, N, cfg.level)
            half = ci.half_width
            covered = np.abs(est - truth.theta) <= half
        cov = float(covered.mean())
        rep.add("coverage", key, val, "coverage", cov,
                math.sqrt(max(cov * (1 - cov), 0.0) / cfg.R))
        rep.add("coverage", key, val, "half_width", half)
        rep.add("coverage", key, val, "theta", truth.theta, truth.theta_se)
        rep.add("coverage", key, val, "degenerate", int(degenerate))
        if N is not None:
            rep.add("coverage", key, val, "realized_N_mean", float(np.nanmean(nhat)),
                    float(np.nanstd(nhat, ddof=1) / math.sqrt(cfg.R)))
    rep.metadata = _metadata(cfg, t0, {"truth_source": sources, "level": cfg.level})
    return rep


def _overlay(kernel, gen, s):
    """Closed-form ratio and c(k) where they apply."""
    out = {}
    spec = kernel.spec
    if spec is None:
        return out
    if spec.kind == "mean":
        out["closed_form"] = closed_form_ratio("mean")
    elif spec.kind == "variance":
        var, mu4 = gen.response_var(), gen.response_central_moment(4)
        if var is not None and mu4 is not None and s >= 2:
            out["closed_form"] = closed_form_ratio("variance", s, var, mu4)
    elif spec.kind == "random_k":
        out["closed_form"] = closed_form_ratio("random_k", s, k=spec.k)
    elif spec.kind == "knn":
        if (spec.k == 1 and getattr(gen, "family", "") == "OneMinusX"
                and spec.target_x == (0.0,)):
            out["closed_form"] = closed_form_ratio("one_nn", s, gen.sigma ** 2)
        if 2 * spec.k <= 2000:
            out["c_k"] = c_of_k(spec.k)
    return out


def run_ratio_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Monte Carlo variance ratio across an s grid, with closed-form overlays."""
    t0 = time.perf_counter()
    kernel, gen = _setup(cfg)
    rep = ExperimentReport()
    mc = cfg.mc
    svals = [int(s) for s in cfg.grid.get("s", [])]
    if not svals:
        raise InvalidArgs("ratio experiment needs an s grid")
    for g_idx, s in enumerate(svals):
        key, val = "s", str(s)
        seed = int(child_seed(cfg.seed, g_idx).generate_state(1)[0])
        comp = estimate_components(kernel, gen, s, mc.get("M_outer", 2000),
                                   mc.get("M_inner", 4), mc.get("M_s", 20000), seed,
                                   threads, n_first=mc.get("n_first", 8))
        rep.add("ratio", key, val, "zeta1_omega", comp.zeta1_omega, comp.se_zeta1_omega)
        rep.add("ratio", key, val, "zeta_s", comp.zeta_s, comp.se_zeta_s)
        rep.add("ratio", key, val, "zeta_s_omega", comp.zeta_s_omega, comp.se_zeta_s_omega)
        if comp.zeta1_omega > 0:
            rep.add("ratio", key, val, "ratio", comp.ratio, comp.ratio_se)
        for stat, v in _overlay(kernel, gen, s).items():
            rep.add("ratio", key, val, stat, v)
    rep.metadata = _metadata(cfg, t0)
    return rep


def run_ck_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """c(k) for k = 1..k_max at the configured s_approx."""
    t0 = time.perf_counter()
    rep = ExperimentReport()
    for k in range(1, cfg.k_max + 1):
        rep.add("ck", "k", str(k), "c_k", c_of_k(k, cfg.s_approx, converge=False))
    rep.metadata = _metadata(cfg, t0)
    return rep


RUNNERS = {
    "clt": run_clt_experiment,
    "coverage": run_coverage_experiment,
    "ratio": run_ratio_experiment,
    "ck": run_ck_experiment,
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    return RUNNERS[cfg.experiment](cfg, threads)
