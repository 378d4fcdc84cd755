"""Complete and generalized incomplete U-statistic estimators."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (DEFAULT_ENUMERATION_CAP, Dataset, Design, EnsembleConfig,
                   complete_design, make_design)
from .exceptions import InvalidArgs, NumericalFailure, SingularDesign
from .learners import Kernel, make_kernel

# Target number of scalars gathered per evaluation chunk.
_CHUNK_ELEMS = 400_000

DEFAULT_RESERVOIR = 1_000_000


@dataclass
class EnsembleResult:
    """Outcome of one ensemble evaluation.

    ``theta_hat`` is the mean of the kernel over the ``realized_N`` evaluated
    subsamples. ``per_subsample`` holds ``(ordinal, value)`` pairs when
    capture was requested; past the reservoir cap it is a uniform subset.
    """

    theta_hat: float
    realized_N: int
    target_N: int | None
    scheme: str
    s: int
    per_subsample: list | None = None
    timing: float = 0.0
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"theta_hat": self.theta_hat, "realized_N": self.realized_N,
                "target_N": self.target_N, "scheme": self.scheme, "s": self.s,
                "timing": self.timing, **({"meta": self.meta} if self.meta else {})}


def _chunks(total: int, size: int):
    return [(a, min(total, a + size)) for a in range(0, total, size)]


def evaluate_design(dataset: Dataset, kernel: Kernel, design: Design,
                    threads: int = 1) -> tuple[np.ndarray, dict]:
    """Kernel value for every subsample of ``design`` in ordinal order."""
    idx = design.indices
    m, s = idx.shape
    vals = np.empty(m)
    if m == 0:
        return vals, {}
    step = max(1, _CHUNK_ELEMS // (s * dataset.p))
    parts = _chunks(m, step)
    X, y = dataset.X, dataset.y

    def run(bounds):
        a, b = bounds
        info = {}
        rows = idx[a:b]
        vals[a:b] = kernel.batch(X[rows], y[rows], design.omega[a:b], info=info)
        return info

    if threads > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            infos = list(pool.map(run, parts))
    else:
        infos = [run(p) for p in parts]
    merged: dict = {}
    for info in infos:
        for key, v in info.items():
            merged[key] = merged.get(key, 0) + v
    return vals, merged


def _reduce(dataset, kernel, design, s, threads, keep, reservoir, seed, t0):
    vals, info = evaluate_design(dataset, kernel, design, threads)
    bad = int(np.isnan(vals).sum())
    if bad:
        raise SingularDesign(f"kernel undefined on {bad} of {vals.size} subsamples")
    m = design.realized_N
    theta = math.fsum(vals.tolist()) / m if m else float("nan")
    captured = None
    if keep:
        ords = np.arange(m)
        if m > reservoir:
            rng = np.random.default_rng(int(seed))
            ords = np.sort(rng.choice(m, size=reservoir, replace=False))
        captured = list(zip(ords.tolist(), vals[ords].tolist()))
    meta = dict(design.meta)
    meta.update(info)
    return EnsembleResult(theta, m, design.target_N, design.scheme, s, captured,
                          time.perf_counter() - t0, meta)


def complete_u(dataset: Dataset, kernel, s: int, master_seed: int = 0,
               threads: int = 1, keep: bool = False,
               reservoir: int = DEFAULT_RESERVOIR,
               cap: int = DEFAULT_ENUMERATION_CAP) -> EnsembleResult:
    """Mean of the kernel over all C(n, s) subsamples.

    Kernels that consume ω get an independent derived seed per subsample.
    """
    t0 = time.perf_counter()
    kernel = make_kernel(kernel)
    if not 1 <= s <= dataset.n:
        raise InvalidArgs(f"need 1 <= s <= n, got s={s}, n={dataset.n}")
    kernel.check(s, dataset.p)
    design = complete_design(dataset.n, s, master_seed, cap)
    return _reduce(dataset, kernel, design, s, threads, keep, reservoir,
                   master_seed, t0)


def generalized_incomplete_u(dataset: Dataset, kernel, config: EnsembleConfig,
                             threads: int = 1, keep: bool = False,
                             reservoir: int = DEFAULT_RESERVOIR,
                             cap: int = DEFAULT_ENUMERATION_CAP,
                             design: Design | None = None) -> EnsembleResult:
    """Mean of the kernel over a randomly selected design.

    Under the Bernoulli scheme the realized number of subsamples N̂ is
    random with mean N; the estimate divides by N̂ and reports both.
    """
    t0 = time.perf_counter()
    kernel = make_kernel(kernel)
    kernel.check(config.s, dataset.p)
    if design is None:
        design = make_design(dataset.n, config, cap)
    if design.realized_N == 0:
        raise NumericalFailure("the Bernoulli draw selected no subsamples; increase N")
    return _reduce(dataset, kernel, design, config.s, threads, keep, reservoir,
                   config.master_seed, t0)
