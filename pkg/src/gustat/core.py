"""Data model, subsample designs and the splittable randomness contract.

Row indices are 0-based everywhere. A *design* is a set of distinct subsamples
(sorted index tuples) plus one derived auxiliary-randomness seed per ordinal.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .exceptions import CapExceeded, InvalidArgs

DEFAULT_ENUMERATION_CAP = 10**7

# C(n, s) above this saturates to HUGE.
_SATURATION = 2**128 - 1
HUGE = math.inf

SCHEMES = ("complete", "bernoulli", "fixedn")

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_STREAM = np.uint64(0xD1B54A32D192ED03)


# ---------------------------------------------------------------------------
# Data model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sample:
    x: np.ndarray
    y: float


@dataclass(frozen=True)
class Dataset:
    """Immutable table of (covariate vector, response) rows.

    Parameters
    ----------
    X : array of shape (n, p)
    y : array of shape (n,)
    """

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        y = np.array(self.y, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or y.ndim != 1:
            raise InvalidArgs("X must be 2-D and y 1-D")
        if X.shape[0] != y.shape[0]:
            raise InvalidArgs(
                f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise InvalidArgs("dataset needs n >= 1 rows and p >= 1 covariates")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise InvalidArgs("dataset contains non-finite values")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def rows(self) -> list[Sample]:
        return [Sample(self.X[i], float(self.y[i])) for i in range(self.n)]

    def __len__(self):
        return self.n

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        """Read a CSV whose header is ``x1,...,xp,y``."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise InvalidArgs(f"{path}: empty file") from None
            if not header or header[-1] != "y":
                raise InvalidArgs(f"{path}: last column must be 'y'")
            expected = [f"x{j + 1}" for j in range(len(header) - 1)]
            if header[:-1] != expected:
                raise InvalidArgs(
                    f"{path}: expected header {expected + ['y']}, got {header}")
            try:
                data = [[float(v) for v in row] for row in reader if row]
            except ValueError as exc:
                raise InvalidArgs(f"{path}: {exc}") from None
        if not data:
            raise InvalidArgs(f"{path}: no data rows")
        if any(len(r) != len(header) for r in data):
            raise InvalidArgs(f"{path}: ragged rows")
        arr = np.asarray(data)
        return cls(arr[:, :-1], arr[:, -1])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"x{j + 1}" for j in range(self.p)] + ["y"])
            for xi, yi in zip(self.X, self.y):
                writer.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])


@dataclass(frozen=True)
class EnsembleConfig:
    """Parameters of a (generalized) U-statistic ensemble.

    ``N`` is ignored by the complete scheme. Under ``bernoulli`` each of the
    C(n, s) subsamples is kept with probability N / C(n, s); under ``fixedn``
    exactly N distinct subsamples are drawn.
    """

    s: int
    N: int = 1
    scheme: str = "bernoulli"
    master_seed: int = 0

    def __post_init__(self):
        scheme = str(self.scheme).lower()
        if scheme not in SCHEMES:
            raise InvalidArgs(f"unknown scheme {self.scheme!r}; use one of {SCHEMES}")
        object.__setattr__(self, "scheme", scheme)
        if int(self.s) < 1:
            raise InvalidArgs("s must be >= 1")
        if scheme != "complete" and int(self.N) < 1:
            raise InvalidArgs("N must be >= 1")
        if not 0 <= int(self.master_seed) <= _MASK64:
            raise InvalidArgs("master_seed must be a 64-bit unsigned integer")

    def validate_for(self, n: int) -> None:
        if self.s > n:
            raise InvalidArgs(f"s={self.s} exceeds n={n}")
        if self.scheme != "complete":
            C = n_subsamples(n, self.s)
            if self.N > C:
                raise InvalidArgs(f"N={self.N} exceeds C({n},{self.s})={C}")


@dataclass
class Design:
    """Subsample design: ``indices`` has one sorted row per ordinal."""

    indices: np.ndarray
    omega: np.ndarray
    realized_N: int
    scheme: str
    target_N: int | None = None
    n: int | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.realized_N

    def to_jsonl(self, path) -> None:
        """Dump ``{ordinal, indices, omega_seed}`` lines for debugging."""
        with open(path, "w") as fh:
            for i, (row, om) in enumerate(zip(self.indices, self.omega)):
                fh.write(json.dumps({
                    "ordinal": i,
                    "indices": [int(v) for v in row],
                    "omega_seed": int(om),
                }) + "\n")


# ---------------------------------------------------------------------------
# Counting and enumeration
# ---------------------------------------------------------------------------


def n_subsamples(n: int, s: int) -> float | int:
    """C(n, s) as an exact int, or ``HUGE`` once it passes 2**128 - 1."""
    if s < 0 or n < 0:
        raise InvalidArgs("n and s must be nonnegative")
    if s > n:
        return 0
    c = math.comb(n, s)
    return HUGE if c > _SATURATION else c


def selection_probability(n: int, s: int, N: int) -> float:
    """p = N / C(n, s); zero when C(n, s) saturates."""
    C = n_subsamples(n, s)
    if C == HUGE:
        return 0.0
    if C == 0:
        raise InvalidArgs(f"s={s} exceeds n={n}")
    return N / C


def enumerate_subsamples(n: int, s: int, cap: int = DEFAULT_ENUMERATION_CAP
                         ) -> Iterator[tuple[int, ...]]:
    """Lazily yield all C(n, s) index tuples in lexicographic order."""
    if not 1 <= s <= n:
        raise InvalidArgs(f"need 1 <= s <= n, got n={n}, s={s}")
    C = n_subsamples(n, s)
    if C > cap:
        raise CapExceeded(f"C({n},{s}) exceeds enumeration cap {cap}")
    return itertools.combinations(range(n), s)


def _all_subsamples(n: int, s: int, cap: int) -> np.ndarray:
    C = n_subsamples(n, s)
    gen = enumerate_subsamples(n, s, cap)
    flat = np.fromiter(itertools.chain.from_iterable(gen), dtype=np.int64,
                       count=int(C) * s)
    return flat.reshape(int(C), s)


# ---------------------------------------------------------------------------
# Splittable randomness
# ---------------------------------------------------------------------------


def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; a bijection on uint64.
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def derive_omega(master_seed: int, ordinal) -> np.ndarray | int:
    """Seed of the auxiliary-randomness stream owned by one subsample ordinal.

    For a fixed master seed the map ordinal -> seed is injective, so distinct
    ordinals never share a stream. Accepts a scalar or an array of ordinals.
    """
    key = _mix64(np.uint64(int(master_seed) & _MASK64))
    ords = np.asarray(ordinal, dtype=np.uint64)
    with np.errstate(over="ignore"):
        out = _mix64(key + (ords + np.uint64(1)) * _GOLDEN)
    if out.ndim == 0:
        return int(out)
    return out


def omega_uniforms(omega, count: int, offset: int = 0) -> np.ndarray:
    """Counter-based uniforms in [0, 1) from one or many ω seeds.

    Returns shape ``(*omega.shape, count)``; entry ``j`` is the draw at
    counter ``offset + j`` of each stream.
    """
    om = _mix64(np.asarray(omega, dtype=np.uint64) ^ _STREAM)
    ctr = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _mix64(om[..., None] + ctr * _GOLDEN)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def child_seed(seed: int, *keys: int) -> np.random.SeedSequence:
    """SeedSequence for a numbered sub-task; independent of thread layout."""
    return np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(int(k) for k in keys))


def child_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(child_seed(seed, *keys))


# ---------------------------------------------------------------------------
# Design sampling
# ---------------------------------------------------------------------------


def _random_subsets(rng: np.random.Generator, n: int, s: int, size: int) -> np.ndarray:
    """``size`` independent uniform s-subsets of range(n), rows sorted."""
    if s == n:
        return np.broadcast_to(np.arange(n), (size, n)).copy()
    if s * (s - 1) <= 2 * n:
        # with-replacement draws, redraw rows containing a repeat
        rows = np.sort(rng.integers(0, n, size=(size, s)), axis=1)
        bad = (np.diff(rows, axis=1) == 0).any(axis=1) if s > 1 else np.zeros(size, bool)
        while bad.any():
            fresh = np.sort(rng.integers(0, n, size=(int(bad.sum()), s)), axis=1)
            rows[bad] = fresh
            bad = (np.diff(rows, axis=1) == 0).any(axis=1)
        return rows
    out = np.empty((size, s), dtype=np.int64)
    step = max(1, 2_000_000 // n)
    for lo in range(0, size, step):
        hi = min(size, lo + step)
        keys = rng.random((hi - lo, n))
        out[lo:hi] = np.sort(np.argpartition(keys, s - 1, axis=1)[:, :s], axis=1)
    return out


def _distinct_subsets(rng: np.random.Generator, n: int, s: int, m: int,
                      C, cap: int) -> np.ndarray:
    """m distinct s-subsets, uniform over all such collections."""
    if m == 0:
        return np.empty((0, s), dtype=np.int64)
    if C != HUGE and C <= cap and 2 * m > C:
        allrows = _all_subsamples(n, s, cap)
        pick = rng.choice(int(C), size=m, replace=False)
        return allrows[np.sort(pick)]
    # Rejection on the canonical (sorted) form: keep first occurrences in
    # draw order, which leaves a uniform sample without replacement.
    rows = np.empty((0, s), dtype=np.int64)
    while True:
        need = m - rows.shape[0]
        batch = _random_subsets(rng, n, s, need + need // 8 + 8)
        rows = np.concatenate([rows, batch])
        _, first = np.unique(rows, axis=0, return_index=True)
        first.sort()
        rows = rows[first]
        if rows.shape[0] >= m:
            return rows[:m]


def _lexsort_rows(rows: np.ndarray) -> np.ndarray:
    if rows.shape[0] == 0:
        return rows
    order = np.lexsort(rows.T[::-1])
    return rows[order]


def complete_design(n: int, s: int, master_seed: int = 0,
                    cap: int = DEFAULT_ENUMERATION_CAP) -> Design:
    indices = _all_subsamples(n, s, cap)
    omega = derive_omega(master_seed, np.arange(indices.shape[0]))
    return Design(indices, omega, indices.shape[0], "complete", None, n)


def draw_incomplete_design(n: int, s: int, N: int, scheme: str = "bernoulli",
                           seed: int = 0, cap: int = DEFAULT_ENUMERATION_CAP
                           ) -> Design:
    """Draw the subsample design of an incomplete (generalized) U-statistic.

    ``bernoulli``: draw N̂ ~ Binomial(C(n,s), N/C(n,s)), then N̂ distinct
    subsamples uniformly without replacement. ``fixedn``: exactly N distinct
    subsamples. Rows come back in lexicographic order and ordinal ``i`` owns
    ω seed ``derive_omega(seed, i)``.
    """
    scheme = str(scheme).lower()
    if not 1 <= s <= n:
        raise InvalidArgs(f"need 1 <= s <= n, got n={n}, s={s}")
    if scheme == "complete":
        return complete_design(n, s, seed, cap)
    if scheme not in SCHEMES:
        raise InvalidArgs(f"unknown scheme {scheme!r}")
    if N < 1:
        raise InvalidArgs("N must be >= 1")
    C = n_subsamples(n, s)
    if N > C:
        raise InvalidArgs(f"N={N} exceeds C({n},{s})={C}")
    rng = np.random.default_rng(int(seed) & _MASK64)
    meta = {"C": "huge" if C == HUGE else int(C)}
    if scheme == "fixedn":
        n_hat = int(N)
    elif C == HUGE or C > np.iinfo(np.int64).max:
        # Binomial(C, N/C) with C beyond int64: Poisson(N) limit, TV error <= N/C.
        n_hat = int(rng.poisson(N))
        meta["nhat_law"] = "poisson-limit"
    else:
        n_hat = int(rng.binomial(int(C), N / int(C)))
        meta["nhat_law"] = "binomial"
    rows = _distinct_subsets(rng, n, s, n_hat, C, cap)
    rows = _lexsort_rows(rows)
    omega = derive_omega(seed, np.arange(rows.shape[0]))
    return Design(rows, omega, rows.shape[0], scheme, int(N), n, meta)


def make_design(n: int, config: EnsembleConfig,
                cap: int = DEFAULT_ENUMERATION_CAP) -> Design:
    config.validate_for(n)
    if config.scheme == "complete":
        return complete_design(n, config.s, config.master_seed, cap)
    return draw_incomplete_design(n, config.s, config.N, config.scheme,
                                  config.master_seed, cap)


def as_index_rows(subsamples: Sequence[Sequence[int]]) -> np.ndarray:
    return np.asarray([tuple(r) for r in subsamples], dtype=np.int64)


def write_jsonl(path, records) -> None:
    Path(path).write_text("".join(json.dumps(r) + "\n" for r in records))
