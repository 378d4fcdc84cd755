"""Base-learner kernels h(Z_1, ..., Z_s; ω) and k-PNN geometry.

Every kernel is evaluated in batches: ``X`` has shape ``(B, s, p)``, ``y`` has
shape ``(B, s)`` and ``omega`` holds one 64-bit seed per row. Rows of a
subsample are assumed to be in canonical order (ascending row index), which
is what the design code produces. The scalar entry points canonicalize
their input first, so they are exactly symmetric under permutations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import omega_uniforms
from .exceptions import InvalidArgs, SingularDesign

KINDS = ("mean", "variance", "ols", "knn", "cart", "rp_tree", "random_k")

_ALIASES = {
    "olspredict": "ols", "ols_predict": "ols",
    "carttree": "cart", "cart_tree": "cart",
    "rptree": "rp_tree", "rp": "rp_tree",
    "randomk": "random_k",
}

COND_THRESHOLD = 1e12

# Cap on the number of booleans materialized per k-PNN block.
_PNN_BLOCK = 8_000_000


@dataclass(frozen=True)
class KernelSpec:
    """Identifies a base learner and its hyperparameters.

    Parameters
    ----------
    kind : str
        One of ``mean``, ``variance``, ``ols``, ``knn``, ``cart``,
        ``rp_tree``, ``random_k``.
    k : int
        Neighbour count (knn), terminal-node cap (cart), PNN order and
        number of averaged points (rp_tree), selection size (random_k).
    mtry : int
        Features tried per split for cart; 0 means all.
    target_x : tuple of float or None
        Prediction point for ols, knn, cart and rp_tree.
    """

    kind: str
    k: int = 1
    mtry: int = 0
    target_x: tuple | None = None

    def __post_init__(self):
        kind = str(self.kind).lower()
        kind = _ALIASES.get(kind, kind)
        if kind not in KINDS:
            raise InvalidArgs(f"unknown kernel kind {self.kind!r}; use one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        if int(self.k) < 1:
            raise InvalidArgs("k must be >= 1")
        if int(self.mtry) < 0:
            raise InvalidArgs("mtry must be >= 0")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "mtry", int(self.mtry))
        if self.target_x is not None:
            tx = tuple(float(v) for v in np.atleast_1d(np.asarray(self.target_x, dtype=float)))
            if not np.isfinite(tx).all():
                raise InvalidArgs("target_x must be finite")
            object.__setattr__(self, "target_x", tx)
        elif self.needs_target:
            raise InvalidArgs(f"{kind} kernel requires target_x")

    @property
    def needs_target(self) -> bool:
        return self.kind in ("ols", "knn", "cart", "rp_tree")

    @property
    def uses_omega(self) -> bool:
        return (self.kind in ("rp_tree", "random_k")
                or (self.kind == "cart" and self.mtry > 0))

    @property
    def min_s(self) -> int:
        if self.kind == "variance":
            return 2
        if self.kind in ("knn", "random_k"):
            return self.k
        if self.kind == "ols":
            return len(self.target_x)
        return 1

    def check(self, s: int, p: int) -> None:
        """Raise ``InvalidArgs`` unless the kernel is defined for (s, p)."""
        if self.needs_target and len(self.target_x) != p:
            raise InvalidArgs(f"target_x has length {len(self.target_x)}, data has p={p}")
        if self.kind == "cart" and self.mtry > p:
            raise InvalidArgs(f"mtry={self.mtry} exceeds p={p}")
        if s < self.min_s:
            raise InvalidArgs(f"{self.kind} kernel needs s >= {self.min_s}, got s={s}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "k": self.k, "mtry": self.mtry}
        if self.target_x is not None:
            d["target_x"] = list(self.target_x)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        unknown = set(d) - {"kind", "k", "mtry", "target_x"}
        if unknown:
            raise InvalidArgs(f"unknown kernel fields {sorted(unknown)}")
        if "kind" not in d:
            raise InvalidArgs("kernel spec needs 'kind'")
        return cls(d["kind"], d.get("k", 1), d.get("mtry", 0), d.get("target_x"))

    @classmethod
    def from_json(cls, text: str) -> "KernelSpec":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise InvalidArgs(f"bad kernel JSON: {exc}") from None


@dataclass
class PnnSet:
    """k-potential nearest neighbours of a target within one subsample.

    ``members`` are positions within the subsample (ascending) and
    ``blocking`` the number of other points in each member's box.
    """

    members: np.ndarray
    blocking: np.ndarray

    def __len__(self):
        return len(self.members)


# ---------------------------------------------------------------------------
# Canonical ordering
# ---------------------------------------------------------------------------


def canonical_order(X: np.ndarray, y: np.ndarray, index=None) -> np.ndarray:
    """Permutation putting a subsample in canonical order.

    Sorts by row index when given, otherwise lexicographically by
    (x_1, ..., x_p, y) so that relabelled copies of the same multiset agree.
    """
    if index is not None:
        index = np.asarray(index)
        if len(np.unique(index)) != len(index):
            raise InvalidArgs("row indices must be distinct")
        return np.argsort(index, kind="stable")
    keys = [y] + [X[:, j] for j in range(X.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


# ---------------------------------------------------------------------------
# Batched kernels
# ---------------------------------------------------------------------------


def _mean_batch(spec, X, y, omega):
    return y.sum(axis=1) / y.shape[1]


def _variance_batch(spec, X, y, omega):
    s = y.shape[1]
    dev = y - (y.sum(axis=1) / s)[:, None]
    # Average of (y_i - y_j)^2 over pairs = 2 * unbiased sample variance.
    return 2.0 * (dev * dev).sum(axis=1) / (s - 1)


def _ols_batch(spec, X, y, omega):
    x0 = np.asarray(spec.target_x)
    G = np.einsum("bij,bik->bjk", X, X)
    b = np.einsum("bij,bi->bj", X, y)
    cond = np.linalg.cond(G)
    ok = np.isfinite(cond) & (cond <= COND_THRESHOLD)
    out = np.full(X.shape[0], np.nan)
    if ok.any():
        beta = np.linalg.solve(G[ok], b[ok][..., None])[..., 0]
        out[ok] = beta @ x0
    return out


def _sq_dist(X, x0):
    d = X - x0
    return (d * d).sum(axis=-1)


def _knn_batch(spec, X, y, omega):
    k = spec.k
    d2 = _sq_dist(X, np.asarray(spec.target_x))
    if k == 1:
        pick = np.argmin(d2, axis=1)
        return y[np.arange(y.shape[0]), pick]
    # stable sort keeps the smaller row position first on ties
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return np.take_along_axis(y, order, axis=1).sum(axis=1) / k


def _random_k_batch(spec, X, y, omega):
    k, s = spec.k, y.shape[1]
    keys = omega_uniforms(omega, s)
    pick = np.argpartition(keys, k - 1, axis=1)[:, :k] if k < s else np.broadcast_to(
        np.arange(s), keys.shape)
    return np.take_along_axis(y, pick, axis=1).sum(axis=1) / k


def blocking_counts(X: np.ndarray, target_x) -> np.ndarray:
    """Number of other points inside each point's closed box with the target.

    ``X`` has shape ``(B, s, p)``; returns integer counts of shape ``(B, s)``.
    """
    X = np.asarray(X, dtype=float)
    x0 = np.asarray(target_x, dtype=float)
    B, s, p = X.shape
    lo = np.minimum(X, x0)
    hi = np.maximum(X, x0)
    out = np.empty((B, s), dtype=np.int64)
    step = max(1, _PNN_BLOCK // max(1, s * s * p))
    for a in range(0, B, step):
        b = min(B, a + step)
        # inside[b, i, j]: point j lies in the box of point i
        Xj = X[a:b, None, :, :]
        inside = ((Xj >= lo[a:b, :, None, :]) & (Xj <= hi[a:b, :, None, :])).all(axis=-1)
        out[a:b] = inside.sum(axis=2) - 1
    return out


def _kpnn_members_2d(X: np.ndarray, x0: np.ndarray, k: int) -> np.ndarray:
    """k-PNN membership for p = 2 in O(s k) per subsample.

    A box around the target only holds points of the same quadrant, so
    after sorting by |Δx_1| a point is a k-PNN iff fewer than k earlier
    points of its quadrant have |Δx_2| at most its own. A running buffer of
    the k smallest |Δx_2| per quadrant answers that. Rows with a point on a
    target axis or a repeated (|Δx_1|, |Δx_2|) pair go through
    :func:`blocking_counts` instead.
    """
    B, s, _ = X.shape
    d = X - x0
    a = np.abs(d)
    quad = (d[..., 0] > 0).astype(np.int64) * 2 + (d[..., 1] > 0)
    order = np.lexsort((a[..., 1], a[..., 0]), axis=1)
    a1 = np.take_along_axis(a[..., 0], order, axis=1)
    a2 = np.take_along_axis(a[..., 1], order, axis=1)
    qs = np.take_along_axis(quad, order, axis=1)
    slow = (a == 0).any(axis=(1, 2))
    if s > 1:
        slow |= ((np.diff(a1, axis=1) == 0) & (np.diff(a2, axis=1) == 0)).any(axis=1)
    member = np.empty((B, s), dtype=bool)
    rows = np.arange(B)
    buf = np.full((B, 4, k), np.inf)
    for t in range(s):
        q = qs[:, t]
        v = a2[:, t]
        cur = buf[rows, q]
        member[rows, order[:, t]] = (cur <= v[:, None]).sum(axis=1) < k
        worst = cur.argmax(axis=1)
        upd = v < cur[rows, worst]
        if upd.any():
            r = rows[upd]
            buf[r, q[upd], worst[upd]] = v[upd]
    if slow.any():
        member[slow] = blocking_counts(X[slow], x0) < k
    return member


def _rp_tree_batch(spec, X, y, omega, info=None):
    k, s = spec.k, y.shape[1]
    x0 = np.asarray(spec.target_x, dtype=float)
    if X.shape[2] == 2 and s > 4 * k:
        member = _kpnn_members_2d(X, x0, k)
    else:
        member = blocking_counts(X, x0) < k
    size = member.sum(axis=1)
    keys = omega_uniforms(omega, s)
    keys = np.where(member, keys, np.inf)
    m = min(k, s)
    pick = np.argsort(keys, axis=1, kind="stable")[:, :m]
    take = np.arange(m)[None, :] < np.minimum(size, k)[:, None]
    vals = np.take_along_axis(y, pick, axis=1)
    out = (vals * take).sum(axis=1) / take.sum(axis=1)
    if info is not None:
        info["pnn_short"] = info.get("pnn_short", 0) + int((size < k).sum())
        info["pnn_size_sum"] = info.get("pnn_size_sum", 0) + int(size.sum())
    return out


# ---------------------------------------------------------------------------
# CART, grown only along the path to the target
# ---------------------------------------------------------------------------


def _best_split(xcol: np.ndarray, y: np.ndarray):
    """Best gain and threshold on one feature; gain is n_L n_R / n (ȳ_L - ȳ_R)^2."""
    order = np.argsort(xcol, kind="stable")
    xs, ys = xcol[order], y[order]
    cuts = np.nonzero(xs[1:] > xs[:-1])[0]
    if cuts.size == 0:
        return -np.inf, None
    n = ys.size
    csum = np.cumsum(ys)
    nl = cuts + 1.0
    nr = n - nl
    mean_l = csum[cuts] / nl
    mean_r = (csum[-1] - csum[cuts]) / nr
    diff = mean_l - mean_r
    gain = nl * nr / n * diff * diff
    i = int(np.argmax(gain))
    c = cuts[i]
    return float(gain[i]), 0.5 * (xs[c] + xs[c + 1])


def cart_path_predict(X: np.ndarray, y: np.ndarray, target_x, k: int, mtry: int = 0,
                      omega: int | None = None, return_leaf: bool = False):
    """Prediction of a CART regression tree at ``target_x``.

    Cells split on the (feature, midpoint) pair maximizing the decrease in
    within-cell sum of squares per point; ties go to the lowest feature index
    and then the leftmost threshold. Left children hold ``x < z``. A cell is
    terminal when it has at most ``k`` points or no split strictly reduces
    the sum of squares. With ``mtry > 0`` each node considers ``mtry``
    features drawn from the ω stream (counter block ``depth * p``).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    x0 = np.asarray(target_x, dtype=float)
    p = X.shape[1]
    idx = np.arange(y.size)
    depth = 0
    while True:
        yc = y[idx]
        if idx.size <= k or np.ptp(yc) == 0:
            break
        if mtry and mtry < p:
            keys = omega_uniforms(np.uint64(omega), p, offset=depth * p)
            feats = np.sort(np.argsort(keys, kind="stable")[:mtry])
        else:
            feats = range(p)
        sse = float(((yc - yc.mean()) ** 2).sum())
        best_gain, best = -np.inf, None
        for j in feats:
            g, z = _best_split(X[idx, j], yc)
            if g > best_gain:
                best_gain, best = g, (j, z)
        if best is None or not best_gain > 1e-12 * sse:
            break
        j, z = best
        go_left = x0[j] < z
        mask = (X[idx, j] < z) == go_left
        idx = idx[mask]
        depth += 1
    value = float(y[idx].sum() / idx.size)
    if return_leaf:
        return value, idx
    return value


def _cart_batch(spec, X, y, omega):
    out = np.empty(X.shape[0])
    om = np.zeros(X.shape[0], dtype=np.uint64) if omega is None else omega
    for b in range(X.shape[0]):
        out[b] = cart_path_predict(X[b], y[b], spec.target_x, spec.k, spec.mtry, om[b])
    return out


_BATCH = {
    "mean": _mean_batch,
    "variance": _variance_batch,
    "ols": _ols_batch,
    "knn": _knn_batch,
    "random_k": _random_k_batch,
    "rp_tree": _rp_tree_batch,
    "cart": _cart_batch,
}


class Kernel:
    """Callable base learner built from a :class:`KernelSpec`.

    ``batch`` evaluates many canonical-order subsamples at once and returns
    NaN where the kernel is undefined (a singular OLS design); ``__call__``
    evaluates one subsample and raises instead.
    """

    def __init__(self, spec: KernelSpec):
        self.spec = spec
        self._fn = _BATCH[spec.kind]

    @property
    def uses_omega(self) -> bool:
        return self.spec.uses_omega

    @property
    def name(self) -> str:
        return self.spec.kind

    def check(self, s: int, p: int) -> None:
        self.spec.check(s, p)

    def batch(self, X, y, omega=None, info: dict | None = None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if omega is None:
            omega = np.zeros(X.shape[0], dtype=np.uint64)
        if self.spec.kind == "rp_tree":
            return _rp_tree_batch(self.spec, X, y, omega, info)
        return self._fn(self.spec, X, y, omega)

    def __call__(self, X, y, omega=None, index=None) -> float:
        y = np.asarray(y, dtype=float).ravel()
        X = np.zeros((y.size, 1)) if X is None else np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        self.check(y.size, X.shape[1])
        order = canonical_order(X, y, index)
        om = np.array([0 if omega is None else int(omega)], dtype=np.uint64)
        v = self.batch(X[order][None], y[order][None], om)[0]
        if np.isnan(v):
            raise SingularDesign(
                f"X^T X condition number exceeds {COND_THRESHOLD:g}")
        return float(v)

    def __repr__(self):
        return f"Kernel({self.spec!r})"


class FunctionKernel(Kernel):
    """Wrap a Python function ``fn(X, y[, omega]) -> float`` as a kernel.

    The function sees one canonical-order subsample at a time. It is the
    caller's job to make it symmetric.
    """

    def __init__(self, fn: Callable, uses_omega: bool = False, name: str = "custom",
                 min_s: int = 1):
        self.fn = fn
        self._uses_omega = uses_omega
        self._name = name
        self._min_s = min_s
        self.spec = None

    @property
    def uses_omega(self) -> bool:
        return self._uses_omega

    @property
    def name(self) -> str:
        return self._name

    def check(self, s: int, p: int) -> None:
        if s < self._min_s:
            raise InvalidArgs(f"{self._name} kernel needs s >= {self._min_s}")

    def batch(self, X, y, omega=None, info=None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.empty(X.shape[0])
        for b in range(X.shape[0]):
            if self._uses_omega:
                out[b] = self.fn(X[b], y[b], None if omega is None else int(omega[b]))
            else:
                out[b] = self.fn(X[b], y[b])
        return out


def make_kernel(spec) -> Kernel:
    """Build a kernel from a spec, a dict, a JSON string, or pass one through."""
    if isinstance(spec, Kernel):
        return spec
    if isinstance(spec, str):
        spec = KernelSpec.from_json(spec) if spec.lstrip().startswith("{") else KernelSpec(spec)
    elif isinstance(spec, dict):
        spec = KernelSpec.from_dict(spec)
    if not isinstance(spec, KernelSpec):
        raise InvalidArgs(f"cannot build a kernel from {spec!r}")
    return Kernel(spec)


# ---------------------------------------------------------------------------
# Scalar entry points
# ---------------------------------------------------------------------------


def mean_kernel(y: Sequence[float]) -> float:
    """Arithmetic mean of the responses."""
    return make_kernel(KernelSpec("mean"))(None, y)


def variance_kernel(y: Sequence[float]) -> float:
    """Average squared pairwise difference of the responses.

    Equals twice the usual unbiased sample variance.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size < 2:
        raise InvalidArgs("variance kernel needs s >= 2")
    return make_kernel(KernelSpec("variance"))(None, y)


def ols_kernel(X, y, target_x) -> float:
    """Least-squares prediction at ``target_x`` (no intercept added)."""
    return make_kernel(KernelSpec("ols", target_x=target_x))(X, y)


def knn_kernel(X, y, target_x, k: int, index=None) -> float:
    """Mean response of the ``k`` nearest points; ties go to the smaller row index."""
    y = np.asarray(y, dtype=float).ravel()
    if k > y.size:
        raise InvalidArgs(f"k={k} exceeds s={y.size}")
    if index is None:
        index = np.arange(y.size)
    return make_kernel(KernelSpec("knn", k=k, target_x=target_x))(X, y, index=index)


def rp_tree_kernel(X, y, target_x, k: int, omega: int, index=None) -> float:
    """Average of min(k, |Ξ|) k-PNNs drawn without replacement from the ω stream."""
    return make_kernel(KernelSpec("rp_tree", k=k, target_x=target_x))(X, y, omega, index)


def cart_tree_kernel(X, y, target_x, k: int, mtry: int = 0, omega: int = 0,
                     index=None) -> float:
    """CART leaf mean at ``target_x``; see :func:`cart_path_predict`."""
    return make_kernel(KernelSpec("cart", k=k, mtry=mtry, target_x=target_x))(
        X, y, omega, index)


def random_k_kernel(y, k: int, omega: int, index=None) -> float:
    """Mean of ``k`` responses chosen uniformly without replacement by ω."""
    return make_kernel(KernelSpec("random_k", k=k))(None, y, omega, index)


def compute_kpnn(X, target_x, k: int) -> PnnSet:
    """Positions whose closed box with ``target_x`` holds fewer than ``k`` other points."""
    if k < 1:
        raise InvalidArgs("k must be >= 1")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    x0 = np.atleast_1d(np.asarray(target_x, dtype=float))
    if x0.size != X.shape[1]:
        raise InvalidArgs("target_x length must match the covariate dimension")
    counts = blocking_counts(X[None], x0)[0]
    members = np.nonzero(counts < k)[0]
    return PnnSet(members, counts[members])
