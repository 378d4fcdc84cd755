import itertools
import math

import numpy as np
import pytest

import oracles
from gustat.core import derive_omega
from gustat.exceptions import InvalidArgs, SingularDesign
from gustat.learners import (KernelSpec, blocking_counts, cart_path_predict,
                             cart_tree_kernel, compute_kpnn, knn_kernel, make_kernel,
                             mean_kernel, ols_kernel, random_k_kernel, rp_tree_kernel,
                             variance_kernel)


# --- mean and variance ------------------------------------------------------

def test_mean_examples():
    assert mean_kernel([1, 2, 3]) == 2.0
    assert mean_kernel([4.5] * 7) == 4.5
    assert mean_kernel([3, 1, 2]) == mean_kernel([1, 2, 3])


def test_variance_examples():
    assert variance_kernel([0, 2]) == 4.0
    assert variance_kernel([5, 5, 5]) == 0.0
    assert variance_kernel([1, 2, 3]) == pytest.approx(2.0, rel=1e-15)
    with pytest.raises(InvalidArgs):
        variance_kernel([1.0])


@pytest.mark.parametrize("seed", range(5))
def test_variance_matches_pairwise_oracle(seed):
    y = np.random.default_rng(seed).standard_normal(9)
    assert variance_kernel(y) == pytest.approx(oracles.pairwise_variance(list(y)), rel=1e-12)


# --- OLS --------------------------------------------------------------------

def test_ols_examples():
    x = np.array([1.0, 2.0, 4.0])
    assert ols_kernel(x, 2 * x, [3.0]) == pytest.approx(6.0, rel=1e-12)
    X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0]])
    y = X[:, 0] + 2 * X[:, 1]
    assert ols_kernel(X, y, [1.0, 1.0]) == pytest.approx(3.0, rel=1e-12)


def test_ols_interpolates_square_design():
    X = np.array([[2.0, 1.0], [1.0, 3.0]])
    y = np.array([5.0, -1.0])
    beta = np.linalg.solve(X, y)
    assert ols_kernel(X, y, X[1]) == pytest.approx(y[1], rel=1e-12)
    assert ols_kernel(X, y, [1.0, 1.0]) == pytest.approx(beta.sum(), rel=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_ols_matches_lstsq(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((12, 3))
    y = rng.standard_normal(12)
    x0 = rng.standard_normal(3)
    beta = np.linalg.lstsq(X, y, rcond=None)[0]
    assert ols_kernel(X, y, x0) == pytest.approx(float(beta @ x0), rel=1e-9)


def test_ols_singular():
    X = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])
    with pytest.raises(SingularDesign):
        ols_kernel(X, np.ones(3), [1.0, 1.0])


# --- kNN --------------------------------------------------------------------

def test_knn_examples():
    assert knn_kernel(np.array([-1.0, 3.0]), np.array([10.0, 20.0]), [0.0], 1) == 10.0
    # equidistant: the smaller row index wins
    assert knn_kernel(np.array([1.0, -1.0]), np.array([7.0, 9.0]), [0.0], 1) == 7.0
    assert knn_kernel(np.array([1.0, -1.0]), np.array([7.0, 9.0]), [0.0], 1,
                      index=[5, 2]) == 9.0
    with pytest.raises(InvalidArgs):
        knn_kernel(np.zeros(2), np.zeros(2), [0.0], 3)


@pytest.mark.parametrize("s", [1, 2, 5, 17])
def test_knn_k_equals_s_is_mean(s):
    rng = np.random.default_rng(s)
    X, y = rng.random((s, 2)), rng.standard_normal(s)
    assert knn_kernel(X, y, [0.3, 0.3], s) == pytest.approx(mean_kernel(y), rel=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3, 6])
def test_knn_matches_oracle(k):
    rng = np.random.default_rng(k)
    X = rng.integers(0, 4, size=(15, 2)).astype(float)  # ties are common
    y = rng.standard_normal(15)
    x0 = [1.0, 2.0]
    assert knn_kernel(X, y, x0, k) == pytest.approx(
        oracles.knn_brute(X.tolist(), list(y), x0, k), rel=1e-12)


# --- k-PNN ------------------------------------------------------------------

def test_kpnn_example():
    x = np.array([-3.0, -1.0, 1.0, 2.0, 5.0])
    pnn = compute_kpnn(x, [0.0], 1)
    assert sorted(x[pnn.members]) == [-1.0, 1.0]
    assert list(pnn.blocking) == [0, 0]


def test_kpnn_all_when_k_large():
    X = np.random.default_rng(0).random((9, 2))
    assert len(compute_kpnn(X, [0.5, 0.5], 9)) == 9


@pytest.mark.parametrize("seed", range(6))
def test_kpnn_matches_oracle_and_monotone(seed):
    rng = np.random.default_rng(seed)
    d = 1 + seed % 3
    X = rng.integers(0, 5, size=(14, d)).astype(float)
    x0 = rng.integers(0, 5, size=d).astype(float)
    prev = set()
    for k in range(1, 15):
        got = set(compute_kpnn(X, x0, k).members.tolist())
        assert got == set(oracles.kpnn_brute(X.tolist(), x0.tolist(), k))
        assert prev <= got
        prev = got


def test_kpnn_boundary_blocks():
    # the point at 1 lies on the closed box of the point at 2
    pnn = compute_kpnn(np.array([1.0, 2.0]), [0.0], 1)
    assert pnn.members.tolist() == [0]


def test_kpnn_size_grows_with_log_s():
    rng = np.random.default_rng(2)
    means = []
    for s in (100, 400, 1600):
        reps = 500 if s < 1600 else 40
        X = rng.random((reps, s, 2))
        means.append(float((blocking_counts(X, [0.5, 0.5]) < 5).sum(axis=1).mean()))
    logs = [math.log(s) for s in (100, 400, 1600)]
    assert means[0] < means[1] < means[2]
    slopes = [(means[i + 1] - means[i]) / (logs[i + 1] - logs[i]) for i in range(2)]
    # linear in log s: successive slopes agree to within a factor of two
    assert 0.5 < slopes[1] / slopes[0] < 2.0


# --- RP tree ----------------------------------------------------------------

@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_rp_tree_full_pnn_set_ignores_omega(k):
    # one-sided data: the k-PNNs of 0 are exactly the k nearest points
    x = np.array([4.0, 1.0, 5.0, 2.0, 3.0])
    y = np.array([40.0, 10.0, 50.0, 20.0, 30.0])
    assert len(oracles.kpnn_brute([[v] for v in x], [0.0], k)) == k
    vals = {rp_tree_kernel(x, y, [0.0], k, omega=int(w)) for w in derive_omega(1, np.arange(30))}
    assert len(vals) == 1 and vals.pop() == pytest.approx(10.0 * (k + 1) / 2)


def test_rp_tree_k1_uniform_over_pnn():
    x = np.array([-3.0, -1.0, 1.0, 2.0, 5.0])
    y = np.array([10.0, 20.0, 30.0, 40.0, 50.0])
    om = derive_omega(9, np.arange(4000))
    vals = [rp_tree_kernel(x, y, [0.0], 1, omega=int(w)) for w in om]
    assert set(vals) == {20.0, 30.0}
    frac = np.mean(np.array(vals) == 20.0)
    assert abs(frac - 0.5) < 3 * 0.5 / math.sqrt(4000)


def test_rp_tree_short_pnn_flagged():
    spec = KernelSpec("rp_tree", k=4, target_x=(0.0,))
    X = np.array([[[-1.0], [1.0], [2.0], [3.0], [4.0]]])
    y = np.array([[1.0, 2.0, 3.0, 4.0, 5.0]])
    info = {}
    make_kernel(spec).batch(X, y, derive_omega(0, np.arange(1)), info)
    assert info["pnn_size_sum"] == 5
    info = {}
    spec = KernelSpec("rp_tree", k=6, target_x=(0.0,))
    out = make_kernel(spec).batch(X, y, derive_omega(0, np.arange(1)), info)
    assert info["pnn_short"] == 1
    assert out[0] == 3.0


# --- CART -------------------------------------------------------------------

def test_cart_constant_response():
    X = np.random.default_rng(0).random((10, 2))
    assert cart_tree_kernel(X, np.full(10, 2.5), [0.1, 0.9], 1) == 2.5


@pytest.mark.parametrize("target", [0.05, 0.3, 0.49, 0.51, 0.53, 0.77, 0.99])
def test_cart_step_recovery(target):
    x = np.linspace(0.02, 0.98, 25)
    y = (x > 0.5).astype(float)
    # the single split sits at the midpoint of the gap (0.50, 0.54)
    assert cart_tree_kernel(x, y, [target], 1) == float(target > 0.52)


def test_cart_mtry0_ignores_omega():
    rng = np.random.default_rng(4)
    X, y = rng.random((20, 3)), rng.standard_normal(20)
    vals = {cart_tree_kernel(X, y, [0.5, 0.5, 0.5], 2, omega=w) for w in range(10)}
    assert len(vals) == 1


@pytest.mark.parametrize("seed,k", [(s, k) for s in range(4) for k in (1, 2, 4)])
def test_cart_matches_oracle(seed, k):
    rng = np.random.default_rng(seed)
    X = rng.random((16, 2))
    y = np.sin(5 * X[:, 0]) + X[:, 1] + 0.1 * rng.standard_normal(16)
    x0 = rng.random(2)
    assert cart_tree_kernel(X, y, x0, k) == pytest.approx(
        oracles.cart_brute(X.tolist(), list(y), list(x0), k), rel=1e-12)


@pytest.mark.parametrize("seed,k", [(s, k) for s in range(5) for k in (1, 3)])
def test_cart_leaf_invariant(seed, k):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 3, size=(25, 2)).astype(float)
    y = rng.integers(0, 2, size=25).astype(float)
    for x0 in itertools.product([0.0, 1.0, 2.0], repeat=2):
        _, leaf = cart_path_predict(X, y, x0, k, return_leaf=True)
        assert leaf.size <= k or np.ptp(y[leaf]) == 0 or _no_improving_split(X[leaf], y[leaf])


def _no_improving_split(X, y):
    base = ((y - y.mean()) ** 2).sum()
    for j in range(X.shape[1]):
        for z in np.unique(X[:, j])[1:]:
            left, right = y[X[:, j] < z], y[X[:, j] >= z]
            sse = ((left - left.mean()) ** 2).sum() + ((right - right.mean()) ** 2).sum()
            if sse < base - 1e-12 * base:
                return False
    return True


def test_cart_mtry_uses_omega():
    rng = np.random.default_rng(1)
    X = rng.random((30, 4))
    y = X @ np.array([1.0, -2.0, 3.0, 0.5]) + 0.1 * rng.standard_normal(30)
    vals = {cart_tree_kernel(X, y, [0.5] * 4, 3, mtry=1, omega=int(w))
            for w in derive_omega(0, np.arange(30))}
    assert len(vals) > 1


# --- specs ------------------------------------------------------------------

def test_spec_roundtrip_and_validation():
    spec = KernelSpec.from_json('{"kind": "knn", "k": 3, "target_x": [0.5]}')
    assert KernelSpec.from_dict(spec.to_dict()) == spec
    assert not spec.uses_omega
    assert KernelSpec("rp_tree", target_x=(0.0,)).uses_omega
    assert KernelSpec("cart", mtry=1, target_x=(0.0,)).uses_omega
    assert not KernelSpec("cart", target_x=(0.0,)).uses_omega
    with pytest.raises(InvalidArgs):
        KernelSpec("knn")
    with pytest.raises(InvalidArgs):
        KernelSpec("mean", k=0)
    with pytest.raises(InvalidArgs):
        KernelSpec("bogus")
    with pytest.raises(InvalidArgs):
        KernelSpec.from_dict({"kind": "mean", "extra": 1})
    with pytest.raises(InvalidArgs):
        KernelSpec("cart", mtry=3, target_x=(0.0,)).check(5, 1)
    with pytest.raises(InvalidArgs):
        KernelSpec("knn", k=4, target_x=(0.0,)).check(3, 1)


# --- permutation symmetry (exhaustive for s <= 6) ---------------------------

SYMMETRY_SPECS = [
    KernelSpec("mean"),
    KernelSpec("variance"),
    KernelSpec("ols", target_x=(0.4, -0.2)),
    KernelSpec("knn", k=1, target_x=(0.5, 0.5)),
    KernelSpec("knn", k=2, target_x=(0.5, 0.5)),
    KernelSpec("cart", k=1, target_x=(0.3, 0.6)),
    KernelSpec("cart", k=2, mtry=1, target_x=(0.3, 0.6)),
    KernelSpec("rp_tree", k=2, target_x=(0.5, 0.5)),
    KernelSpec("random_k", k=2),
]


@pytest.mark.parametrize("spec", SYMMETRY_SPECS, ids=lambda s: f"{s.kind}-k{s.k}-m{s.mtry}")
@pytest.mark.parametrize("s", [2, 3, 4, 5, 6])
def test_permutation_symmetry(spec, s):
    rng = np.random.default_rng(s)
    X = rng.random((s, 2))
    y = rng.standard_normal(s)
    index = rng.choice(100, size=s, replace=False)
    kern = make_kernel(spec)
    omega = int(derive_omega(3, s))
    base_idx = kern(X, y, omega, index)
    base_val = kern(X, y, omega)
    for perm in itertools.permutations(range(s)):
        perm = list(perm)
        assert kern(X[perm], y[perm], omega, index[perm]) == base_idx
        assert kern(X[perm], y[perm], omega) == base_val


@pytest.mark.parametrize("s,k", [(20, 1), (50, 3), (200, 5)])
@pytest.mark.parametrize("ties", [False, True])
def test_kpnn_fast_2d_matches_dense(s, k, ties):
    from gustat.learners import _kpnn_members_2d
    rng = np.random.default_rng(s + k)
    if ties:
        X, x0 = rng.integers(0, 4, (100, s, 2)).astype(float), np.array([1.5, 2.0])
    else:
        X, x0 = rng.random((100, s, 2)), np.array([0.5, 0.5])
    np.testing.assert_array_equal(_kpnn_members_2d(X, x0, k), blocking_counts(X, x0) < k)
