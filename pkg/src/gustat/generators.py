"""Data-generating distributions F_Z used for simulation and ζ estimation.

Each generator draws i.i.d. rows ``(x, y)``. ``draw(rng, shape)`` returns
covariates of shape ``(*shape, p)`` and responses of shape ``shape`` so that a
batch of ``B`` subsamples of size ``s`` is one call with ``shape=(B, s)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset
from .exceptions import InvalidArgs


class Generator:
    """Base class; subclasses implement ``draw`` and expose ``p``."""

    p: int = 1
    family: str = ""

    def draw(self, rng: np.random.Generator, shape) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    # Population moments of the response, when known in closed form.
    def response_mean(self) -> float | None:
        return None

    def response_var(self) -> float | None:
        return None

    def response_central_moment(self, r: int) -> float | None:
        return None

    def response_abs_moment(self, r: float) -> float | None:
        """E|Y - E Y|^r when known in closed form."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError


def _normal_abs_moment(r: int) -> float:
    """E|Z|^r for a standard normal."""
    return 2 ** (r / 2) * math.gamma((r + 1) / 2) / math.sqrt(math.pi)


@dataclass(frozen=True)
class LinearGaussian(Generator):
    """y = x·β + σ ε with ε ~ N(0, 1).

    ``covariates`` is ``"normal"`` (i.i.d. N(0, 1) entries) or ``"uniform"``
    (i.i.d. U[0, 1] entries).
    """

    beta: tuple = (1.0,)
    sigma: float = 1.0
    covariates: str = "normal"
    family: str = field(default="LinearGaussian", init=False)

    def __post_init__(self):
        beta = tuple(float(b) for b in np.atleast_1d(self.beta))
        if not beta:
            raise InvalidArgs("beta must have at least one entry")
        object.__setattr__(self, "beta", beta)
        if not self.sigma >= 0:
            raise InvalidArgs("sigma must be >= 0")
        if self.covariates not in ("normal", "uniform"):
            raise InvalidArgs("covariates must be 'normal' or 'uniform'")

    @property
    def p(self) -> int:
        return len(self.beta)

    def draw(self, rng, shape):
        shape = tuple(np.atleast_1d(shape))
        if self.covariates == "normal":
            X = rng.standard_normal(shape + (self.p,))
        else:
            X = rng.random(shape + (self.p,))
        y = X @ np.asarray(self.beta)
        if self.sigma > 0:
            y = y + self.sigma * rng.standard_normal(shape)
        return X, y

    def response_mean(self):
        if self.covariates == "normal":
            return 0.0
        return 0.5 * sum(self.beta)

    def response_var(self):
        b2 = sum(b * b for b in self.beta)
        cov_var = 1.0 if self.covariates == "normal" else 1.0 / 12.0
        return self.sigma ** 2 + cov_var * b2

    def response_central_moment(self, r):
        # Gaussian only when covariates are normal.
        if self.covariates != "normal":
            return None
        if r % 2:
            return 0.0
        return self.response_var() ** (r / 2) * _normal_abs_moment(r)

    def response_abs_moment(self, r):
        if self.covariates != "normal":
            return None
        return self.response_var() ** (r / 2) * _normal_abs_moment(r)

    def to_dict(self):
        return {"family": self.family, "beta": list(self.beta), "sigma": self.sigma,
                "covariates": self.covariates}


@dataclass(frozen=True)
class OneMinusX(Generator):
    """x ~ U[0, 1], y = 1 - x + σ ε with ε ~ N(0, 1)."""

    sigma: float = 1.0
    family: str = field(default="OneMinusX", init=False)
    p = 1

    def __post_init__(self):
        if not self.sigma >= 0:
            raise InvalidArgs("sigma must be >= 0")

    def draw(self, rng, shape):
        shape = tuple(np.atleast_1d(shape))
        x = rng.random(shape)
        y = 1.0 - x
        if self.sigma > 0:
            y = y + self.sigma * rng.standard_normal(shape)
        return x[..., None], y

    def response_mean(self):
        return 0.5

    def response_var(self):
        return 1.0 / 12.0 + self.sigma ** 2

    def to_dict(self):
        return {"family": self.family, "sigma": self.sigma}


_BOX_RESPONSES = ("linear", "step", "constant")


@dataclass(frozen=True)
class UniformBox(Generator):
    """x ~ U[0, 1]^d, y = f(x) + σ ε.

    ``response`` picks f: ``linear`` (sum of coordinates), ``step``
    (indicator x_1 > 1/2) or ``constant`` (zero).
    """

    d: int = 1
    response: str = "linear"
    sigma: float = 1.0
    family: str = field(default="UniformBox", init=False)

    def __post_init__(self):
        if int(self.d) < 1:
            raise InvalidArgs("d must be >= 1")
        object.__setattr__(self, "d", int(self.d))
        if self.response not in _BOX_RESPONSES:
            raise InvalidArgs(f"response must be one of {_BOX_RESPONSES}")
        if not self.sigma >= 0:
            raise InvalidArgs("sigma must be >= 0")

    @property
    def p(self) -> int:
        return self.d

    def f(self, X):
        if self.response == "linear":
            return X.sum(axis=-1)
        if self.response == "step":
            return (X[..., 0] > 0.5).astype(float)
        return np.zeros(X.shape[:-1])

    def draw(self, rng, shape):
        shape = tuple(np.atleast_1d(shape))
        X = rng.random(shape + (self.d,))
        y = self.f(X)
        if self.sigma > 0:
            y = y + self.sigma * rng.standard_normal(shape)
        return X, y

    def response_mean(self):
        return {"linear": 0.5 * self.d, "step": 0.5, "constant": 0.0}[self.response]

    def response_var(self):
        fv = {"linear": self.d / 12.0, "step": 0.25, "constant": 0.0}[self.response]
        return fv + self.sigma ** 2

    def to_dict(self):
        return {"family": self.family, "d": self.d, "response": self.response,
                "sigma": self.sigma}


@dataclass(frozen=True)
class Discrete(Generator):
    """Finite-support distribution over rows ``(x_i, y_i)`` with probabilities."""

    support_x: tuple
    support_y: tuple
    probs: tuple
    family: str = field(default="Discrete", init=False)

    def __post_init__(self):
        sx = np.asarray(self.support_x, dtype=float)
        if sx.ndim == 1:
            sx = sx[:, None]
        sy = np.asarray(self.support_y, dtype=float).ravel()
        pr = np.asarray(self.probs, dtype=float).ravel()
        if not (sx.shape[0] == sy.size == pr.size) or pr.size == 0:
            raise InvalidArgs("support_x, support_y and probs must have equal length")
        if (pr < 0).any() or abs(pr.sum() - 1.0) > 1e-12:
            raise InvalidArgs("probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "support_x", tuple(map(tuple, sx)))
        object.__setattr__(self, "support_y", tuple(sy))
        object.__setattr__(self, "probs", tuple(pr))

    @property
    def p(self) -> int:
        return len(self.support_x[0])

    @property
    def m(self) -> int:
        return len(self.probs)

    @property
    def X_support(self) -> np.ndarray:
        return np.asarray(self.support_x)

    @property
    def y_support(self) -> np.ndarray:
        return np.asarray(self.support_y)

    @property
    def p_support(self) -> np.ndarray:
        return np.asarray(self.probs)

    def draw(self, rng, shape):
        shape = tuple(np.atleast_1d(shape))
        k = rng.choice(self.m, size=shape, p=self.p_support)
        return self.X_support[k], self.y_support[k]

    def response_mean(self):
        return float(np.dot(self.p_support, self.y_support))

    def response_var(self):
        return self.response_central_moment(2)

    def response_central_moment(self, r):
        c = self.y_support - self.response_mean()
        return float(np.dot(self.p_support, c ** r))

    def response_abs_moment(self, r):
        c = np.abs(self.y_support - self.response_mean())
        return float(np.dot(self.p_support, c ** r))

    def to_dict(self):
        return {"family": self.family, "support_x": [list(r) for r in self.support_x],
                "support_y": list(self.support_y), "probs": list(self.probs)}


def TwoPoint(values=(0.0, 1.0), probs=(0.5, 0.5)) -> Discrete:
    """Scalar two-point law; the covariate equals the response."""
    values = tuple(float(v) for v in values)
    if len(values) != 2 or len(tuple(probs)) != 2:
        raise InvalidArgs("TwoPoint needs exactly two values and two probabilities")
    return Discrete(tuple((v,) for v in values), values, tuple(probs))


@dataclass(frozen=True)
class Empirical(Generator):
    """Resample rows of a fixed dataset with replacement.

    Plug-in stand-in for F_Z when only data are available. Variance
    components computed from it describe the empirical distribution, so
    they are biased for the population quantities.
    """

    dataset: Dataset
    family: str = field(default="Empirical", init=False)

    @property
    def p(self) -> int:
        return self.dataset.p

    def draw(self, rng, shape):
        shape = tuple(np.atleast_1d(shape))
        k = rng.integers(0, self.dataset.n, size=shape)
        return self.dataset.X[k], self.dataset.y[k]

    def response_mean(self):
        return float(self.dataset.y.mean())

    def response_var(self):
        return float(self.dataset.y.var())

    def to_dict(self):
        return {"family": self.family, "n": self.dataset.n}


def generator_from_dict(d: dict) -> Generator:
    """Build a generator from its JSON form, e.g. ``{"family": "OneMinusX", "sigma": 1}``."""
    d = dict(d)
    family = str(d.pop("family", "")).lower()
    try:
        if family == "lineargaussian":
            return LinearGaussian(**d)
        if family == "oneminusx":
            return OneMinusX(**d)
        if family == "uniformbox":
            return UniformBox(**d)
        if family == "twopoint":
            return TwoPoint(**d)
        if family == "discrete":
            return Discrete(**d)
    except TypeError as exc:
        raise InvalidArgs(f"bad generator parameters: {exc}") from None
    raise InvalidArgs(f"unknown generator family {family!r}")


def parse_generator(spec) -> Generator:
    if isinstance(spec, Generator):
        return spec
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise InvalidArgs(f"bad generator JSON: {exc}") from None
    if not isinstance(spec, dict):
        raise InvalidArgs(f"cannot build a generator from {spec!r}")
    return generator_from_dict(spec)


def generate(generator, n: int, seed: int = 0) -> Dataset:
    """Draw an i.i.d. dataset of ``n`` rows; deterministic in ``seed``."""
    if int(n) < 1:
        raise InvalidArgs("n must be >= 1")
    gen = parse_generator(generator)
    rng = np.random.default_rng(int(seed))
    X, y = gen.draw(rng, (int(n),))
    return Dataset(X, y)
