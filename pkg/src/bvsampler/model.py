"""Posterior kernel for Bayesian variable selection in linear regression.

The sampled state is a binary inclusion vector ``gamma`` of length p.
Regression coefficients, the intercept, and the error variance are
integrated out analytically under a conjugate normal-inverse-gamma
setup, leaving a marginal likelihood per model that only involves the
selected columns.  Two coefficient priors are supported (independent
ridge and Zellner's g-prior) together with fixed or beta-distributed
prior inclusion probabilities.

All data are mean centered at load time, which is what removes the
intercept from the marginal likelihood.  ``ModelPosterior`` bundles the
data, the prior, and an LRU cache of marginal likelihood values keyed
by the packed inclusion bits.
"""

from __future__ import annotations

import csv
import hashlib
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import betaln

from .errors import ConfigError, DataError, NumericalError, RankDeficientError

__all__ = [
    "RidgePrior",
    "GPrior",
    "FixedInclusion",
    "BetaInclusion",
    "PriorSpec",
    "Dataset",
    "ModelPosterior",
    "log_model_prior",
    "log_marginal_likelihood",
    "log_posterior_kernel",
]

# Diagonal jitter fraction applied once if the Cholesky factorization of
# the posterior precision fails under the ridge prior.
_JITTER_SCALE = 1e-10


@dataclass(frozen=True)
class RidgePrior:
    """Independent coefficient prior, covariance g * I on the selected block."""

    g: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.g) or self.g <= 0:
            raise ConfigError(f"ridge prior needs g > 0, got {self.g}")


@dataclass(frozen=True)
class GPrior:
    """Zellner prior, covariance g * (X_sel' X_sel)^-1 on the selected block."""

    g: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.g) or self.g <= 0:
            raise ConfigError(f"g-prior needs g > 0, got {self.g}")


@dataclass(frozen=True)
class FixedInclusion:
    """Independent Bernoulli(h) prior on each inclusion bit."""

    h: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.h) or not 0.0 < self.h < 1.0:
            raise ConfigError(f"inclusion probability must be in (0, 1), got {self.h}")

    @property
    def mean(self) -> float:
        return self.h


@dataclass(frozen=True)
class BetaInclusion:
    """Bernoulli inclusions with a shared Beta(a, b) hyperprior on h."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.a <= 0 or self.b <= 0:
            raise ConfigError(f"beta hyperprior needs a, b > 0, got ({self.a}, {self.b})")

    @property
    def mean(self) -> float:
        return self.a / (self.a + self.b)


@dataclass(frozen=True)
class PriorSpec:
    """Pairing of a coefficient prior and an inclusion prior."""

    coef: RidgePrior | GPrior
    inclusion: FixedInclusion | BetaInclusion

    @property
    def mean_inclusion(self) -> float:
        """Prior mean of each inclusion bit; used to initialize proposals."""
        return self.inclusion.mean


def log_prior_size_table(prior: PriorSpec, p: int) -> np.ndarray:
    """Log prior mass of a model as a function of its size.

    Both supported inclusion priors depend on ``gamma`` only through the
    number of active bits, so the per-model log prior is a length p+1
    lookup table.

    Parameters
    ----------
    prior : PriorSpec
    p : int
        Total number of candidate variables.

    Returns
    -------
    ndarray, shape (p + 1,)
        Entry k is the log prior probability of any specific model with
        exactly k variables.
    """
    if p < 1:
        raise ConfigError(f"need p >= 1, got {p}")
    k = np.arange(p + 1, dtype=float)
    incl = prior.inclusion
    if isinstance(incl, FixedInclusion):
        return k * np.log(incl.h) + (p - k) * np.log1p(-incl.h)
    return betaln(incl.a + k, incl.b + p - k) - betaln(incl.a, incl.b)


def log_model_prior(gamma: np.ndarray, prior: PriorSpec, p: int | None = None) -> float:
    """Log prior probability of one model indicator vector."""
    gamma = np.asarray(gamma)
    if p is None:
        p = gamma.shape[0]
    elif p != gamma.shape[0]:
        raise ConfigError(f"indicator length {gamma.shape[0]} does not match p={p}")
    size = int(np.count_nonzero(gamma))
    return float(log_prior_size_table(prior, p)[size])


class Dataset:
    """Centered regression data.

    Parameters
    ----------
    y : array_like, shape (n,)
        Response vector.  Centered in place of an explicit intercept.
    X : array_like, shape (n, p)
        Candidate design matrix.  Each column is mean centered; with
        ``standardize`` the columns are also scaled to unit sample
        standard deviation.
    names : sequence of str, optional
        Column names; defaults to x1..xp.
    standardize : bool
        Rescale columns to unit standard deviation (ddof=1).
    """

    def __init__(self, y, X, names=None, *, standardize: bool = False):
        y = np.asarray(y, dtype=float).ravel()
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[0] != y.shape[0]:
            raise DataError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        n, p = X.shape
        if n < 3:
            raise DataError(f"need at least 3 observations, got {n}")
        if p < 1:
            raise DataError("need at least one candidate variable")
        if not np.all(np.isfinite(y)):
            raise DataError("response contains non-finite values")
        if not np.all(np.isfinite(X)):
            raise DataError("design matrix contains non-finite values")

        y = y - y.mean()
        if float(y @ y) <= 0.0:
            raise DataError("response is constant; nothing to regress")
        X = X - X.mean(axis=0)
        if standardize:
            sd = X.std(axis=0, ddof=1)
            dead = np.flatnonzero(sd == 0.0)
            if dead.size:
                raise DataError(f"cannot standardize zero-variance column(s) {dead.tolist()}")
            X = X / sd

        if names is None:
            names = [f"x{j + 1}" for j in range(p)]
        else:
            names = [str(s) for s in names]
            if len(names) != p:
                raise DataError(f"{len(names)} names for {p} columns")

        self.y = y
        self.X = np.ascontiguousarray(X)
        self.names = names
        self.standardized = bool(standardize)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_csv(cls, path, response, *, standardize: bool = False) -> "Dataset":
        """Load a header CSV, splitting off one column as the response.

        ``response`` is matched against the header first; if no header
        matches and it parses as an integer it is used as a 0-based
        column index.  Any missing or non-numeric cell is an error.
        """
        path = Path(path)
        if not path.is_file():
            raise DataError(f"data file not found: {path}")
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            header = [h.strip() for h in header]
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(header):
                    raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
                vals = []
                for col, cell in zip(header, row):
                    cell = cell.strip()
                    if not cell:
                        raise DataError(f"{path}:{lineno}: missing value in column '{col}'")
                    try:
                        vals.append(float(cell))
                    except ValueError:
                        raise DataError(f"{path}:{lineno}: non-numeric value '{cell}' in column '{col}'") from None
                rows.append(vals)
        if not rows:
            raise DataError(f"{path}: no data rows")

        resp = str(response).strip()
        if resp in header:
            ycol = header.index(resp)
        else:
            try:
                ycol = int(resp)
            except ValueError:
                raise DataError(f"response '{response}' not in header {header}") from None
            if not 0 <= ycol < len(header):
                raise DataError(f"response index {ycol} out of range for {len(header)} columns")
        data = np.asarray(rows, dtype=float)
        y = data[:, ycol]
        X = np.delete(data, ycol, axis=1)
        names = [h for i, h in enumerate(header) if i != ycol]
        return cls(y, X, names, standardize=standardize)


class ModelPosterior:
    """Cached evaluator of the log posterior kernel over models.

    The marginal likelihood is the expensive, temperature-free part, so
    only it is cached; the model prior is a table lookup by size.  Keys
    are the packed indicator bits for p <= 128 and a 128-bit BLAKE2b
    digest of the packed bits beyond that.

    Parameters
    ----------
    data : Dataset
    prior : PriorSpec
    max_cache_entries : int
        LRU capacity of the marginal likelihood cache.
    """

    # Precompute the full Gram matrix only when it stays small.
    _GRAM_LIMIT = 512

    def __init__(self, data: Dataset, prior: PriorSpec, *, max_cache_entries: int = 1 << 20):
        if max_cache_entries < 1:
            raise ConfigError("cache needs at least one entry")
        self.data = data
        self.prior = prior
        self.max_cache_entries = int(max_cache_entries)
        self._X = data.X
        self._y = data.y
        self._yty = float(data.y @ data.y)
        self._Xty = data.X.T @ data.y
        self._gram = data.X.T @ data.X if data.p <= self._GRAM_LIMIT else None
        self.log_prior_size = log_prior_size_table(prior, data.p)
        self._hash_keys = data.p > 128
        self._cache: OrderedDict[bytes, float] = OrderedDict()
        self.hits = 0
        self.misses = 0

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def p(self) -> int:
        return self.data.p

    def _key(self, gamma: np.ndarray) -> bytes:
        packed = np.packbits(gamma).tobytes()
        if self._hash_keys:
            return hashlib.blake2b(packed, digest_size=16).digest()
        return packed

    def _marginal(self, idx: np.ndarray) -> float:
        k = idx.size
        n = self.data.n
        if k == 0:
            return -0.5 * (n - 1) * np.log(self._yty)
        z = self._Xty[idx]
        if self._gram is not None:
            G = self._gram[np.ix_(idx, idx)]
        else:
            Xs = self._X[:, idx]
            G = Xs.T @ Xs
        coef = self.prior.coef
        if isinstance(coef, GPrior):
            try:
                L = np.linalg.cholesky(G)
            except np.linalg.LinAlgError:
                raise RankDeficientError(
                    f"X'X singular for a model of size {k}; the g-prior needs full column rank"
                ) from None
            w = solve_triangular(L, z, lower=True, check_finite=False)
            s = self._yty - (w @ w) * (coef.g / (1.0 + coef.g))
            if s <= 0.0:
                raise NumericalError(f"nonpositive residual sum {s} for a model of size {k}")
            return -0.5 * k * np.log1p(coef.g) - 0.5 * (n - 1) * np.log(s)
        # ridge: precision is G + I/g, always well posed up to roundoff
        lam = G + (1.0 / coef.g) * np.eye(k)
        try:
            L = np.linalg.cholesky(lam)
        except np.linalg.LinAlgError:
            lam[np.diag_indices_from(lam)] += _JITTER_SCALE * np.trace(lam) / k
            try:
                L = np.linalg.cholesky(lam)
            except np.linalg.LinAlgError:
                raise NumericalError(
                    f"posterior precision not positive definite for a model of size {k}"
                ) from None
        w = solve_triangular(L, z, lower=True, check_finite=False)
        s = self._yty - w @ w
        if s <= 0.0:
            raise NumericalError(f"nonpositive residual sum {s} for a model of size {k}")
        logdet_lam = 2.0 * np.log(np.diag(L)).sum()
        return -0.5 * k * np.log(coef.g) - 0.5 * logdet_lam - 0.5 * (n - 1) * np.log(s)

    def log_marginal(self, gamma: np.ndarray) -> float:
        """Cached log marginal likelihood of one model."""
        key = self._key(gamma)
        cache = self._cache
        val = cache.get(key)
        if val is not None:
            self.hits += 1
            cache.move_to_end(key)
            return val
        self.misses += 1
        val = float(self._marginal(np.flatnonzero(gamma)))
        cache[key] = val
        if len(cache) > self.max_cache_entries:
            cache.popitem(last=False)
        return val

    def log_prior(self, gamma: np.ndarray) -> float:
        return float(self.log_prior_size[int(np.count_nonzero(gamma))])

    def log_parts(self, gamma: np.ndarray, size: int | None = None) -> tuple[float, float]:
        """(log marginal likelihood, log model prior) for one model."""
        if size is None:
            size = int(np.count_nonzero(gamma))
        return self.log_marginal(gamma), float(self.log_prior_size[size])

    def log_kernel(self, gamma: np.ndarray) -> float:
        """Unnormalized log posterior mass of one model."""
        ml, pr = self.log_parts(gamma)
        return ml + pr

    @property
    def cache_entries(self) -> int:
        return len(self._cache)

    def cache_info(self) -> dict:
        return {
            "entries": len(self._cache),
            "capacity": self.max_cache_entries,
            "hits": self.hits,
            "misses": self.misses,
        }


def log_marginal_likelihood(gamma: np.ndarray, data: Dataset, prior: PriorSpec) -> float:
    """Uncached log marginal likelihood; convenience wrapper for tests
    and one-off evaluations."""
    return ModelPosterior(data, prior, max_cache_entries=1).log_marginal(np.asarray(gamma))


def log_posterior_kernel(gamma: np.ndarray, posterior: ModelPosterior) -> float:
    """Log posterior kernel through a shared cached evaluator."""
    return posterior.log_kernel(np.asarray(gamma))
