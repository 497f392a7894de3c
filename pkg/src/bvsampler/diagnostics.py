"""Posterior summaries, mixing diagnostics, and the exact enumeration
oracle for small model spaces."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import TooManyVariablesError
from .model import Dataset, ModelPosterior, PriorSpec
from .proposal import ProposalParams

__all__ = [
    "PosteriorSummary",
    "GoldStandard",
    "EnumerationResult",
    "EssResult",
    "estimate_pips",
    "mutation_rate",
    "ess",
    "wmse",
    "enumerate_posterior",
    "ad_ratio_report",
    "log_odds_correlation",
]


@dataclass
class PosteriorSummary:
    """Monte Carlo summary of a sampled model trace."""

    pips: np.ndarray
    mean_size: float
    n_samples: int
    top_models: list = field(default_factory=list)


@dataclass(frozen=True)
class GoldStandard:
    """Reference inclusion probabilities and where they came from."""

    pips: np.ndarray
    source: str = "enumeration"


def estimate_pips(trace: np.ndarray, burnin: int = 0, *, top_k: int = 13) -> PosteriorSummary:
    """Inclusion frequencies of a (T, p) indicator trace after burn-in.

    Parameters
    ----------
    trace : array_like of 0/1, shape (T, p)
    burnin : int
        Leading rows to discard.
    top_k : int
        Number of most-visited models to keep in the summary.
    """
    trace = np.atleast_2d(np.asarray(trace))
    if burnin < 0:
        raise ValueError(f"burnin must be nonnegative, got {burnin}")
    kept = trace[burnin:]
    if kept.shape[0] == 0:
        raise ValueError(f"no samples left after burn-in {burnin} of {trace.shape[0]}")
    kept = kept.astype(bool)
    pips = kept.mean(axis=0)
    sizes = kept.sum(axis=1)
    packed = np.packbits(kept, axis=1)
    uniq, counts = np.unique(packed, axis=0, return_counts=True)
    order = np.argsort(counts)[::-1][:top_k]
    top = []
    for i in order:
        bits = np.unpackbits(uniq[i])[: kept.shape[1]].astype(bool)
        top.append((tuple(np.flatnonzero(bits).tolist()), counts[i] / kept.shape[0]))
    return PosteriorSummary(pips, float(sizes.mean()), kept.shape[0], top)


def mutation_rate(records, burnin: int = 0, *, method: str = "realized") -> float:
    """Average mutation rate of a run.

    ``records`` is anything exposing ``mutated`` (proposal changed the
    model), ``accepted``, and ``a_fwd`` arrays, e.g. a sampler trace.
    The realized estimator counts accepted model changes; the
    Rao-Blackwellized one averages mutated * acceptance probability and
    has lower variance at the same expectation.
    """
    mutated = np.asarray(records.mutated, dtype=float)[burnin:]
    if mutated.size == 0:
        raise ValueError("no steps left after burn-in")
    if method == "realized":
        accepted = np.asarray(records.accepted, dtype=float)[burnin:]
        return float((mutated * accepted).mean())
    if method == "rao_blackwell":
        a_fwd = np.asarray(records.a_fwd, dtype=float)[burnin:]
        return float((mutated * a_fwd).mean())
    raise ValueError(f"unknown method '{method}'")


class EssResult(float):
    """Effective sample size; also carries the estimated integrated
    autocorrelation time and a degeneracy flag."""

    iact: float
    degenerate: bool

    def __new__(cls, value: float, iact: float, degenerate: bool = False):
        obj = super().__new__(cls, value)
        obj.iact = iact
        obj.degenerate = degenerate
        return obj


def ess(series, max_lag: int | None = None) -> EssResult:
    """Effective sample size by the initial-positive-sequence rule.

    Autocorrelations are computed by FFT and folded into consecutive
    pair sums; summation stops at the first nonpositive pair.  A series
    with zero variance returns 0 flagged degenerate instead of raising.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n < 10:
        raise ValueError(f"need at least 10 points for an ESS estimate, got {n}")
    if np.all(x == x[0]):
        return EssResult(0.0, np.inf, True)
    x = x - x.mean()
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f))[:n]
    rho = acov / acov[0]
    if max_lag is not None:
        rho = rho[: max_lag + 1]
    even = rho[0::2]
    odd = rho[1::2]
    m = min(even.size, odd.size)
    pair = even[:m] + odd[:m]
    if even.size > m:
        pair = np.append(pair, even[m])
    nonpos = np.flatnonzero(pair <= 0.0)
    stop = int(nonpos[0]) if nonpos.size else pair.size
    iact = 2.0 * float(pair[:stop].sum()) - 1.0
    iact = max(iact, 1e-12)
    return EssResult(n / iact, iact, False)


def wmse(estimates: np.ndarray, gold: GoldStandard) -> float:
    """Inclusion-weighted squared error of replicate PIP estimates.

    Computes sum_i sum_j w_j (theta_hat_ij - theta*_j)^2 with weights
    proportional to the gold PIPs and normalized to one, summed over
    the M replicate rows.
    """
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    star = np.asarray(gold.pips, dtype=float)
    if est.shape[1] != star.shape[0]:
        raise ValueError(f"estimates have {est.shape[1]} columns, gold has {star.shape[0]}")
    total = star.sum()
    if total <= 0.0:
        raise ValueError("gold-standard PIPs are all zero; weights undefined")
    w = star / total
    return float(((est - star) ** 2 * w).sum())


@dataclass
class EnumerationResult:
    """Exact posterior over all 2^p models."""

    pips: np.ndarray
    log_probs: np.ndarray
    log_normalizer: float
    mean_size: float
    p: int

    def gold(self) -> GoldStandard:
        return GoldStandard(self.pips, source="enumeration")

    def top_models(self, k: int = 13) -> list:
        order = np.argsort(self.log_probs)[::-1][:k]
        out = []
        for mask in order:
            idx = tuple(j for j in range(self.p) if (int(mask) >> j) & 1)
            out.append((idx, float(np.exp(self.log_probs[mask]))))
        return out


def enumerate_posterior(
    data: Dataset, prior: PriorSpec, limit: int = 20, *, posterior: ModelPosterior | None = None
) -> EnumerationResult:
    """Exact model posterior by exhaustive enumeration.

    Walks all 2^p models in Gray-code order (one bit flip per step) and
    normalizes with logsumexp.  Refuses to run beyond ``limit``
    variables.  An existing ``ModelPosterior`` can be passed to share
    its cache.
    """
    p = data.p
    if p > limit:
        raise TooManyVariablesError(
            f"enumeration over {p} variables exceeds the limit of {limit} (2^{p} models)"
        )
    post = posterior if posterior is not None else ModelPosterior(data, prior)
    n_models = 1 << p
    log_kernel = np.empty(n_models)
    gamma = np.zeros(p, dtype=bool)
    size = 0
    ml, pr = post.log_parts(gamma, 0)
    log_kernel[0] = ml + pr
    for i in range(1, n_models):
        bit = (i & -i).bit_length() - 1
        gamma[bit] = not gamma[bit]
        size += 1 if gamma[bit] else -1
        ml, pr = post.log_parts(gamma, size)
        log_kernel[i ^ (i >> 1)] = ml + pr
    log_z = float(logsumexp(log_kernel))
    log_probs = log_kernel - log_z
    probs = np.exp(log_probs)
    masks = np.arange(n_models, dtype=np.uint32)
    pips = np.empty(p)
    for j in range(p):
        pips[j] = probs[(masks >> j) & 1 == 1].sum()
    sizes = np.zeros(n_models, dtype=np.int64)
    for j in range(p):
        sizes += (masks >> j) & 1
    mean_size = float((probs * sizes).sum())
    return EnumerationResult(pips, log_probs, log_z, mean_size, p)


def _odds_rows(params: ProposalParams, pips: np.ndarray, band: tuple[float, float]):
    pips = np.asarray(pips, dtype=float)
    keep = np.flatnonzero((pips > band[0]) & (pips < band[1]))
    log_prop = np.log(params.add[keep]) - np.log(params.delete[keep])
    log_post = np.log(pips[keep]) - np.log1p(-pips[keep])
    return keep, log_prop, log_post


def ad_ratio_report(
    params: ProposalParams, gold: GoldStandard, *, band: tuple[float, float] = (0.05, 0.95)
) -> dict:
    """Adapted add/delete odds against posterior inclusion odds.

    Restricted to variables whose gold PIP is inside ``band``, where the
    posterior odds are informative.  Returns columns: variable index,
    proposal odds A/D, posterior odds psi/(1-psi), and their log-scale
    gap.
    """
    keep, log_prop, log_post = _odds_rows(params, gold.pips, band)
    return {
        "variable": keep,
        "proposal_odds": np.exp(log_prop),
        "posterior_odds": np.exp(log_post),
        "log_gap": log_prop - log_post,
    }


def log_odds_correlation(
    params: ProposalParams, pips: np.ndarray, *, band: tuple[float, float] = (0.05, 0.95)
) -> float:
    """Pearson correlation between log(A/D) and the posterior log odds
    over the variables inside ``band``; NaN when fewer than two qualify."""
    _, log_prop, log_post = _odds_rows(params, pips, band)
    if log_prop.size < 2:
        return float("nan")
    return float(np.corrcoef(log_prop, log_post)[0, 1])
