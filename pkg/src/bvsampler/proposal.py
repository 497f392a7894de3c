"""Per-variable add/delete proposal over inclusion vectors.

Given a model indicator ``gamma``, each excluded variable j is proposed
for addition independently with probability ``add[j]`` and each included
variable for deletion with probability ``delete[j]``.  The proposal is a
product of p Bernoulli draws, so its density ratio for the reverse move
reduces to a sum over the coordinates that actually flipped; everything
else cancels.

Probabilities are kept inside [epsilon, 1 - epsilon].  The adaptation
module moves them on an open-interval logit scale, so the parameter
object carries both the probabilities and their transformed values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

__all__ = [
    "ProposalParams",
    "FlipRecord",
    "sample_proposal",
    "log_proposal_ratio",
    "acceptance_probability",
    "acceptance_pair",
    "mutation_indicator",
    "logit_interval",
    "inv_logit_interval",
]


def logit_interval(x: np.ndarray, epsilon: float) -> np.ndarray:
    """Log odds of x rescaled from (epsilon, 1 - epsilon) to (0, 1)."""
    x = np.asarray(x, dtype=float)
    return np.log(x - epsilon) - np.log(1.0 - x - epsilon)


def inv_logit_interval(ell: np.ndarray, epsilon: float) -> np.ndarray:
    """Inverse of :func:`logit_interval`; saturates at the interval ends
    once |ell| exceeds the precision of ``expit``."""
    from scipy.special import expit

    return epsilon + (1.0 - 2.0 * epsilon) * expit(ell)


@dataclass
class ProposalParams:
    """State of the add/delete proposal.

    Parameters
    ----------
    add, delete : ndarray, shape (p,)
        Per-variable flip probabilities for excluded/included variables.
    epsilon : float
        Clamping margin; probabilities live in [epsilon, 1 - epsilon].
        Zero is allowed for fixed (non-adapted) proposals.
    logit_add, logit_delete : ndarray, optional
        Interval-logit images of ``add``/``delete``.  Derived when not
        given.  Adaptation treats these as the primary state, so the
        probability arrays saturate gracefully instead of leaving the
        interval.
    """

    add: np.ndarray
    delete: np.ndarray
    epsilon: float
    logit_add: np.ndarray = field(default=None, repr=False)
    logit_delete: np.ndarray = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.add = np.array(self.add, dtype=float)
        self.delete = np.array(self.delete, dtype=float)
        if self.add.ndim != 1 or self.add.shape != self.delete.shape:
            raise ConfigError("add and delete must be equal-length vectors")
        if not 0.0 <= self.epsilon < 0.5:
            raise ConfigError(f"epsilon must be in [0, 0.5), got {self.epsilon}")
        eps = self.epsilon
        for name, v in (("add", self.add), ("delete", self.delete)):
            if not np.all((v > 0.0) & (v < 1.0)):
                raise ConfigError(f"{name} probabilities must lie strictly inside (0, 1)")
            if np.any(v < eps) or np.any(v > 1.0 - eps):
                raise ConfigError(f"{name} probabilities must lie inside [{eps}, {1 - eps}]")
        if self.logit_add is None:
            self.logit_add = logit_interval(self.add, eps)
        if self.logit_delete is None:
            self.logit_delete = logit_interval(self.delete, eps)

    @property
    def p(self) -> int:
        return self.add.shape[0]

    def copy(self) -> "ProposalParams":
        return ProposalParams(
            self.add.copy(),
            self.delete.copy(),
            self.epsilon,
            self.logit_add.copy(),
            self.logit_delete.copy(),
        )

    @classmethod
    def constant(cls, p: int, add: float, delete: float, epsilon: float = 0.0) -> "ProposalParams":
        """Uniform probabilities across variables; handy in tests."""
        return cls(np.full(p, float(add)), np.full(p, float(delete)), epsilon)


@dataclass(frozen=True)
class FlipRecord:
    """Coordinates proposed to change in one step."""

    add_idx: np.ndarray
    del_idx: np.ndarray

    @property
    def n_flips(self) -> int:
        return self.add_idx.size + self.del_idx.size

    def reverse(self) -> "FlipRecord":
        return FlipRecord(self.del_idx, self.add_idx)


def sample_proposal(
    gamma: np.ndarray, params: ProposalParams, rng: np.random.Generator
) -> tuple[np.ndarray, FlipRecord]:
    """Draw one product-Bernoulli flip proposal.

    Consumes exactly one length-p uniform vector from ``rng``.

    Returns
    -------
    gamma_new : ndarray of bool
        Proposed model (a fresh array; the input is not modified).
    flips : FlipRecord
    """
    thresh = np.where(gamma, params.delete, params.add)
    flip = rng.random(gamma.shape[0]) < thresh
    idx = np.flatnonzero(flip)
    sel = gamma[idx]
    return gamma ^ flip, FlipRecord(idx[~sel], idx[sel])


def log_proposal_ratio(flips: FlipRecord, params: ProposalParams) -> float:
    """log q(gamma' -> gamma) - log q(gamma -> gamma').

    Only flipped coordinates survive: an added variable contributes
    log(delete_j / add_j) and a deleted one log(add_j / delete_j).
    """
    out = 0.0
    if flips.add_idx.size:
        out += float(
            np.log(params.delete[flips.add_idx]).sum() - np.log(params.add[flips.add_idx]).sum()
        )
    if flips.del_idx.size:
        out += float(
            np.log(params.add[flips.del_idx]).sum() - np.log(params.delete[flips.del_idx]).sum()
        )
    return out


def acceptance_pair(
    log_kernel_cur: float, log_kernel_prop: float, flips: FlipRecord, params: ProposalParams
) -> tuple[float, float]:
    """Forward and reverse acceptance probabilities of one proposal.

    The reverse value is the probability with which the chain would
    accept the move back from the proposed model under the same
    parameters; it is exp(-r) clipped at 1 when the forward log ratio
    is r.  No extra posterior evaluation is needed.
    """
    total = log_kernel_prop - log_kernel_cur + log_proposal_ratio(flips, params)
    if total >= 0.0:
        return 1.0, float(np.exp(-total))
    return float(np.exp(total)), 1.0


def acceptance_probability(
    log_kernel_cur: float, log_kernel_prop: float, flips: FlipRecord, params: ProposalParams
) -> float:
    """Metropolis-Hastings acceptance probability of the forward move."""
    return acceptance_pair(log_kernel_cur, log_kernel_prop, flips, params)[0]


def mutation_indicator(flips: FlipRecord) -> int:
    """1 when the proposal differs from the current model, else 0."""
    return int(flips.n_flips > 0)
