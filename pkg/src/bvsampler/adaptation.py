"""Stochastic-approximation tuning of the add/delete proposal.

Each iteration nudges the flip probabilities of the coordinates that
were just proposed, moving their interval-logit images by a step of
size phi_0 * i^(-lam) times (acceptance - tau).  The plain update uses
only the forward acceptance probability; the accelerated variant also
feeds the reverse acceptance probability back into the opposite
parameter block, weighted by w.  With w = 0 the accelerated update is
the plain one, bit for bit.

Updates operate on the logit scale as the primary state, which keeps
every probability inside [epsilon, 1 - epsilon] by construction no
matter how far the optimizer drifts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InitOutOfRangeError
from .proposal import FlipRecord, ProposalParams, inv_logit_interval

__all__ = [
    "AdaptConfig",
    "AdaptCounter",
    "step_size",
    "init_proposal_params",
    "ia_update",
    "rapa_update",
    "apply_adaptation",
]


@dataclass(frozen=True)
class AdaptConfig:
    """Tuning constants of the proposal adaptation.

    Parameters
    ----------
    tau : float
        Target mutation rate in (0, 1).
    epsilon : float
        Clamping margin of the proposal probabilities.
    lam : float
        Step-size decay exponent, in (1/2, 1].
    phi0 : float
        Step-size scale.
    nu : float
        Expected number of flips proposed per iteration at
        initialization.
    w : float
        Weight of the reverse-acceptance feedback term, in [0, 1];
        0 disables it.
    """

    tau: float = 0.45
    epsilon: float = 1e-3
    lam: float = 0.6
    phi0: float = 1.0
    nu: float = 1.0
    w: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise ConfigError(f"tau must be in (0, 1), got {self.tau}")
        if not 0.0 < self.epsilon < 0.5:
            raise ConfigError(f"epsilon must be in (0, 0.5), got {self.epsilon}")
        if not 0.5 < self.lam <= 1.0:
            raise ConfigError(f"lam must be in (1/2, 1], got {self.lam}")
        if self.phi0 < 0.0:
            raise ConfigError(f"phi0 must be nonnegative, got {self.phi0}")
        if self.nu <= 0.0:
            raise ConfigError(f"nu must be positive, got {self.nu}")
        if not 0.0 <= self.w <= 1.0:
            raise ConfigError(f"w must be in [0, 1], got {self.w}")


@dataclass
class AdaptCounter:
    """Iteration index of the diminishing step-size schedule.

    Shared by all chains that share one proposal-parameter state; SMC
    resets it at the start of every tempering stage.
    """

    i: int = 0

    def advance(self) -> int:
        self.i += 1
        return self.i

    def reset(self) -> None:
        self.i = 0


def step_size(i: int, cfg: AdaptConfig) -> float:
    """phi_0 * i^(-lam) for iteration i >= 1."""
    if i < 1:
        raise ConfigError(f"step-size index starts at 1, got {i}")
    return cfg.phi0 * float(i) ** (-cfg.lam)


def init_proposal_params(p: int, h_effective: float, cfg: AdaptConfig) -> ProposalParams:
    """Starting proposal probabilities scaled for nu expected flips.

    Excluded variables start at nu / ((1 - h) p) and included ones at
    nu / (h p), where h is the prior mean inclusion probability, so a
    prior-typical model proposes about nu flips per iteration.

    Raises
    ------
    InitOutOfRangeError
        If either starting value falls outside (epsilon, 1 - epsilon);
        pick a different nu or epsilon in that case.
    """
    if p < 1:
        raise ConfigError(f"need p >= 1, got {p}")
    if not 0.0 < h_effective < 1.0:
        raise ConfigError(f"mean inclusion must be in (0, 1), got {h_effective}")
    a0 = cfg.nu / ((1.0 - h_effective) * p)
    d0 = cfg.nu / (h_effective * p)
    eps = cfg.epsilon
    for name, v in (("add", a0), ("delete", d0)):
        if not eps < v < 1.0 - eps:
            raise InitOutOfRangeError(
                f"initial {name} probability {v:.3g} outside ({eps}, {1 - eps}); "
                f"adjust nu or epsilon (p={p}, mean inclusion {h_effective:.3g})"
            )
    return ProposalParams(np.full(p, a0), np.full(p, d0), eps)


def _shift(ell: np.ndarray, prob: np.ndarray, idx: np.ndarray, delta: float, eps: float) -> float:
    """Move selected logits by delta; returns the largest probability
    change among the touched coordinates."""
    old = prob[idx]
    new_ell = ell[idx] + delta
    ell[idx] = new_ell
    new_prob = inv_logit_interval(new_ell, eps)
    prob[idx] = new_prob
    return float(np.abs(new_prob - old).max())


def apply_adaptation(
    params: ProposalParams,
    flips: FlipRecord,
    a_fwd: float,
    a_rev: float,
    i: int,
    cfg: AdaptConfig,
    w: float | None = None,
) -> tuple[float, float]:
    """In-place adaptation step shared by both update rules.

    Updates only the coordinates named in ``flips``: proposed additions
    adjust their add probability by the forward term and (for w > 0)
    their delete probability by the reverse term; proposed deletions do
    the mirror image.

    Returns
    -------
    (max_logit_step, max_prob_step) : tuple of float
        Largest absolute change of any logit and of any probability in
        this step; (0, 0) when nothing was proposed.
    """
    if w is None:
        w = cfg.w
    add_idx, del_idx = flips.add_idx, flips.del_idx
    if not add_idx.size and not del_idx.size:
        return 0.0, 0.0
    phi = step_size(i, cfg)
    eps = params.epsilon
    max_dp = 0.0
    if w == 0.0:
        d_fwd = phi * (a_fwd - cfg.tau)
        if add_idx.size:
            max_dp = _shift(params.logit_add, params.add, add_idx, d_fwd, eps)
        if del_idx.size:
            max_dp = max(max_dp, _shift(params.logit_delete, params.delete, del_idx, d_fwd, eps))
        return abs(d_fwd), max_dp
    d_fwd = phi * (a_fwd - cfg.tau) * (1.0 - w * a_fwd)
    d_rev = phi * (a_rev - cfg.tau) * (w * a_fwd)
    if add_idx.size:
        max_dp = _shift(params.logit_add, params.add, add_idx, d_fwd, eps)
        max_dp = max(max_dp, _shift(params.logit_delete, params.delete, add_idx, d_rev, eps))
    if del_idx.size:
        max_dp = max(max_dp, _shift(params.logit_delete, params.delete, del_idx, d_fwd, eps))
        max_dp = max(max_dp, _shift(params.logit_add, params.add, del_idx, d_rev, eps))
    return max(abs(d_fwd), abs(d_rev)), max_dp


def ia_update(
    params: ProposalParams, flips: FlipRecord, a_fwd: float, i: int, cfg: AdaptConfig
) -> ProposalParams:
    """Plain adaptation step; pure (returns a new parameter object)."""
    out = params.copy()
    apply_adaptation(out, flips, a_fwd, 0.0, i, cfg, w=0.0)
    return out


def rapa_update(
    params: ProposalParams,
    flips: FlipRecord,
    a_fwd: float,
    a_rev: float,
    i: int,
    cfg: AdaptConfig,
) -> ProposalParams:
    """Reverse-acceptance accelerated step; pure.

    Uses cfg.w; with w = 0 this is exactly :func:`ia_update`.
    """
    out = params.copy()
    apply_adaptation(out, flips, a_fwd, a_rev, i, cfg)
    return out
