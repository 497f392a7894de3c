"""Runnable samplers composed from the model, proposal, and adaptation layers.

Provides the single-chain adaptive flip sampler (plain and
reverse-accelerated updates), multiple-chain acceleration with shared
tuning state, a multi-move Metropolis-Hastings baseline, parallel
tempering with an adaptive temperature ladder, and a tempered sequential
Monte Carlo sampler with adaptive temperature placement.

All drivers are deterministic functions of (configuration, seed): every
random draw comes from numpy Generators spawned from one SeedSequence,
consumed in a fixed sequential order.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .adaptation import AdaptConfig, AdaptCounter, apply_adaptation, init_proposal_params
from .diagnostics import PosteriorSummary
from .errors import ConfigError, DegenerateWeightsError, NumericalError
from .model import BetaInclusion, ModelPosterior
from .proposal import FlipRecord, ProposalParams, acceptance_pair, sample_proposal

__all__ = [
    "ChainState",
    "StepRecord",
    "Trace",
    "RunResult",
    "ia_step",
    "mca_run",
    "multimove_mh_step",
    "multimove_run",
    "TemperatureLadder",
    "SwapRecord",
    "PtResult",
    "pt_step",
    "pt_run",
    "StageRecord",
    "SmcResult",
    "systematic_resample",
    "smc_run",
]

_STATE_COLUMN_LIMIT = 64  # bit-packed model column fits a uint64
_TOP_MODEL_AUTO_LIMIT = 4096  # model-frequency dict disabled above this p


@dataclass
class ChainState:
    """One chain: current model, cached kernel pieces, temperature, stream.

    ``log_ml`` and ``log_prior`` are kept separately so that tempering
    only reweights the likelihood part; ``log_kernel`` is always the
    exact value of ``temperature * log_ml + log_prior``.
    """

    gamma: np.ndarray
    size: int
    log_ml: float
    log_prior: float
    temperature: float = 1.0
    rng: np.random.Generator | None = None

    @property
    def log_kernel(self) -> float:
        return self.temperature * self.log_ml + self.log_prior

    @classmethod
    def from_gamma(
        cls,
        gamma,
        posterior: ModelPosterior,
        rng: np.random.Generator | None = None,
        temperature: float = 1.0,
    ) -> "ChainState":
        g = np.ascontiguousarray(gamma, dtype=bool).copy()
        if g.ndim != 1 or g.shape[0] != posterior.p:
            raise ConfigError(f"initial model must have length {posterior.p}")
        size = int(np.count_nonzero(g))
        ml, pr = posterior.log_parts(g, size)
        return cls(g, size, ml, pr, float(temperature), rng)

    def copy(self, *, copy_rng: bool = False) -> "ChainState":
        rng = copy.deepcopy(self.rng) if copy_rng else self.rng
        return ChainState(
            self.gamma.copy(), self.size, self.log_ml, self.log_prior, self.temperature, rng
        )


@dataclass
class StepRecord:
    """What one transition did: acceptance values, flip sizes, outcome."""

    a_fwd: float
    a_rev: float
    mutated: bool
    accepted: bool
    n_proposed: int
    size: int
    log_kernel: float
    max_dlogit: float
    max_dprob: float
    flips: FlipRecord | None = None


class Trace:
    """Columnar per-step storage, preallocated to a known row count.

    Exposes ``mutated``, ``accepted`` and ``a_fwd`` as arrays, so the
    whole trace can be fed to :func:`bvsampler.diagnostics.mutation_rate`
    directly.  Rows are appended in sweep-major order: for multi-chain
    runs row ``s * r + c`` holds chain ``c`` at sweep ``s``.
    """

    __slots__ = (
        "chain",
        "size",
        "accepted",
        "mutated",
        "log_kernel",
        "a_fwd",
        "n_proposed",
        "max_dlogit",
        "max_dprob",
        "state",
        "_n",
    )

    def __init__(self, capacity: int, *, track_state: bool = False):
        if capacity < 0:
            raise ConfigError("trace capacity must be nonnegative")
        self.chain = np.zeros(capacity, dtype=np.int16)
        self.size = np.zeros(capacity, dtype=np.int32)
        self.accepted = np.zeros(capacity, dtype=bool)
        self.mutated = np.zeros(capacity, dtype=bool)
        self.log_kernel = np.zeros(capacity, dtype=np.float64)
        self.a_fwd = np.zeros(capacity, dtype=np.float64)
        self.n_proposed = np.zeros(capacity, dtype=np.int32)
        self.max_dlogit = np.zeros(capacity, dtype=np.float64)
        self.max_dprob = np.zeros(capacity, dtype=np.float64)
        self.state = np.zeros(capacity, dtype=np.uint64) if track_state else None
        self._n = 0

    @property
    def n_rows(self) -> int:
        return self._n

    def append(self, chain_id: int, rec: StepRecord, state_mask: int = 0) -> None:
        n = self._n
        if n >= self.chain.shape[0]:
            raise NumericalError("trace capacity exceeded")
        self.chain[n] = chain_id
        self.size[n] = rec.size
        self.accepted[n] = rec.accepted
        self.mutated[n] = rec.mutated
        self.log_kernel[n] = rec.log_kernel
        self.a_fwd[n] = rec.a_fwd
        self.n_proposed[n] = rec.n_proposed
        self.max_dlogit[n] = rec.max_dlogit
        self.max_dprob[n] = rec.max_dprob
        if self.state is not None:
            self.state[n] = state_mask
        self._n = n + 1


def _advance_chain(
    state: ChainState,
    params: ProposalParams,
    counter: AdaptCounter,
    cfg: AdaptConfig,
    w: float,
    posterior: ModelPosterior,
) -> StepRecord:
    """One adaptive flip transition, in place.

    Consumes one length-p uniform vector for the proposal and, when the
    proposal differs from the current model, one extra uniform for the
    accept decision.  The counter advances every call; adaptation only
    touches proposed coordinates.
    """
    gamma_new, flips = sample_proposal(state.gamma, params, state.rng)
    i = counter.advance()
    n = flips.n_flips
    if n == 0:
        return StepRecord(1.0, 1.0, False, True, 0, state.size, state.log_kernel, 0.0, 0.0, flips)
    size_new = state.size + flips.add_idx.shape[0] - flips.del_idx.shape[0]
    ml_new, pr_new = posterior.log_parts(gamma_new, size_new)
    t = state.temperature
    lk_cur = t * state.log_ml + state.log_prior
    lk_new = t * ml_new + pr_new
    a_fwd, a_rev = acceptance_pair(lk_cur, lk_new, flips, params)
    accepted = state.rng.random() < a_fwd
    dlogit, dprob = apply_adaptation(params, flips, a_fwd, a_rev, i, cfg, w=w)
    if accepted:
        state.gamma = gamma_new
        state.size = size_new
        state.log_ml = ml_new
        state.log_prior = pr_new
        lk = lk_new
    else:
        lk = lk_cur
    return StepRecord(a_fwd, a_rev, True, accepted, n, state.size, lk, dlogit, dprob, flips)


def ia_step(
    chain: ChainState,
    params: ProposalParams,
    counter: AdaptCounter,
    cfg: AdaptConfig,
    posterior: ModelPosterior,
    *,
    w: float | None = None,
) -> tuple[ChainState, ProposalParams, AdaptCounter, StepRecord]:
    """Pure single transition: returns updated copies, inputs untouched.

    ``w`` defaults to ``cfg.w``; pass 0 to force the plain update rule
    regardless of the configured acceleration weight.  The chain's
    random stream is deep-copied, so calling this twice on the same
    inputs gives bit-identical results.
    """
    new_chain = chain.copy(copy_rng=True)
    new_params = params.copy()
    new_counter = AdaptCounter(counter.i)
    rec = _advance_chain(
        new_chain, new_params, new_counter, cfg, cfg.w if w is None else w, posterior
    )
    return new_chain, new_params, new_counter, rec


def _resolve_w(update_rule: str, cfg: AdaptConfig) -> float:
    if update_rule == "ia":
        return 0.0
    if update_rule == "rapa":
        return cfg.w
    raise ConfigError(f"unknown update rule {update_rule!r}; expected 'ia' or 'rapa'")


class _ChainStats:
    """Streaming inclusion-time and model-frequency bookkeeping for one chain.

    Tracks, per variable, since which retained sample it has been
    included, so each accepted move costs O(#flips) instead of O(p).
    """

    __slots__ = ("counts", "on", "t_end", "models", "key", "last_t")

    def __init__(self, p: int, retained: int, models: dict | None):
        self.counts = np.zeros(p, dtype=np.float64)
        self.on = np.zeros(p, dtype=np.int64)
        self.t_end = retained
        self.models = models
        self.key = b""
        self.last_t = 0

    def start(self, gamma: np.ndarray) -> None:
        """Anchor at the first retained sample (its bits count from 0)."""
        if self.models is not None:
            self.key = np.packbits(gamma).tobytes()
            self.last_t = 0

    def flip(self, tpos: int, flips: FlipRecord, gamma: np.ndarray) -> None:
        """Record an accepted mutation at retained sample index tpos >= 1."""
        self.counts[flips.del_idx] += tpos - self.on[flips.del_idx]
        self.on[flips.add_idx] = tpos
        if self.models is not None:
            self.models[self.key] = self.models.get(self.key, 0) + (tpos - self.last_t)
            self.key = np.packbits(gamma).tobytes()
            self.last_t = tpos

    def finish(self, gamma: np.ndarray) -> None:
        self.counts[gamma] += self.t_end - self.on[gamma]
        if self.models is not None:
            self.models[self.key] = self.models.get(self.key, 0) + (self.t_end - self.last_t)


def _top_models_from_counts(models: dict, p: int, total: int, k: int) -> list:
    items = sorted(models.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    out = []
    for key, count in items:
        bits = np.unpackbits(np.frombuffer(key, dtype=np.uint8))[:p].astype(bool)
        out.append((tuple(int(j) for j in np.flatnonzero(bits)), count / total))
    return out


def _resolve_track_models(track_models, p: int) -> bool:
    if track_models == "auto":
        return p <= _TOP_MODEL_AUTO_LIMIT
    return bool(track_models)


@dataclass
class RunResult:
    """Output of a (multi-)chain run: trace, estimates, final tuning state."""

    trace: Trace
    pips: np.ndarray
    summary: PosteriorSummary
    params: ProposalParams | None
    counter: AdaptCounter | None
    chains: list[ChainState]
    r: int
    iters_per_chain: int
    burnin_per_chain: int
    requested_total: int
    mutation_realized: float
    mutation_rb: float
    update_rule: str
    seed: object
    posterior: ModelPosterior

    @property
    def n_recorded(self) -> int:
        return self.trace.n_rows

    @property
    def n_retained(self) -> int:
        return self.r * (self.iters_per_chain - self.burnin_per_chain)


def _run_round_robin(
    posterior: ModelPosterior,
    states: list[ChainState],
    step_fn,
    *,
    iters: int,
    burnin: int,
    track_models,
    top_k: int,
) -> tuple[Trace, np.ndarray, PosteriorSummary, float, float]:
    """Sweep-major driver shared by the flip samplers and the baseline.

    ``step_fn(state) -> StepRecord`` advances one chain in place; this
    loop owns trace recording, streaming inclusion-time estimates, and
    the post-burn-in model-frequency table.
    """
    p = posterior.p
    r = len(states)
    if iters < 1:
        raise ConfigError("need at least one iteration per chain")
    if not 0 <= burnin < iters:
        raise ConfigError(f"burnin must lie in [0, {iters}), got {burnin}")
    retained = iters - burnin
    track_state = p <= _STATE_COLUMN_LIMIT
    trace = Trace(iters * r, track_state=track_state)
    models: dict | None = {} if _resolve_track_models(track_models, p) else None
    stats = [_ChainStats(p, retained, models) for _ in range(r)]
    masks = [sum(1 << int(j) for j in np.flatnonzero(st.gamma)) for st in states]
    for s in range(iters):
        tpos = s - burnin
        for c in range(r):
            state = states[c]
            rec = step_fn(state)
            if track_state:
                if rec.accepted and rec.mutated:
                    m = masks[c]
                    for j in rec.flips.add_idx:
                        m |= 1 << int(j)
                    for j in rec.flips.del_idx:
                        m &= ~(1 << int(j))
                    masks[c] = m
                trace.append(c, rec, masks[c])
            else:
                trace.append(c, rec)
            if tpos == 0:
                stats[c].start(state.gamma)
            elif tpos > 0 and rec.accepted and rec.mutated:
                stats[c].flip(tpos, rec.flips, state.gamma)
    counts = np.zeros(p, dtype=np.float64)
    for c in range(r):
        stats[c].finish(states[c].gamma)
        counts += stats[c].counts
    n_retained = r * retained
    pips = counts / n_retained
    post = slice(r * burnin, None)
    mean_size = float(trace.size[post].mean())
    mut_realized = float((trace.accepted[post] & trace.mutated[post]).mean())
    mut_rb = float((trace.a_fwd[post] * trace.mutated[post]).mean())
    top = _top_models_from_counts(models, p, n_retained, top_k) if models is not None else []
    summary = PosteriorSummary(pips, mean_size, n_retained, top)
    return trace, pips, summary, mut_realized, mut_rb


def mca_run(
    posterior: ModelPosterior,
    cfg: AdaptConfig,
    *,
    total_iters: int,
    burnin: int = 0,
    r: int = 1,
    seed=None,
    init=None,
    update_rule: str = "rapa",
    track_models="auto",
    top_k: int = 13,
) -> RunResult:
    """Run r chains sharing one adaptive proposal state; r=1 is the plain sampler.

    The iteration budget is split evenly: each chain advances
    ``total_iters // r`` steps (any remainder is dropped and visible by
    comparing ``requested_total`` with ``r * iters_per_chain``).  Chains
    are updated round-robin within a sweep and every step adapts the
    shared parameters, so the adaptation counter ticks r times per
    sweep.  ``burnin`` counts sweeps, i.e. steps of each single chain.
    """
    if r < 1:
        raise ConfigError(f"chain count must be at least 1, got {r}")
    w = _resolve_w(update_rule, cfg)
    p = posterior.p
    iters = total_iters // r
    params = init_proposal_params(p, posterior.prior.mean_inclusion, cfg)
    counter = AdaptCounter()
    root = np.random.SeedSequence(seed)
    streams = [np.random.default_rng(s) for s in root.spawn(r)]
    base = np.zeros(p, dtype=bool) if init is None else init
    states = [ChainState.from_gamma(base, posterior, rng=streams[c]) for c in range(r)]

    def step(state: ChainState) -> StepRecord:
        return _advance_chain(state, params, counter, cfg, w, posterior)

    trace, pips, summary, mut_real, mut_rb = _run_round_robin(
        posterior,
        states,
        step,
        iters=iters,
        burnin=burnin,
        track_models=track_models,
        top_k=top_k,
    )
    return RunResult(
        trace,
        pips,
        summary,
        params,
        counter,
        states,
        r,
        iters,
        burnin,
        total_iters,
        mut_real,
        mut_rb,
        update_rule,
        seed,
        posterior,
    )


def _feasible_moves(size: int, p: int) -> list[str]:
    moves = []
    if size < p:
        moves.append("add")
    if size > 0:
        moves.append("remove")
    if 0 < size < p:
        moves.append("swap")
    return moves


def _advance_multimove(state: ChainState, posterior: ModelPosterior) -> StepRecord:
    """One add/remove/swap Metropolis-Hastings transition, in place.

    The move type is uniform over the feasible set and the target
    indices uniform over their class; the acceptance ratio accounts for
    both, including the reverse move's feasible-set size.
    """
    p = posterior.p
    rng = state.rng
    size = state.size
    moves = _feasible_moves(size, p)
    move = moves[int(rng.integers(len(moves)))]
    included = np.flatnonzero(state.gamma)
    excluded = np.flatnonzero(~state.gamma)
    gamma_new = state.gamma.copy()
    if move == "add":
        j = int(excluded[rng.integers(excluded.shape[0])])
        gamma_new[j] = True
        size_new = size + 1
        n_fwd = p - size
        n_rev = size_new
        flips = FlipRecord(np.array([j]), np.array([], dtype=np.int64))
    elif move == "remove":
        j = int(included[rng.integers(included.shape[0])])
        gamma_new[j] = False
        size_new = size - 1
        n_fwd = size
        n_rev = p - size_new
        flips = FlipRecord(np.array([], dtype=np.int64), np.array([j]))
    else:
        j_in = int(included[rng.integers(included.shape[0])])
        j_out = int(excluded[rng.integers(excluded.shape[0])])
        gamma_new[j_in] = False
        gamma_new[j_out] = True
        size_new = size
        n_fwd = size * (p - size)
        n_rev = n_fwd
        flips = FlipRecord(np.array([j_out]), np.array([j_in]))
    log_q_fwd = -np.log(len(moves) * n_fwd)
    log_q_rev = -np.log(len(_feasible_moves(size_new, p)) * n_rev)
    ml_new, pr_new = posterior.log_parts(gamma_new, size_new)
    t = state.temperature
    lk_cur = t * state.log_ml + state.log_prior
    lk_new = t * ml_new + pr_new
    total = lk_new - lk_cur + log_q_rev - log_q_fwd
    if total >= 0.0:
        a_fwd, a_rev = 1.0, float(np.exp(-total))
    else:
        a_fwd, a_rev = float(np.exp(total)), 1.0
    accepted = rng.random() < a_fwd
    if accepted:
        state.gamma = gamma_new
        state.size = size_new
        state.log_ml = ml_new
        state.log_prior = pr_new
        lk = lk_new
    else:
        lk = lk_cur
    n_prop = 2 if move == "swap" else 1
    return StepRecord(a_fwd, a_rev, True, accepted, n_prop, state.size, lk, 0.0, 0.0, flips)


def multimove_mh_step(
    chain: ChainState, posterior: ModelPosterior, rng: np.random.Generator | None = None
) -> ChainState:
    """Pure add/remove/swap transition; returns the updated chain.

    Uses ``rng`` when given, otherwise a deep copy of the chain's own
    stream, leaving the input untouched either way.
    """
    new_chain = chain.copy(copy_rng=rng is None)
    if rng is not None:
        new_chain.rng = rng
    _advance_multimove(new_chain, posterior)
    return new_chain


def multimove_run(
    posterior: ModelPosterior,
    *,
    total_iters: int,
    burnin: int = 0,
    seed=None,
    init=None,
    track_models="auto",
    top_k: int = 13,
) -> RunResult:
    """Single-chain add/remove/swap baseline with the same outputs as mca_run."""
    root = np.random.SeedSequence(seed)
    rng = np.random.default_rng(root.spawn(1)[0])
    base = np.zeros(posterior.p, dtype=bool) if init is None else init
    states = [ChainState.from_gamma(base, posterior, rng=rng)]

    def step(state: ChainState) -> StepRecord:
        return _advance_multimove(state, posterior)

    trace, pips, summary, mut_real, mut_rb = _run_round_robin(
        posterior,
        states,
        step,
        iters=total_iters,
        burnin=burnin,
        track_models=track_models,
        top_k=top_k,
    )
    return RunResult(
        trace,
        pips,
        summary,
        None,
        None,
        states,
        1,
        total_iters,
        burnin,
        total_iters,
        mut_real,
        mut_rb,
        "multimove",
        seed,
        posterior,
    )


@dataclass
class TemperatureLadder:
    """Adaptive inverse-temperature ladder anchored at its top value 1.

    State is the full increment partition: ``rho[0] = t[0]`` and
    ``rho[j] = t[j] - t[j-1]``, so the increments are positive and sum
    to one.  A swap between slots (k, k+1) feeds back on ``rho[k+1]``,
    the gap between the two swapped temperatures; after every update the
    increments are clipped at ``rho_min``, renormalized, and the ladder
    rebuilt cumulatively so the top stays exactly 1.
    """

    t: np.ndarray
    rho: np.ndarray
    a_hat: float = 0.234
    zeta0: float = 1.0
    lam: float = 0.6
    rho_min: float = 1e-4

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=np.float64).copy()
        self.rho = np.asarray(self.rho, dtype=np.float64).copy()
        m = self.t.shape[0]
        if m < 2:
            raise ConfigError(f"need at least two temperatures, got {m}")
        if self.rho.shape != self.t.shape:
            raise ConfigError("rho and t must have the same length")
        if not 0.0 < self.a_hat < 1.0:
            raise ConfigError(f"target swap rate must be in (0, 1), got {self.a_hat}")
        if self.zeta0 <= 0 or not 0.5 < self.lam <= 1.0:
            raise ConfigError("swap step sizes need zeta0 > 0 and lam in (1/2, 1]")
        if self.rho_min <= 0 or m * (m + 1) * self.rho_min > 1.0:
            raise ConfigError(
                f"rho_min must satisfy 0 < m*(m+1)*rho_min <= 1, got {self.rho_min} with m={m}"
            )
        if np.any(self.rho < self.rho_min):
            raise ConfigError("initial increments must all be at least rho_min")
        if abs(self.t[-1] - 1.0) > 1e-12 or np.any(np.diff(self.t) <= 0) or self.t[0] <= 0:
            raise ConfigError("temperatures must be increasing in (0, 1] with top value 1")
        if np.max(np.abs(np.diff(self.t, prepend=0.0) - self.rho)) > 1e-9:
            raise ConfigError("rho must be the increment partition of t")

    @property
    def m(self) -> int:
        return self.t.shape[0]

    @classmethod
    def geometric(cls, m: int, **kwargs) -> "TemperatureLadder":
        """Halving ladder 0.5^(m-1), ..., 0.5, 1 as the pre-adaptation start."""
        if m < 2:
            raise ConfigError(f"need at least two temperatures, got {m}")
        t = 0.5 ** np.arange(m - 1, -1, -1, dtype=np.float64)
        rho = np.diff(t, prepend=0.0)
        return cls(t, rho, **kwargs)

    def zeta(self, h: int) -> float:
        """Diminishing swap-adaptation step size at sweep h >= 1."""
        if h < 1:
            raise ConfigError(f"sweep index must be at least 1, got {h}")
        return self.zeta0 * float(h) ** (-self.lam)

    def update(self, pair: int, a: float, h: int) -> None:
        """Feed back one swap attempt between slots (pair, pair + 1).

        Moves the increment between the two temperatures by
        ``zeta(h) * (a - a_hat)`` where ``a`` is the realized swap
        acceptance probability, then restores positivity and the unit
        sum, keeping every increment at least ``rho_min``.
        """
        if not 0 <= pair <= self.m - 2:
            raise ConfigError(f"swap pair index must be in [0, {self.m - 2}], got {pair}")
        rho = self.rho
        rho[pair + 1] += self.zeta(h) * (a - self.a_hat)
        np.maximum(rho, self.rho_min, out=rho)
        rho /= rho.sum()
        np.maximum(rho, self.rho_min, out=rho)
        rho[int(np.argmax(rho))] -= rho.sum() - 1.0
        t = np.cumsum(rho)
        t[-1] = 1.0
        self.t = t


@dataclass
class SwapRecord:
    """One replica-swap attempt between ladder slots (pair, pair + 1)."""

    pair: int
    a: float
    accepted: bool


def pt_step(
    chains: list[ChainState],
    params_list: list[ProposalParams],
    counters: list[AdaptCounter],
    ladder: TemperatureLadder,
    cfg: AdaptConfig,
    posterior: ModelPosterior,
    swap_rng: np.random.Generator,
    sweep: int,
    *,
    w: float = 0.0,
) -> tuple[list[StepRecord], SwapRecord]:
    """One tempering sweep, in place: per-chain flip moves, swap, ladder update.

    Chain j targets the tempered kernel at ladder slot j with its own
    tuning parameters.  The swap pair's lower index is uniform, the
    acceptance is the tempered likelihood ratio, and the ladder adapts
    on the realized acceptance probability whether or not the swap
    happened; temperatures are then reassigned from the updated ladder.
    """
    m = len(chains)
    if m != ladder.m or len(params_list) != m or len(counters) != m:
        raise ConfigError("chains, parameter sets, counters, and ladder sizes must agree")
    recs = [
        _advance_chain(chains[j], params_list[j], counters[j], cfg, w, posterior)
        for j in range(m)
    ]
    k = int(swap_rng.integers(m - 1))
    lo, hi = chains[k], chains[k + 1]
    delta = (lo.temperature - hi.temperature) * (hi.log_ml - lo.log_ml)
    a = 1.0 if delta >= 0.0 else float(np.exp(delta))
    accepted = swap_rng.random() < a
    if accepted:
        lo.gamma, hi.gamma = hi.gamma, lo.gamma
        lo.size, hi.size = hi.size, lo.size
        lo.log_ml, hi.log_ml = hi.log_ml, lo.log_ml
        lo.log_prior, hi.log_prior = hi.log_prior, lo.log_prior
    ladder.update(k, a, sweep)
    for j in range(m):
        chains[j].temperature = ladder.t[j]
    return recs, SwapRecord(k, a, accepted)


@dataclass
class PtResult:
    """Output of a tempered run: cold-chain estimates plus swap/ladder logs."""

    trace: Trace
    pips: np.ndarray
    summary: PosteriorSummary
    swap_pair: np.ndarray
    swap_a: np.ndarray
    swap_accepted: np.ndarray
    ladder: TemperatureLadder
    ladder_history: np.ndarray
    params: list[ProposalParams]
    counters: list[AdaptCounter]
    chains: list[ChainState]
    m: int
    total_sweeps: int
    burnin: int
    mutation_realized: float
    mutation_rb: float
    update_rule: str
    seed: object
    posterior: ModelPosterior

    @property
    def cold_index(self) -> int:
        return self.m - 1

    def swap_rate(self, pair: int | None = None, *, burnin: int | None = None) -> float:
        """Mean realized swap acceptance, optionally for one ladder gap."""
        b = self.burnin if burnin is None else burnin
        keep = np.arange(self.swap_a.shape[0]) >= b
        if pair is not None:
            keep &= self.swap_pair == pair
        if not keep.any():
            return float("nan")
        return float(self.swap_a[keep].mean())


def pt_run(
    posterior: ModelPosterior,
    cfg: AdaptConfig,
    *,
    m: int,
    total_sweeps: int,
    burnin: int = 0,
    seed=None,
    init=None,
    update_rule: str = "ia",
    ladder: TemperatureLadder | None = None,
    a_hat: float = 0.234,
    zeta0: float = 1.0,
    rho_min: float = 1e-4,
    track_models="auto",
    top_k: int = 13,
) -> PtResult:
    """Adaptive parallel tempering; estimates come from the cold chain.

    Slot m-1 runs at temperature 1.  Every sweep advances each chain
    once (per-chain tuning parameters, shared step-size schedule
    settings), then attempts one neighbor swap and adapts the ladder.
    ``burnin`` counts sweeps and applies to the cold chain's estimates.
    Trace rows hold each chain's state after its flip move and before
    the sweep's swap; inclusion and size estimates follow the post-swap
    cold states, so accepted swaps onto the top slot count as changes.
    """
    if m < 2:
        raise ConfigError(f"parallel tempering needs at least 2 chains, got {m}")
    if total_sweeps < 1:
        raise ConfigError("need at least one sweep")
    if not 0 <= burnin < total_sweeps:
        raise ConfigError(f"burnin must lie in [0, {total_sweeps}), got {burnin}")
    w = _resolve_w(update_rule, cfg)
    p = posterior.p
    if ladder is None:
        ladder = TemperatureLadder.geometric(
            m, a_hat=a_hat, zeta0=zeta0, lam=cfg.lam, rho_min=rho_min
        )
    elif ladder.m != m:
        raise ConfigError(f"ladder has {ladder.m} temperatures but m={m}")
    root = np.random.SeedSequence(seed)
    streams = root.spawn(m + 1)
    base = np.zeros(p, dtype=bool) if init is None else init
    chains = [
        ChainState.from_gamma(
            base, posterior, rng=np.random.default_rng(streams[j]), temperature=ladder.t[j]
        )
        for j in range(m)
    ]
    swap_rng = np.random.default_rng(streams[m])
    params_list = [init_proposal_params(p, posterior.prior.mean_inclusion, cfg) for _ in range(m)]
    counters = [AdaptCounter() for _ in range(m)]
    cold = m - 1
    retained = total_sweeps - burnin
    track_state = p <= _STATE_COLUMN_LIMIT
    trace = Trace(m * total_sweeps, track_state=track_state)
    swap_pair = np.zeros(total_sweeps, dtype=np.int16)
    swap_a = np.zeros(total_sweeps, dtype=np.float64)
    swap_accepted = np.zeros(total_sweeps, dtype=bool)
    ladder_history = np.zeros((total_sweeps, m), dtype=np.float64)
    cold_stats = _ChainStats(p, retained, {} if _resolve_track_models(track_models, p) else None)
    prev_cold = chains[cold].gamma.copy()
    cold_size_sum = 0
    masks = [sum(1 << int(j) for j in np.flatnonzero(ch.gamma)) for ch in chains]
    for s in range(total_sweeps):
        recs, swap = pt_step(
            chains, params_list, counters, ladder, cfg, posterior, swap_rng, s + 1, w=w
        )
        if track_state:
            for c, rec in enumerate(recs):
                if rec.accepted and rec.mutated:
                    mk = masks[c]
                    for j in rec.flips.add_idx:
                        mk |= 1 << int(j)
                    for j in rec.flips.del_idx:
                        mk &= ~(1 << int(j))
                    masks[c] = mk
            for c, rec in enumerate(recs):
                trace.append(c, rec, masks[c])
            if swap.accepted:
                a, b = swap.pair, swap.pair + 1
                masks[a], masks[b] = masks[b], masks[a]
        else:
            for c, rec in enumerate(recs):
                trace.append(c, rec)
        swap_pair[s] = swap.pair
        swap_a[s] = swap.a
        swap_accepted[s] = swap.accepted
        ladder_history[s] = ladder.t
        # Cold-chain inclusion times track the post-sweep state, so a
        # swap landing on the cold slot counts as a change of every bit
        # that differs; diffing against the previous sweep covers both
        # flip moves and swaps with one code path.
        tpos = s - burnin
        gamma_now = chains[cold].gamma
        if tpos >= 0:
            cold_size_sum += chains[cold].size
        if tpos == 0:
            cold_stats.start(gamma_now)
            prev_cold = gamma_now.copy()
        elif tpos > 0:
            moved = recs[cold].accepted and recs[cold].mutated
            swapped = swap.accepted and swap.pair == cold - 1
            if moved or swapped:
                changed = gamma_now != prev_cold
                if changed.any():
                    add_idx = np.flatnonzero(gamma_now & changed)
                    del_idx = np.flatnonzero(~gamma_now & changed)
                    cold_stats.flip(tpos, FlipRecord(add_idx, del_idx), gamma_now)
                    prev_cold = gamma_now.copy()
    cold_stats.finish(chains[cold].gamma)
    pips = cold_stats.counts / retained
    post = np.arange(m * total_sweeps) % m == cold
    post &= np.arange(m * total_sweeps) // m >= burnin
    mean_size = cold_size_sum / retained
    mut_real = float((trace.accepted[post] & trace.mutated[post]).mean())
    mut_rb = float((trace.a_fwd[post] * trace.mutated[post]).mean())
    top = (
        _top_models_from_counts(cold_stats.models, p, retained, top_k)
        if cold_stats.models is not None
        else []
    )
    summary = PosteriorSummary(pips, mean_size, retained, top)
    return PtResult(
        trace,
        pips,
        summary,
        swap_pair,
        swap_a,
        swap_accepted,
        ladder,
        ladder_history,
        params_list,
        counters,
        chains,
        m,
        total_sweeps,
        burnin,
        mut_real,
        mut_rb,
        update_rule,
        seed,
        posterior,
    )


def systematic_resample(weights, rng: np.random.Generator) -> np.ndarray:
    """Systematic resampling: one uniform, N evenly spaced strata.

    Returns the selected ancestor index for each of the N offspring; the
    number of copies of index j is always floor(N w_j) or ceil(N w_j).
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] == 0:
        raise ValueError("weights must be a nonempty vector")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and nonnegative")
    total = w.sum()
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"weights must be normalized, sum is {total}")
    n = w.shape[0]
    cum = np.cumsum(w / total)
    cum[-1] = 1.0
    positions = rng.random() / n + np.arange(n) / n
    return np.searchsorted(cum, positions, side="right").astype(np.int64)


@dataclass
class StageRecord:
    """One tempering stage: bridge step, weight quality, move statistics."""

    index: int
    t_prev: float
    t: float
    ess: float
    log_mean_weight: float
    mean_a_fwd: float
    realized_mutation: float
    unique_particles: int


@dataclass
class SmcResult:
    """Output of a tempered particle run."""

    stages: list[StageRecord]
    log_normalizer: float
    gammas: np.ndarray
    pips: np.ndarray
    summary: PosteriorSummary
    params: ProposalParams
    counter: AdaptCounter
    n_particles: int
    k_moves: int
    c: float
    update_rule: str
    seed: object
    posterior: ModelPosterior

    @property
    def n_stages(self) -> int:
        return len(self.stages)


def _ess_of_increment(log_ml: np.ndarray, dt: float) -> float:
    lw = dt * log_ml
    mx = lw.max()
    e = np.exp(lw - mx)
    s1 = e.sum()
    s2 = (e * e).sum()
    return float(s1 * s1 / s2)


def _next_temperature(
    log_ml: np.ndarray, t_prev: float, n: int, c: float, *, max_iter: int = 60
) -> float:
    """Bisection for the next temperature with effective size about c*N.

    Accepts 1 outright when the remaining bridge keeps the effective
    size at or above the target; otherwise stops when within 0.005*N of
    the target or the bracket is narrower than 1e-6.
    """
    target = c * n
    if _ess_of_increment(log_ml, 1.0 - t_prev) >= target:
        return 1.0
    lo, hi = t_prev, 1.0
    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        e = _ess_of_increment(log_ml, mid - t_prev)
        if abs(e - target) <= 0.005 * n or hi - lo <= 1e-6:
            return mid
        if e > target:
            lo = mid
        else:
            hi = mid
    return mid


def _sample_prior_models(posterior: ModelPosterior, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n models from the model prior (marginalizing any hyperprior)."""
    inclusion = posterior.prior.inclusion
    p = posterior.p
    if isinstance(inclusion, BetaInclusion):
        h = rng.beta(inclusion.a, inclusion.b, size=(n, 1))
    else:
        h = inclusion.mean
    return rng.random((n, p)) < h


def smc_run(
    posterior: ModelPosterior,
    cfg: AdaptConfig,
    *,
    n_particles: int,
    k_moves: int,
    c: float = 0.9,
    seed=None,
    update_rule: str = "ia",
    top_k: int = 13,
    max_stages: int = 1000,
) -> SmcResult:
    """Tempered particle sampler with adaptive temperature placement.

    Starts from prior draws at temperature 0 and bridges to the posterior:
    each stage picks the next temperature by effective-size bisection,
    reweights, systematic-resamples, and applies k_moves adaptive flip
    sweeps per particle at the new temperature with one shared proposal
    state.  The step-size counter restarts every stage while the learned
    proposal probabilities carry over.  The normalizing-constant
    estimate is the accumulated log mean stage weight.
    """
    if n_particles < 2:
        raise ConfigError(f"need at least 2 particles, got {n_particles}")
    if k_moves < 1:
        raise ConfigError(f"need at least one move sweep per stage, got {k_moves}")
    if not 0.0 < c < 1.0:
        raise ConfigError(f"effective-size fraction must be in (0, 1), got {c}")
    w = _resolve_w(update_rule, cfg)
    p = posterior.p
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    params = init_proposal_params(p, posterior.prior.mean_inclusion, cfg)
    counter = AdaptCounter()
    init = _sample_prior_models(posterior, n_particles, rng)
    states = [ChainState.from_gamma(init[i], posterior, rng=rng, temperature=0.0) for i in range(n_particles)]
    stages: list[StageRecord] = []
    log_z = 0.0
    t_prev = 0.0
    while t_prev < 1.0:
        if len(stages) >= max_stages:
            raise NumericalError(
                f"tempering did not reach 1 within {max_stages} stages (last t={t_prev})"
            )
        log_ml = np.array([st.log_ml for st in states])
        t_new = _next_temperature(log_ml, t_prev, n_particles, c)
        if t_new <= t_prev:
            # Bisection can only stall within one float of 1; close the
            # bridge rather than loop on a zero-width increment.
            t_new = 1.0
        log_w = (t_new - t_prev) * log_ml
        mx = log_w.max()
        if not np.isfinite(mx):
            raise DegenerateWeightsError("all stage weights underflowed")
        shifted = np.exp(log_w - mx)
        total = shifted.sum()
        log_sum = mx + float(np.log(total))
        log_z += log_sum - np.log(n_particles)
        weights = shifted / total
        ess = 1.0 / float((weights * weights).sum())
        ancestors = systematic_resample(weights, rng)
        states = [states[int(j)].copy() for j in ancestors]
        counter.reset()
        a_sum = 0.0
        mut_sum = 0
        n_steps = k_moves * n_particles
        for st in states:
            st.temperature = t_new
        for _ in range(k_moves):
            for st in states:
                rec = _advance_chain(st, params, counter, cfg, w, posterior)
                a_sum += rec.a_fwd if rec.mutated else 0.0
                mut_sum += 1 if rec.accepted and rec.mutated else 0
        unique = len({st.gamma.tobytes() for st in states})
        stages.append(
            StageRecord(
                len(stages),
                t_prev,
                t_new,
                ess,
                log_sum - float(np.log(n_particles)),
                a_sum / n_steps,
                mut_sum / n_steps,
                unique,
            )
        )
        t_prev = t_new
    gammas = np.stack([st.gamma for st in states])
    pips = gammas.mean(axis=0)
    mean_size = float(gammas.sum(axis=1).mean())
    model_counts: dict[bytes, int] = {}
    for st in states:
        key = np.packbits(st.gamma).tobytes()
        model_counts[key] = model_counts.get(key, 0) + 1
    top = _top_models_from_counts(model_counts, p, n_particles, top_k)
    summary = PosteriorSummary(pips, mean_size, n_particles, top)
    return SmcResult(
        stages,
        log_z,
        gammas,
        pips,
        summary,
        params,
        counter,
        n_particles,
        k_moves,
        c,
        update_rule,
        seed,
        posterior,
    )
