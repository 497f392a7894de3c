"""Driver-level tests: exact bookkeeping identities, fixed-kernel
stationarity against brute-force transition matrices, distributional
checks against enumeration, and bitwise reproducibility."""

import copy

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bvsampler import (
    AdaptConfig,
    AdaptCounter,
    ChainState,
    ConfigError,
    Dataset,
    DegenerateWeightsError,
    FixedInclusion,
    ModelPosterior,
    NumericalError,
    PriorSpec,
    ProposalParams,
    RidgePrior,
    TemperatureLadder,
    Trace,
    ess,
    ia_step,
    init_proposal_params,
    mca_run,
    multimove_mh_step,
    multimove_run,
    pt_run,
    pt_step,
    smc_run,
    systematic_resample,
)
from bvsampler.samplers import _advance_multimove
from exact_kernels import (
    all_models,
    check_stationarity,
    flip_transition_matrix,
    multimove_transition_matrix,
    stationary_dist,
)


class _CycleRng:
    """Generator stand-in returning fixed proposal and acceptance draws."""

    def __init__(self, flip_u, accept_u):
        self.flip_u = float(flip_u)
        self.accept_u = float(accept_u)

    def random(self, size=None):
        if size is None:
            return self.accept_u
        return np.full(size, self.flip_u)


class _ScriptRng:
    """Generator stand-in replaying scripted integer and uniform draws."""

    def __init__(self, ints=(), unis=()):
        self.ints = list(ints)
        self.unis = list(unis)
        self.integer_calls = []

    def integers(self, n):
        self.integer_calls.append(int(n))
        return self.ints.pop(0)

    def random(self, size=None):
        u = self.unis.pop(0)
        if size is None:
            return u
        return np.full(size, u)


def unpack_masks(masks, p):
    """(T,) bit masks -> (T, p) boolean indicators."""
    m = np.asarray(masks, dtype=np.int64)
    return (m[:, None] >> np.arange(p)) & 1 == 1


def assert_frequencies_match(mask_series, probs):
    """Empirical state frequencies against exact probabilities.

    The tolerance is three standard errors with the error inflated by
    the estimated autocorrelation time of each state's indicator, since
    the samples come from a Markov chain rather than iid draws.
    """
    n = mask_series.shape[0]
    counts = np.bincount(mask_series, minlength=probs.shape[0])
    freqs = counts / n
    for k in range(probs.shape[0]):
        indicator = (mask_series == k).astype(np.float64)
        r = ess(indicator)
        iact = 1.0 if r.degenerate else max(float(r.iact), 1.0)
        tol = 3.0 * np.sqrt(probs[k] * (1.0 - probs[k]) * iact / n)
        assert abs(freqs[k] - probs[k]) <= tol, (k, freqs[k], probs[k], tol)


def kernel_vector(posterior, p):
    models = all_models(p)
    return np.array([posterior.log_kernel(models[i]) for i in range(models.shape[0])])


class TestChainState:
    def test_cached_parts_consistent(self, inst8):
        """from_gamma caches exactly what the posterior evaluates."""
        gamma = np.zeros(8, dtype=bool)
        gamma[[0, 2]] = True
        st = ChainState.from_gamma(gamma, inst8.posterior)
        ml, pr = inst8.posterior.log_parts(gamma)
        assert st.size == 2
        assert st.log_ml == ml and st.log_prior == pr
        assert st.log_kernel == inst8.posterior.log_kernel(gamma)

    def test_tempered_kernel(self, inst8):
        """log_kernel scales only the likelihood part by the temperature."""
        gamma = np.zeros(8, dtype=bool)
        gamma[1] = True
        st = ChainState.from_gamma(gamma, inst8.posterior, temperature=0.3)
        ml, pr = inst8.posterior.log_parts(gamma)
        assert st.log_kernel == pytest.approx(0.3 * ml + pr, rel=1e-15)

    def test_length_mismatch_raises(self, inst8):
        with pytest.raises(ConfigError):
            ChainState.from_gamma(np.zeros(5, dtype=bool), inst8.posterior)


class TestIaStepPure:
    def test_inputs_untouched_and_deterministic(self, inst8):
        """The pure step neither mutates its arguments nor depends on call count."""
        cfg = AdaptConfig()
        params = init_proposal_params(8, inst8.prior.mean_inclusion, cfg)
        counter = AdaptCounter(4)
        chain = ChainState.from_gamma(
            np.zeros(8, dtype=bool), inst8.posterior, rng=np.random.default_rng(17)
        )
        gamma_before = chain.gamma.copy()
        add_before = params.add.copy()
        first = ia_step(chain, params, counter, cfg, inst8.posterior)
        second = ia_step(chain, params, counter, cfg, inst8.posterior)
        assert np.array_equal(chain.gamma, gamma_before)
        assert np.array_equal(params.add, add_before)
        assert counter.i == 4
        c1, p1, k1, r1 = first
        c2, p2, k2, r2 = second
        assert np.array_equal(c1.gamma, c2.gamma)
        assert np.array_equal(p1.add, p2.add)
        assert np.array_equal(p1.delete, p2.delete)
        assert k1.i == k2.i == 5
        assert (r1.a_fwd, r1.accepted, r1.size) == (r2.a_fwd, r2.accepted, r2.size)

    def test_w_argument_overrides_config(self, inst8):
        """Forcing w=0 reproduces a run configured with w=0."""
        cfg_half = AdaptConfig(w=0.5)
        cfg_zero = AdaptConfig(w=0.0)
        params = init_proposal_params(8, inst8.prior.mean_inclusion, cfg_half)
        counter = AdaptCounter()
        chain = ChainState.from_gamma(
            np.zeros(8, dtype=bool), inst8.posterior, rng=np.random.default_rng(3)
        )
        _, p_forced, _, _ = ia_step(chain, params, counter, cfg_half, inst8.posterior, w=0.0)
        _, p_zero, _, _ = ia_step(chain, params, counter, cfg_zero, inst8.posterior)
        assert np.array_equal(p_forced.add, p_zero.add)
        assert np.array_equal(p_forced.delete, p_zero.delete)

    def test_zero_drift_at_target_rate(self):
        """Proposals accepted with probability exactly tau leave the
        tuning parameters where they are (plain update rule)."""
        rng = np.random.default_rng(4)
        n = 20
        data = Dataset(rng.normal(size=n), np.zeros((n, 1)))
        prior = PriorSpec(RidgePrior(9.0), FixedInclusion(0.5))
        post = ModelPosterior(data, prior)
        cfg = AdaptConfig(tau=0.45, epsilon=1e-3)
        lk0 = post.log_kernel(np.array([False]))
        lk1 = post.log_kernel(np.array([True]))
        a0 = 0.8
        d0 = a0 * cfg.tau * np.exp(lk0 - lk1)
        params = ProposalParams(np.array([a0]), np.array([d0]), cfg.epsilon)
        logit_add0 = params.logit_add.copy()
        logit_del0 = params.logit_delete.copy()
        counter = AdaptCounter()
        chain = ChainState.from_gamma(np.array([False]), post, rng=_CycleRng(0.0, 0.99))
        for _ in range(300):
            chain, params, counter, rec = ia_step(chain, params, counter, cfg, post, w=0.0)
            assert rec.mutated and not rec.accepted
            assert rec.a_fwd == pytest.approx(cfg.tau, abs=1e-13)
        assert not chain.gamma[0]
        assert counter.i == 300
        assert np.abs(params.logit_add - logit_add0).max() <= 1e-12
        assert np.abs(params.logit_delete - logit_del0).max() <= 1e-12


class TestFrozenKernel:
    """With the step-size constant frozen at zero every sampler is a
    fixed-kernel chain; small state spaces admit exact checks."""

    def test_frozen_run_keeps_initial_parameters(self, toy4):
        cfg = AdaptConfig(phi0=0.0)
        res = mca_run(toy4.posterior, cfg, total_iters=2000, seed=8)
        ref = init_proposal_params(4, toy4.prior.mean_inclusion, cfg)
        assert np.array_equal(res.params.add, ref.add)
        assert np.array_equal(res.params.delete, ref.delete)

    def test_flip_kernel_stationary_tempered_and_cold(self, toy4):
        """The fixed flip kernel leaves the (tempered) target invariant."""
        cfg = AdaptConfig(phi0=0.0)
        ref = init_proposal_params(4, toy4.prior.mean_inclusion, cfg)
        models = all_models(4)
        log_ml = np.array([toy4.posterior.log_marginal(models[i]) for i in range(16)])
        log_pr = np.array([toy4.posterior.log_prior(models[i]) for i in range(16)])
        for t in (1.0, 0.3):
            log_k = t * log_ml + log_pr
            P = flip_transition_matrix(log_k, ref.add, ref.delete)
            ok, resid = check_stationarity(P, stationary_dist(log_k), 1e-12)
            assert ok, resid

    def test_frozen_frequencies_match_enumeration(self, toy4):
        """Long fixed-kernel run visits models at their exact posterior
        frequencies (three autocorrelation-adjusted standard errors)."""
        cfg = AdaptConfig(phi0=0.0)
        res = mca_run(toy4.posterior, cfg, total_iters=300_000, burnin=2000, seed=5)
        probs = np.exp(toy4.enum.log_probs)
        masks = res.trace.state[2000:].astype(np.int64)
        assert_frequencies_match(masks, probs)

    def test_multimove_kernel_stationary(self, toy4):
        P = multimove_transition_matrix(kernel_vector(toy4.posterior, 4), 4)
        pi = stationary_dist(kernel_vector(toy4.posterior, 4))
        ok, resid = check_stationarity(P, pi, 1e-12)
        assert ok, resid


class TestUpdateRuleEquivalence:
    def test_zero_weight_acceleration_is_plain_rule(self, inst8):
        """w=0 runs of the two update rules are bit-for-bit identical."""
        cfg = AdaptConfig(w=0.0)
        a = mca_run(inst8.posterior, cfg, total_iters=3000, seed=21, update_rule="ia")
        b = mca_run(inst8.posterior, cfg, total_iters=3000, seed=21, update_rule="rapa")
        assert np.array_equal(a.trace.state, b.trace.state)
        assert np.array_equal(a.trace.a_fwd, b.trace.a_fwd)
        assert np.array_equal(a.trace.max_dlogit, b.trace.max_dlogit)
        assert np.array_equal(a.params.add, b.params.add)
        assert np.array_equal(a.params.delete, b.params.delete)

    def test_positive_weight_changes_the_path(self, inst8):
        cfg = AdaptConfig(w=0.5)
        a = mca_run(inst8.posterior, cfg, total_iters=3000, seed=21, update_rule="ia")
        b = mca_run(inst8.posterior, cfg, total_iters=3000, seed=21, update_rule="rapa")
        assert not np.array_equal(a.params.delete, b.params.delete)


class TestMcaDriver:
    def test_budget_split_and_truncation(self, inst8):
        """total_iters splits evenly; the remainder is dropped but visible."""
        cfg = AdaptConfig()
        res = mca_run(inst8.posterior, cfg, total_iters=1003, r=5, seed=2)
        assert res.iters_per_chain == 200
        assert res.trace.n_rows == 1000
        assert res.requested_total == 1003
        assert res.counter.i == 1000
        assert np.array_equal(np.unique(res.trace.chain), np.arange(5))

    def test_single_chain_is_row_zero(self, inst8):
        res = mca_run(inst8.posterior, AdaptConfig(), total_iters=400, seed=2)
        assert res.r == 1
        assert np.all(res.trace.chain == 0)
        assert res.trace.n_rows == 400

    def test_streaming_pips_equal_direct_average(self, inst8):
        """The O(flips) inclusion-time accumulator reproduces the plain
        column mean of the retained indicator rows exactly."""
        cfg = AdaptConfig()
        res = mca_run(inst8.posterior, cfg, total_iters=9000, burnin=700, r=3, seed=13)
        bits = unpack_masks(res.trace.state, 8)
        direct = bits[3 * 700 :].mean(axis=0)
        assert np.array_equal(res.pips, direct)
        assert res.summary.mean_size == bits[3 * 700 :].sum(axis=1).mean()

    def test_top_models_match_direct_counts(self, inst8):
        cfg = AdaptConfig()
        res = mca_run(inst8.posterior, cfg, total_iters=6000, burnin=500, r=2, seed=19)
        masks = res.trace.state[2 * 500 :].astype(np.int64)
        values, counts = np.unique(masks, return_counts=True)
        lookup = {
            tuple(np.flatnonzero(unpack_masks([v], 8)[0])): c
            for v, c in zip(values, counts)
        }
        total = masks.shape[0]
        for model, freq in res.summary.top_models:
            assert freq == lookup[model] / total
        reported = sorted(freq for _, freq in res.summary.top_models)
        expected = sorted(np.sort(counts)[-len(reported) :] / total)
        assert reported == pytest.approx(expected, abs=0)

    def test_chain_counts_agree_with_enumeration(self, inst8):
        """r in {1, 5, 25} all recover the enumerated inclusion probabilities."""
        cfg = AdaptConfig()
        for r, seed in ((1, 101), (5, 102), (25, 103)):
            res = mca_run(
                inst8.posterior, cfg, total_iters=30_000, burnin=300, r=r, seed=seed
            )
            worst = np.abs(res.pips - inst8.enum.pips).max()
            assert worst <= 0.05, (r, worst)

    def test_mutation_rates_consistent(self, inst8):
        """Realized and expected-acceptance mutation estimates agree on a
        long run (they estimate the same stationary quantity)."""
        res = mca_run(inst8.posterior, AdaptConfig(), total_iters=20_000, burnin=1000, seed=3)
        assert abs(res.mutation_realized - res.mutation_rb) <= 0.02

    def test_reproducible(self, inst8):
        cfg = AdaptConfig()
        a = mca_run(inst8.posterior, cfg, total_iters=1500, burnin=100, r=2, seed=99)
        b = mca_run(inst8.posterior, cfg, total_iters=1500, burnin=100, r=2, seed=99)
        assert np.array_equal(a.trace.state, b.trace.state)
        assert np.array_equal(a.trace.log_kernel, b.trace.log_kernel)
        assert np.array_equal(a.pips, b.pips)

    def test_validation_errors(self, inst8):
        cfg = AdaptConfig()
        with pytest.raises(ConfigError):
            mca_run(inst8.posterior, cfg, total_iters=100, r=0)
        with pytest.raises(ConfigError):
            mca_run(inst8.posterior, cfg, total_iters=100, burnin=100)
        with pytest.raises(ConfigError):
            mca_run(inst8.posterior, cfg, total_iters=3, r=5)
        with pytest.raises(ConfigError):
            mca_run(inst8.posterior, cfg, total_iters=100, update_rule="gibbs")

    def test_trace_bounds(self):
        with pytest.raises(ConfigError):
            Trace(-1)
        tr = Trace(1)
        from bvsampler.samplers import StepRecord

        rec = StepRecord(1.0, 1.0, False, True, 0, 0, 0.0, 0.0, 0.0)
        tr.append(0, rec)
        with pytest.raises(NumericalError):
            tr.append(0, rec)


class TestMultimove:
    def test_only_add_from_empty(self, toy4):
        """At the empty model the move-type draw sees a single option."""
        chain = ChainState.from_gamma(np.zeros(4, dtype=bool), toy4.posterior)
        chain.rng = _ScriptRng(ints=[0, 0], unis=[0.0])
        rec = _advance_multimove(chain, toy4.posterior)
        assert chain.rng.integer_calls[0] == 1
        assert rec.accepted and chain.size == 1

    def test_only_remove_from_full(self, toy4):
        chain = ChainState.from_gamma(np.ones(4, dtype=bool), toy4.posterior)
        chain.rng = _ScriptRng(ints=[0, 0], unis=[0.0])
        rec = _advance_multimove(chain, toy4.posterior)
        assert chain.rng.integer_calls[0] == 1
        assert rec.accepted and chain.size == 3

    def test_swap_preserves_size(self, toy4):
        gamma = np.array([True, True, False, False])
        chain = ChainState.from_gamma(gamma, toy4.posterior)
        chain.rng = _ScriptRng(ints=[2, 0, 0], unis=[0.0])
        rec = _advance_multimove(chain, toy4.posterior)
        assert chain.rng.integer_calls[0] == 3
        assert rec.accepted and chain.size == 2
        assert (chain.gamma != gamma).sum() == 2

    def test_pure_step_leaves_input_alone(self, toy4):
        gamma = np.array([True, False, False, False])
        chain = ChainState.from_gamma(gamma, toy4.posterior, rng=np.random.default_rng(0))
        out = multimove_mh_step(chain, toy4.posterior)
        assert np.array_equal(chain.gamma, gamma)
        assert out is not chain

    def test_one_step_law_matches_exact_matrix(self, toy4):
        """Independent single steps from a fixed state follow the exact
        transition row (plain multinomial three-sigma bounds)."""
        p = 4
        start = np.array([True, False, False, False])
        row = multimove_transition_matrix(kernel_vector(toy4.posterior, p), p)[1]
        chain = ChainState.from_gamma(start, toy4.posterior)
        rng = np.random.default_rng(2024)
        trials = 40_000
        counts = np.zeros(16)
        for _ in range(trials):
            out = multimove_mh_step(chain, toy4.posterior, rng)
            counts[int((out.gamma * (1 << np.arange(p))).sum())] += 1
        freqs = counts / trials
        for k in range(16):
            tol = 3.0 * np.sqrt(row[k] * (1.0 - row[k]) / trials)
            assert abs(freqs[k] - row[k]) <= tol, (k, freqs[k], row[k])

    def test_long_run_matches_enumeration(self, toy4):
        res = multimove_run(toy4.posterior, total_iters=200_000, burnin=2000, seed=6)
        probs = np.exp(toy4.enum.log_probs)
        assert_frequencies_match(res.trace.state[2000:].astype(np.int64), probs)

    def test_run_output_shape(self, toy4):
        res = multimove_run(toy4.posterior, total_iters=500, burnin=50, seed=1)
        assert res.params is None and res.counter is None
        assert res.update_rule == "multimove"
        assert np.all(res.trace.mutated)
        assert res.trace.n_rows == 500


class TestTemperatureLadder:
    def test_geometric_start(self):
        ladder = TemperatureLadder.geometric(4)
        assert np.array_equal(ladder.t, [0.125, 0.25, 0.5, 1.0])
        assert np.array_equal(ladder.rho, [0.125, 0.125, 0.25, 0.5])

    def test_on_target_update_is_identity(self):
        """Realized acceptance equal to the target moves nothing."""
        ladder = TemperatureLadder.geometric(4)
        before_t = ladder.t.copy()
        before_rho = ladder.rho.copy()
        ladder.update(1, ladder.a_hat, 7)
        assert np.array_equal(ladder.t, before_t)
        assert np.array_equal(ladder.rho, before_rho)

    def test_update_direction(self):
        """High acceptance widens the swapped gap, low acceptance narrows it."""
        ladder = TemperatureLadder.geometric(4)
        gap_before = ladder.t[2] - ladder.t[1]
        ladder.update(1, 1.0, 1)
        assert ladder.t[2] - ladder.t[1] > gap_before
        ladder = TemperatureLadder.geometric(4)
        gap_before = ladder.t[2] - ladder.t[1]
        ladder.update(1, 0.0, 1)
        assert ladder.t[2] - ladder.t[1] < gap_before

    def test_invariants_under_random_updates(self):
        ladder = TemperatureLadder.geometric(5)
        rng = np.random.default_rng(3)
        for h in range(1, 501):
            ladder.update(int(rng.integers(4)), float(rng.random()), h)
            assert ladder.t[-1] == 1.0
            assert np.all(np.diff(ladder.t) > 0)
            assert ladder.rho.min() >= ladder.rho_min * (1.0 - 1e-9)
            assert abs(ladder.rho.sum() - 1.0) <= 1e-9
            assert_allclose(np.diff(ladder.t, prepend=0.0), ladder.rho, atol=1e-12)

    def test_validation(self):
        with pytest.raises(ConfigError):
            TemperatureLadder.geometric(1)
        with pytest.raises(ConfigError):
            TemperatureLadder(np.array([0.5, 0.9]), np.array([0.5, 0.4]))
        with pytest.raises(ConfigError):
            TemperatureLadder(np.array([0.5, 1.0]), np.array([0.5, 0.4]))
        with pytest.raises(ConfigError):
            TemperatureLadder(np.array([0.5, 1.0]), np.array([0.5, 0.5]), a_hat=1.5)
        with pytest.raises(ConfigError):
            TemperatureLadder.geometric(4, rho_min=0.1)
        ladder = TemperatureLadder.geometric(3)
        with pytest.raises(ConfigError):
            ladder.update(2, 0.5, 1)
        with pytest.raises(ConfigError):
            ladder.update(0, 0.5, 0)


def make_pt_ensemble(posterior, temps, gammas):
    chains = [
        ChainState.from_gamma(g, posterior, rng=np.random.default_rng(100 + j), temperature=t)
        for j, (t, g) in enumerate(zip(temps, gammas))
    ]
    cfg = AdaptConfig()
    params = [init_proposal_params(posterior.p, posterior.prior.mean_inclusion, cfg) for _ in temps]
    counters = [AdaptCounter() for _ in temps]
    return chains, params, counters, cfg


class TestPtStep:
    def test_equal_temperatures_swap_certainly(self, toy4):
        gammas = [np.zeros(4, dtype=bool), np.array([True, False, False, False])]
        chains, params, counters, cfg = make_pt_ensemble(toy4.posterior, [0.7, 0.7], gammas)
        ladder = TemperatureLadder.geometric(2)
        swap_rng = _ScriptRng(ints=[0], unis=[0.999])
        _, swap = pt_step(
            chains, params, counters, ladder, cfg, toy4.posterior, swap_rng, 1
        )
        assert swap.a == 1.0 and swap.accepted

    def test_equal_likelihoods_swap_certainly(self, toy4):
        gamma = np.array([True, False, False, False])
        chains, params, counters, cfg = make_pt_ensemble(
            toy4.posterior, [0.25, 1.0], [gamma, gamma.copy()]
        )
        # Freeze the flip moves so both replicas still hold the same model
        # when the swap is attempted.
        for ch in chains:
            ch.rng = _CycleRng(0.999, 0.999)
        ladder = TemperatureLadder.geometric(2)
        swap_rng = _ScriptRng(ints=[0], unis=[0.999])
        _, swap = pt_step(
            chains, params, counters, ladder, cfg, toy4.posterior, swap_rng, 1
        )
        assert swap.a == 1.0 and swap.accepted

    def test_accepted_swap_exchanges_models(self, toy4):
        g_hot = np.array([True, True, False, False])
        g_cold = np.array([False, False, True, False])
        chains, params, counters, cfg = make_pt_ensemble(
            toy4.posterior, [0.25, 1.0], [g_hot, g_cold]
        )
        for ch in chains:
            ch.rng = _CycleRng(0.999, 0.999)
        ml_hot, ml_cold = chains[0].log_ml, chains[1].log_ml
        ladder = TemperatureLadder.geometric(2)
        swap_rng = _ScriptRng(ints=[0], unis=[0.0])
        _, swap = pt_step(
            chains, params, counters, ladder, cfg, toy4.posterior, swap_rng, 1
        )
        assert swap.accepted
        assert np.array_equal(chains[1].gamma, g_hot)
        assert np.array_equal(chains[0].gamma, g_cold)
        assert chains[0].log_ml == ml_cold and chains[1].log_ml == ml_hot
        assert chains[1].temperature == 1.0

    def test_ladder_adapts_even_when_swap_rejected(self, toy4):
        g_hot = np.array([True, True, False, False])
        g_cold = np.array([False, False, True, False])
        chains, params, counters, cfg = make_pt_ensemble(
            toy4.posterior, [0.25, 1.0], [g_hot, g_cold]
        )
        for ch in chains:
            ch.rng = _CycleRng(0.999, 0.999)
        ladder = TemperatureLadder.geometric(2)
        before = ladder.t.copy()
        swap_rng = _ScriptRng(ints=[0], unis=[1.0])
        _, swap = pt_step(
            chains, params, counters, ladder, cfg, toy4.posterior, swap_rng, 1
        )
        assert not swap.accepted
        assert np.array_equal(chains[1].gamma, g_cold)
        assert not np.array_equal(ladder.t, before)


@pytest.fixture(scope="module")
def pt8(inst8):
    return pt_run(
        inst8.posterior, AdaptConfig(), m=4, total_sweeps=3000, burnin=500, seed=77
    )


class TestPtRun:
    def test_cold_chain_matches_enumeration(self, pt8, inst8):
        assert np.abs(pt8.pips - inst8.enum.pips).max() <= 0.05

    def test_cold_accounting_exact(self, pt8):
        """Streamed cold-slot estimates equal the direct average of the
        reconstructed post-swap cold states."""
        m, S, p = 4, 3000, 8
        state = pt8.trace.state.reshape(S, m)
        cold_post = state[:, 3].copy()
        hit = pt8.swap_accepted & (pt8.swap_pair == 2)
        cold_post[hit] = state[hit, 2]
        bits = unpack_masks(cold_post, p)[500:]
        assert np.array_equal(pt8.pips, bits.mean(axis=0))
        assert pt8.summary.mean_size == bits.sum(axis=1).mean()

    def test_structure(self, pt8):
        assert pt8.cold_index == 3
        assert pt8.ladder_history.shape == (3000, 4)
        assert all(c.i == 3000 for c in pt8.counters)
        assert np.all(pt8.swap_pair < 3)
        for j, ch in enumerate(pt8.chains):
            assert ch.temperature == pt8.ladder.t[j]
        assert np.all(pt8.ladder_history[:, -1] == 1.0)
        assert 0.0 < pt8.swap_rate() <= 1.0

    def test_reproducible(self, inst8):
        a = pt_run(inst8.posterior, AdaptConfig(), m=3, total_sweeps=500, seed=31)
        b = pt_run(inst8.posterior, AdaptConfig(), m=3, total_sweeps=500, seed=31)
        assert np.array_equal(a.trace.state, b.trace.state)
        assert np.array_equal(a.swap_a, b.swap_a)
        assert np.array_equal(a.ladder.t, b.ladder.t)
        assert np.array_equal(a.pips, b.pips)

    def test_validation(self, inst8):
        cfg = AdaptConfig()
        with pytest.raises(ConfigError):
            pt_run(inst8.posterior, cfg, m=1, total_sweeps=100)
        with pytest.raises(ConfigError):
            pt_run(inst8.posterior, cfg, m=3, total_sweeps=100, burnin=100)
        with pytest.raises(ConfigError):
            pt_run(
                inst8.posterior,
                cfg,
                m=3,
                total_sweeps=100,
                ladder=TemperatureLadder.geometric(4),
            )


class TestSystematicResample:
    def test_uniform_weights_keep_everyone(self):
        w = np.full(8, 1.0 / 8)
        for seed in range(50):
            idx = systematic_resample(w, np.random.default_rng(seed))
            assert np.array_equal(np.sort(idx), np.arange(8))

    def test_point_mass_duplicates_single_ancestor(self):
        w = np.zeros(6)
        w[0] = 1.0
        idx = systematic_resample(w, np.random.default_rng(0))
        assert np.array_equal(idx, np.zeros(6, dtype=np.int64))

    def test_counts_floor_or_ceil(self):
        rng = np.random.default_rng(12)
        n = 32
        for _ in range(200):
            w = rng.dirichlet(np.ones(n))
            idx = systematic_resample(w, rng)
            counts = np.bincount(idx, minlength=n)
            assert np.all(counts >= np.floor(n * w - 1e-9))
            assert np.all(counts <= np.ceil(n * w + 1e-9))

    def test_unbiased_over_many_seeds(self):
        """Means of offspring counts equal N w_j within three standard errors."""
        w = np.array([0.437, 0.243, 0.18, 0.09, 0.05])
        w = w / w.sum()
        rng = np.random.default_rng(99)
        reps = 100_000
        counts = np.zeros((reps, 5))
        for i in range(reps):
            counts[i] = np.bincount(systematic_resample(w, rng), minlength=5)
        mean = counts.mean(axis=0)
        sem = counts.std(axis=0, ddof=1) / np.sqrt(reps)
        assert np.all(np.abs(mean - 5 * w) <= 3 * sem + 1e-12)

    def test_validation(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            systematic_resample(np.array([0.7, 0.7]), rng)
        with pytest.raises(ValueError):
            systematic_resample(np.array([1.5, -0.5]), rng)
        with pytest.raises(ValueError):
            systematic_resample(np.array([np.nan, 1.0]), rng)
        with pytest.raises(ValueError):
            systematic_resample(np.array([]), rng)


@pytest.fixture(scope="module")
def smc8(inst8):
    return smc_run(
        inst8.posterior, AdaptConfig(), n_particles=600, k_moves=4, seed=2101
    )


class TestSmc:
    def test_flat_likelihood_finishes_in_one_stage(self):
        """Constant marginal likelihood: zero-power weights, full bridge
        in one step, and the exact normalizer."""
        rng = np.random.default_rng(44)
        n, p = 25, 3
        data = Dataset(rng.normal(size=n), np.zeros((n, p)))
        prior = PriorSpec(RidgePrior(4.0), FixedInclusion(0.4))
        post = ModelPosterior(data, prior)
        from bvsampler import enumerate_posterior

        enum = enumerate_posterior(data, prior, posterior=post)
        res = smc_run(post, AdaptConfig(), n_particles=64, k_moves=2, seed=7)
        assert res.n_stages == 1
        assert res.stages[0].t == 1.0
        assert res.stages[0].ess == 64.0
        assert res.log_normalizer == pytest.approx(enum.log_normalizer, abs=1e-10)
        assert np.all(np.abs(res.pips - 0.4) <= 0.2)

    def test_particles_match_enumeration(self, smc8, inst8):
        assert np.abs(smc8.pips - inst8.enum.pips).max() <= 0.05

    def test_normalizer_near_enumeration(self, smc8, inst8):
        assert abs(smc8.log_normalizer - inst8.enum.log_normalizer) <= 0.3

    def test_stage_schedule(self, smc8):
        ts = [s.t for s in smc8.stages]
        prevs = [s.t_prev for s in smc8.stages]
        assert prevs[0] == 0.0
        assert ts[-1] == 1.0
        assert all(t > tp for t, tp in zip(ts, prevs))
        assert prevs[1:] == ts[:-1]
        n, c = smc8.n_particles, smc8.c
        for s in smc8.stages:
            assert s.ess <= n * (1 + 1e-12)
            if s.t < 1.0:
                assert s.ess >= c * n - 0.02 * n
            assert 0 < s.unique_particles <= n

    def test_tuning_state(self, smc8):
        assert smc8.counter.i == smc8.k_moves * smc8.n_particles
        eps = smc8.params.epsilon
        assert np.all((smc8.params.add > eps) & (smc8.params.add < 1 - eps))
        assert smc8.gammas.shape == (600, 8)
        assert smc8.summary.n_samples == 600

    def test_reproducible(self, inst8):
        a = smc_run(inst8.posterior, AdaptConfig(), n_particles=200, k_moves=2, seed=5)
        b = smc_run(inst8.posterior, AdaptConfig(), n_particles=200, k_moves=2, seed=5)
        assert a.log_normalizer == b.log_normalizer
        assert np.array_equal(a.pips, b.pips)
        assert [s.t for s in a.stages] == [s.t for s in b.stages]

    def test_degenerate_weights_raise(self, inst8):
        class BrokenPosterior(ModelPosterior):
            def log_marginal(self, gamma):
                return float("-inf")

        broken = BrokenPosterior(inst8.data, inst8.prior)
        with pytest.raises(DegenerateWeightsError):
            smc_run(broken, AdaptConfig(), n_particles=16, k_moves=1, seed=1)

    def test_validation(self, inst8):
        cfg = AdaptConfig()
        with pytest.raises(ConfigError):
            smc_run(inst8.posterior, cfg, n_particles=1, k_moves=1)
        with pytest.raises(ConfigError):
            smc_run(inst8.posterior, cfg, n_particles=10, k_moves=0)
        with pytest.raises(ConfigError):
            smc_run(inst8.posterior, cfg, n_particles=10, k_moves=1, c=1.0)
