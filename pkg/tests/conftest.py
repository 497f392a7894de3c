"""Shared synthetic instances with enumerated gold references."""

from types import SimpleNamespace

import numpy as np
import pytest

from bvsampler import (
    Dataset,
    FixedInclusion,
    ModelPosterior,
    PriorSpec,
    RidgePrior,
    enumerate_posterior,
)


def make_instance(*, n, p, betas, noise, g, h, seed, rho=0.0, limit=20):
    """Small regression instance plus its exactly enumerated posterior."""
    rng = np.random.default_rng(seed)
    common = rng.normal(size=(n, 1))
    X = np.sqrt(rho) * common + np.sqrt(1.0 - rho) * rng.normal(size=(n, p))
    beta = np.zeros(p)
    beta[: len(betas)] = betas
    y = X @ beta + noise * rng.normal(size=n)
    data = Dataset(y, X)
    prior = PriorSpec(RidgePrior(g), FixedInclusion(h))
    posterior = ModelPosterior(data, prior)
    enum = enumerate_posterior(data, prior, limit=limit, posterior=posterior)
    return SimpleNamespace(
        data=data, prior=prior, posterior=posterior, enum=enum, p=p, beta=beta
    )


@pytest.fixture(scope="session")
def toy4():
    """p=4 with symmetric 0.5 initial proposals and no tiny model masses."""
    return make_instance(
        n=30, p=4, betas=[0.6, -0.5], noise=1.0, g=10.0, h=0.5, seed=20260821
    )


@pytest.fixture(scope="session")
def inst8():
    """p=8 working instance: two strong signals, one borderline."""
    return make_instance(
        n=40, p=8, betas=[1.0, -0.8, 0.55], noise=0.8, g=25.0, h=2.5 / 8, seed=915551
    )
