"""Shared Monte Carlo helpers for the standardization contract tests."""

import numpy as np
import pytest


def mc_effect_variance(effect, sigma2, n_draws, rng, chunk=200_000):
    """MC estimate of Var_{X,u}[f(X) | sigma2] with independent (X, u) pairs.

    X is drawn uniformly from the effect's quadrature grid, u from the
    effect's constrained coefficient law; one realization per pair.
    """
    GT = effect.quadrature_design() @ effect.whitening_transform()
    GT = GT * np.sqrt(sigma2)
    q = GT.shape[0]
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_draws:
        m = min(chunk, n_draws - done)
        z = rng.standard_normal((m, GT.shape[1]))
        ix = rng.integers(0, q, size=m)
        f = np.einsum("ij,ij->i", GT[ix], z)
        total += f.sum()
        total_sq += (f * f).sum()
        done += m
    mean = total / n_draws
    return total_sq / n_draws - mean * mean


@pytest.fixture
def mc_variance():
    return mc_effect_variance
