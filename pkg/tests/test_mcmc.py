"""Posterior evaluation, sampler correctness oracles, prediction, metrics."""

import numpy as np
import pytest
from scipy.stats import norm

from hdsdm.distributions import UniformInterval, UniformLevels
from hdsdm.exceptions import ValidationError
from hdsdm.gmrf import CoefficientBlock
from hdsdm.mcmc import (
    McmcSettings,
    ModelState,
    bernoulli_loglik,
    fit,
    hyper_param_names,
    log_posterior,
    metrics,
    predict,
    split_rhat,
)
from hdsdm.model import Dataset, EffectDecl, ModelSpec, assemble
from hdsdm.priors import PriorSpec


def toy_model():
    """One linear abiotic effect + one 2-level iid biotic effect."""
    effects = [
        EffectDecl("lin", "linear", "x", UniformInterval(-1.0, 1.0), side="abiotic"),
        EffectDecl("ran", "iid", "g", UniformLevels(2), side="biotic"),
    ]
    priors = {
        "total_variance": PriorSpec("total_variance", "jeffreys"),
        "abiotic_vs_biotic": PriorSpec("abiotic_vs_biotic", "uniform"),
    }
    return ModelSpec(effects=effects, priors=priors)


def toy_data(n=5, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset.from_arrays(
        y=rng.integers(0, 2, n),
        x=rng.uniform(-1, 1, n),
        g=rng.integers(1, 3, n).astype(float),
    )


class TestLogPosterior:
    def test_zero_state_likelihood_is_n_log_half(self):
        asm = assemble(toy_model(), toy_data(n=5))
        state = ModelState(
            theta=np.array([0.1, -0.3]),
            mu=0.0,
            coefficients={l: np.zeros(asm.effects[l].n_coef) for l in asm.leaf_ids},
        )
        full = log_posterior(asm, state, likelihood_weight=1.0)
        prior_only = log_posterior(asm, state, likelihood_weight=0.0)
        assert full - prior_only == pytest.approx(5 * np.log(0.5), abs=1e-12)

    def test_prior_only_equals_prior_plus_coefficient_terms(self):
        asm = assemble(toy_model(), toy_data(n=7))
        rng = np.random.default_rng(1)
        theta = np.array([0.4, 0.2])
        coeffs = {
            "lin": rng.normal(size=1),
            "ran": np.array([0.7, -0.7]) / np.sqrt(2) * rng.normal(),
        }
        state = ModelState(theta=theta, mu=0.5, coefficients=coeffs)
        got = log_posterior(asm, state, likelihood_weight=0.0)

        from hdsdm.priors import log_prior_unconstrained
        from hdsdm.tree import from_unconstrained, to_variances

        hd = from_unconstrained(asm.tree, theta)
        s2 = to_variances(asm.tree, hd)
        expected = log_prior_unconstrained(asm.tree, asm.model.priors, theta)
        for leaf in asm.leaf_ids:
            expected += asm.effects[leaf].coefficient_logpdf(coeffs[leaf], s2[leaf])
        expected += norm.logpdf(0.5, scale=asm.model.mu_prior_sd)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_matches_bruteforce_reimplementation(self):
        # independent oracle on a 5-observation toy model: Bernoulli pmf +
        # eigendecomposition-based subspace Gaussians + closed-form HD prior
        asm = assemble(toy_model(), toy_data(n=5))
        rng = np.random.default_rng(2)
        theta = np.array([0.3, -0.6])
        u_lin = rng.normal(size=1)
        a = rng.normal()
        u_ran = np.array([a, -a])
        mu = 0.27
        state = ModelState(theta=theta, mu=mu, coefficients={"lin": u_lin, "ran": u_ran})
        got = log_posterior(asm, state)

        V, omega = np.exp(theta[0]), 1.0 / (1.0 + np.exp(-theta[1]))
        s2 = {"lin": V * omega, "ran": V * (1 - omega)}
        # Jeffreys on V (truncated, normalized) + uniform omega, with Jacobian
        expected = -np.log(V) - np.log(60.0) + theta[0] + np.log(omega * (1 - omega))
        for leaf, u in (("lin", u_lin), ("ran", u_ran)):
            eff = asm.effects[leaf]
            cov = (
                eff.law.covariance() / eff.scale_constant**2 * s2[leaf]
            )
            lam, vec = np.linalg.eigh(cov)
            nz = lam > 1e-12 * lam.max()
            w = vec[:, nz].T @ u
            expected += -0.5 * (
                np.sum(np.log(2 * np.pi * lam[nz])) + np.sum(w**2 / lam[nz])
            )
        expected += norm.logpdf(mu, scale=asm.model.mu_prior_sd)
        eta = (
            mu
            + asm.designs["lin"] @ u_lin
            + asm.designs["ran"] @ u_ran
        )
        p = 1 / (1 + np.exp(-eta))
        y = asm.y_train
        expected += np.sum(y * np.log(p) + (1 - y) * np.log(1 - p))
        assert got == pytest.approx(expected, rel=1e-10)

    def test_bernoulli_loglik_stable(self):
        eta = np.array([500.0, -500.0])
        assert bernoulli_loglik(eta, np.array([1.0, 0.0])) == pytest.approx(0.0)
        assert np.isfinite(bernoulli_loglik(eta, np.array([0.0, 1.0])))

    def test_single_block_change_is_local(self):
        # changing one coefficient block moves only that block's Gaussian
        # term (prior-weight view) plus the likelihood (full view)
        asm = assemble(toy_model(), toy_data(n=9))
        rng = np.random.default_rng(11)
        theta = np.array([0.2, -0.1])
        coeffs = {"lin": rng.normal(size=1), "ran": np.array([0.4, -0.4])}
        state = ModelState(theta=theta, mu=0.1, coefficients=coeffs)
        new_coeffs = dict(coeffs)
        new_coeffs["ran"] = np.array([-0.9, 0.9])
        new_state = ModelState(theta=theta, mu=0.1, coefficients=new_coeffs)

        from hdsdm.tree import from_unconstrained, to_variances

        s2 = to_variances(asm.tree, from_unconstrained(asm.tree, theta))
        gauss_delta = asm.effects["ran"].coefficient_logpdf(
            new_coeffs["ran"], s2["ran"]
        ) - asm.effects["ran"].coefficient_logpdf(coeffs["ran"], s2["ran"])
        prior_delta = log_posterior(asm, new_state, 0.0) - log_posterior(asm, state, 0.0)
        assert prior_delta == pytest.approx(gauss_delta, rel=1e-12)

        lik_delta = bernoulli_loglik(
            asm.linear_predictor(new_coeffs, 0.1), asm.y_train
        ) - bernoulli_loglik(asm.linear_predictor(coeffs, 0.1), asm.y_train)
        full_delta = log_posterior(asm, new_state) - log_posterior(asm, state)
        assert full_delta == pytest.approx(gauss_delta + lik_delta, rel=1e-12)


class TestDivergenceCheck:
    def test_pinned_rates_raise(self):
        from hdsdm.exceptions import DiagnosticError
        from hdsdm.mcmc import _Accept, _check_divergent

        ok = _Accept(0.0, 0.3)
        for _ in range(100):
            ok.update(0.4, 0, adapting=False)
        stuck = _Accept(0.0, 0.3)
        for _ in range(100):
            stuck.update(0.0, 0, adapting=False)
        assert _check_divergent({"a": ok})["a"] == pytest.approx(0.4)
        with pytest.raises(DiagnosticError, match="pinned"):
            _check_divergent({"a": ok, "b": stuck})

    def test_short_kernels_not_flagged(self):
        from hdsdm.mcmc import _Accept, _check_divergent

        brief = _Accept(0.0, 0.3)
        for _ in range(10):
            brief.update(1.0, 0, adapting=False)
        _check_divergent({"a": brief})  # fewer than 50 proposals: no error


class TestSplitRhat:
    def test_identical_chains_unity(self):
        rng = np.random.default_rng(3)
        row = rng.normal(size=400)
        draws = np.stack([row, row.copy()])
        assert split_rhat(draws) == pytest.approx(1.0, abs=0.05)

    def test_shifted_chains_flagged(self):
        rng = np.random.default_rng(4)
        draws = np.stack([rng.normal(size=400), rng.normal(size=400) + 5.0])
        assert split_rhat(draws) > 1.5


class TestFit:
    def test_settings_validation(self):
        with pytest.raises(ValidationError):
            McmcSettings(iterations=100, burn_in=100)
        with pytest.raises(ValidationError):
            McmcSettings(chains=0)
        with pytest.raises(ValidationError):
            McmcSettings(thinning=0)

    def test_intercept_only_recovery_against_grid_oracle(self):
        rng = np.random.default_rng(5)
        n = 500
        y = (rng.uniform(size=n) < 0.7).astype(int)
        data = Dataset.from_arrays(y=y)
        model = ModelSpec(effects=[], priors={})
        settings = McmcSettings(
            chains=2, iterations=4000, burn_in=1000, thinning=1, seed=11
        )
        result = fit(model, data, settings)
        post_mean_p = np.mean([1 / (1 + np.exp(-s.mu)) for s in result.samples])

        # grid-integration oracle over mu with the same N(0, 10^2) prior
        grid = np.linspace(-4, 4, 20001)
        logpost = (
            norm.logpdf(grid, scale=10.0)
            + y.sum() * -np.logaddexp(0, -grid)
            + (n - y.sum()) * -np.logaddexp(0, grid)
        )
        wgt = np.exp(logpost - logpost.max())
        oracle = np.sum(wgt / (1 + np.exp(-grid))) / wgt.sum()
        assert post_mean_p == pytest.approx(oracle, abs=0.01)
        assert abs(post_mean_p - y.mean()) < 0.05

    def test_deterministic_given_seed(self):
        model = toy_model()
        data = toy_data(n=60, seed=6)
        settings = McmcSettings(chains=2, iterations=400, burn_in=200, seed=3)
        r1 = fit(model, data, settings)
        r2 = fit(model, data, settings)
        np.testing.assert_array_equal(r1.hyper_draws, r2.hyper_draws)
        np.testing.assert_array_equal(r1.samples[10].eta, r2.samples[10].eta)

    def test_prior_only_uniform_share_centered(self):
        model = toy_model()
        settings = McmcSettings(
            chains=2, iterations=6000, burn_in=1000, thinning=5, seed=4
        )
        result = fit(model, None, settings, likelihood_weight=0.0)
        j = result.hyper_names.index("omega_abiotic_vs_biotic")
        omegas = result.hyper_draws[:, :, j].ravel()
        assert omegas.mean() == pytest.approx(0.5, abs=0.03)
        assert omegas.std() == pytest.approx(np.sqrt(1 / 12), abs=0.03)

    def test_samples_satisfy_constraints(self):
        model = toy_model()
        data = toy_data(n=80, seed=7)
        settings = McmcSettings(chains=1, iterations=300, burn_in=150, seed=5)
        result = fit(model, data, settings)
        for s in result.samples[::25]:
            u = s.coefficients["ran"].values
            assert abs(u.sum()) < 1e-9  # zero-mean over two equal levels

    def test_rhat_reported_per_parameter(self):
        model = toy_model()
        data = toy_data(n=60, seed=8)
        settings = McmcSettings(chains=2, iterations=400, burn_in=200, seed=6)
        result = fit(model, data, settings)
        assert set(result.rhat) == set(hyper_param_names(result.assembled))


class TestPredict:
    def make_result(self):
        model = toy_model()
        data = toy_data(n=40, seed=9)
        asm = assemble(model, data)
        samples = []
        for mu, b in ((0.0, 0.5), (1.0, -0.5), (0.5, 0.0)):
            coeffs = {
                "lin": CoefficientBlock(np.array([b]), "lin"),
                "ran": CoefficientBlock(np.array([0.2, -0.2]), "ran"),
            }
            samples.append(
                type(
                    "S", (), {"coefficients": coeffs, "mu": mu, "hd": None, "eta": None}
                )()
            )
        return asm, samples

    def test_matches_hand_average(self):
        asm, samples = self.make_result()
        new = {"x": np.array([0.0, 0.5, -0.5, 1.0]), "g": np.array([1.0, 2.0, 1.0, 2.0])}
        p = predict(samples, new, assembled=asm)
        # hand computation: eta_s(x, g) = mu_s + b_s * x + u_s[g]
        x_std = (new["x"] - 0.0) / (2.0 / np.sqrt(12.0))
        etas = []
        for mu, b in ((0.0, 0.5), (1.0, -0.5), (0.5, 0.0)):
            u = np.where(new["g"] == 1.0, 0.2, -0.2)
            etas.append(mu + b * x_std + u)
        expected = 1 / (1 + np.exp(-np.mean(etas, axis=0)))
        np.testing.assert_allclose(p, expected, atol=1e-12)

    def test_single_sample_pointwise_logistic(self):
        asm, samples = self.make_result()
        new = {"x": np.array([0.25]), "g": np.array([2.0])}
        p = predict(samples[:1], new, assembled=asm)
        x_std = 0.25 / (2.0 / np.sqrt(12.0))
        eta = 0.0 + 0.5 * x_std - 0.2
        assert p[0] == pytest.approx(1 / (1 + np.exp(-eta)), rel=1e-12)

    def test_zero_coefficients_give_logistic_mean_mu(self):
        asm, _ = self.make_result()
        samples = []
        for mu in (0.3, 0.9):
            coeffs = {
                "lin": CoefficientBlock(np.zeros(1), "lin"),
                "ran": CoefficientBlock(np.zeros(2), "ran"),
            }
            samples.append(
                type(
                    "S", (), {"coefficients": coeffs, "mu": mu, "hd": None, "eta": None}
                )()
            )
        p = predict(samples, {"x": np.array([0.1]), "g": np.array([1.0])}, assembled=asm)
        assert p[0] == pytest.approx(1 / (1 + np.exp(-0.6)), rel=1e-12)

    def test_out_of_support_newdata_rejected(self):
        from hdsdm.exceptions import DomainError

        asm, samples = self.make_result()
        with pytest.raises(DomainError):
            predict(samples, {"x": np.array([5.0]), "g": np.array([1.0])}, assembled=asm)


class TestMetrics:
    def test_perfect_predictions(self):
        out = metrics(np.array([1.0, 0.0, 1.0]), np.array([1, 0, 1]))
        assert out["brier"] == 0.0
        assert out["accuracy"] == 1.0
        assert out["loglik"] == pytest.approx(0.0)

    def test_coin_flip_predictions(self):
        out = metrics(np.full(4, 0.5), np.array([1, 0, 1, 0]))
        assert out["brier"] == pytest.approx(0.25)
        assert out["tjur_r2"] == pytest.approx(0.0)

    def test_hand_computed_three_points(self):
        out = metrics(np.array([0.8, 0.4, 0.6]), np.array([1, 0, 1]))
        assert out["brier"] == pytest.approx(0.12)
        assert out["tjur_r2"] == pytest.approx(0.3)
        assert out["accuracy"] == pytest.approx(1.0)
        assert out["loglik"] == pytest.approx(np.log(0.8) + np.log(0.6) + np.log(0.6))

    def test_single_class_rejected(self):
        with pytest.raises(ValidationError):
            metrics(np.array([0.5, 0.6]), np.array([1, 1]))
