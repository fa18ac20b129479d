"""Blocked adaptive Metropolis-within-Gibbs over HD coordinates and effects.

One iteration performs: (a) a multivariate random-walk update of the
unconstrained hyperparameter coordinates with an adapted proposal covariance
(non-centered: coefficients keep their whitened values, so the likelihood
sees rescaled effects); (b) an interweaved centered update of the same
coordinates holding the latent effects fixed (no likelihood evaluation,
coefficients rescaled on acceptance) to keep hyperparameter mixing robust
when the likelihood is informative; (c) a scalar intercept update; and
(d) one joint Gaussian update per coefficient block in prior-whitened
coordinates, which both enforces the effect constraints exactly and makes
the prior-precision preconditioning an identity proposal.

Adaptation (proposal scales by Robbins-Monro toward the target acceptance
rates, hyper covariance from the chain history) runs during burn-in only,
so retained samples come from a fixed kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DiagnosticError, ValidationError
from .gmrf import CoefficientBlock
from .model import AssembledModel, Dataset, ModelSpec, assemble
from .priors import HDEvaluator, log_prior_unconstrained, prior_median_theta
from .tree import HDParams, from_unconstrained, n_coordinates, to_variances

__all__ = [
    "McmcSettings",
    "ModelState",
    "PosteriorSample",
    "FitResult",
    "log_posterior",
    "fit",
    "predict",
    "metrics",
    "split_rhat",
]


@dataclass(frozen=True)
class McmcSettings:
    chains: int = 4
    iterations: int = 6000
    burn_in: int = 3000
    thinning: int = 1
    adaptation_window: int = 50
    target_accept_hyper: float = 0.234
    target_accept_block: float = 0.44
    seed: int = 0

    def __post_init__(self):
        if self.chains < 1:
            raise ValidationError("need at least one chain")
        if not self.iterations > self.burn_in >= 0:
            raise ValidationError("need iterations > burn_in >= 0")
        if self.thinning < 1:
            raise ValidationError("thinning must be >= 1")


@dataclass
class ModelState:
    """Centered-parametrization state: unconstrained HD coordinates,
    intercept, and per-leaf coefficient vectors."""

    theta: np.ndarray
    mu: float
    coefficients: dict[str, np.ndarray]


@dataclass
class PosteriorSample:
    hd: HDParams
    coefficients: dict[str, CoefficientBlock]
    mu: float
    eta: np.ndarray


def bernoulli_loglik(eta: np.ndarray, y: np.ndarray) -> float:
    """Sum of Bernoulli log-probabilities under the logit link."""
    if eta.size == 0:
        return 0.0
    return float(-np.logaddexp(0.0, (1.0 - 2.0 * y) * eta).sum())


def log_posterior(
    assembled: AssembledModel, state: ModelState, likelihood_weight: float = 1.0
) -> float:
    """Joint log density: Bernoulli likelihood + coefficient Gaussians given
    sigma2(hd) + prior on the unconstrained HD coordinates (with Jacobian)."""
    tree = assembled.tree
    lp = 0.0
    if tree is not None:
        lp = log_prior_unconstrained(tree, assembled.model.priors, state.theta)
        if not np.isfinite(lp):
            return -np.inf
        hd = from_unconstrained(tree, state.theta)
        sigma2 = to_variances(tree, hd)
        for leaf in assembled.leaf_ids:
            lp += assembled.effects[leaf].coefficient_logpdf(
                state.coefficients[leaf], sigma2[leaf]
            )
    if assembled.model.intercept:
        sd = assembled.model.mu_prior_sd
        lp += -0.5 * (state.mu / sd) ** 2 - 0.5 * np.log(2.0 * np.pi * sd * sd)
    eta = assembled.linear_predictor(state.coefficients, state.mu)
    return likelihood_weight * bernoulli_loglik(eta, assembled.y_train) + lp


def hyper_param_names(assembled: AssembledModel) -> list[str]:
    names = []
    if assembled.tree is not None:
        names.append("V")
        for s in assembled.tree.splits:
            if s.is_binary:
                names.append(f"omega_{s.name}")
            else:
                names.extend(f"omega_{s.name}_{c}" for c in s.child_names)
    if assembled.model.intercept:
        names.append("mu")
    return names


def _hyper_values(assembled: AssembledModel, hd: HDParams | None, mu: float) -> list[float]:
    vals = []
    if assembled.tree is not None:
        vals.append(hd.total)
        for s in assembled.tree.splits:
            if s.is_binary:
                vals.append(float(hd.proportions[s.name][s.omega_index]))
            else:
                vals.extend(float(v) for v in hd.proportions[s.name])
    if assembled.model.intercept:
        vals.append(mu)
    return vals


class _Accept:
    """Acceptance bookkeeping plus Robbins-Monro scale adaptation."""

    def __init__(self, log_scale: float, target: float):
        self.log_scale = log_scale
        self.scale = math.exp(log_scale)
        self.target = target
        self.n = 0
        self.accepted = 0.0

    def update(self, alpha: float, it: int, adapting: bool):
        self.n += 1
        self.accepted += alpha
        if adapting:
            gamma = min(0.1, 5.0 / (1.0 + it) ** 0.6)
            self.log_scale += gamma * (alpha - self.target)
            self.scale = math.exp(self.log_scale)

    def rate(self) -> float:
        return self.accepted / self.n if self.n else np.nan

    def reset(self):
        self.n = 0
        self.accepted = 0.0


def _check_divergent(acc: dict[str, "_Accept"]) -> dict[str, float]:
    """Post-burn-in acceptance rates; error when a kernel is pinned at 0/1."""
    rates = {name: a.rate() for name, a in acc.items()}
    pinned = {
        name: r
        for name, r in rates.items()
        if acc[name].n >= 50 and (r < 0.01 or r > 0.99)
    }
    if pinned:
        raise DiagnosticError(
            "divergent adaptation, acceptance pinned after burn-in: "
            + ", ".join(f"{k}={v:.3f}" for k, v in pinned.items())
        )
    return rates


def _run_chain(
    assembled: AssembledModel,
    settings: McmcSettings,
    rng: np.random.Generator,
    likelihood_weight: float,
):
    tree = assembled.tree
    priors = assembled.model.priors
    leaves = list(assembled.leaf_ids)
    y = assembled.y_train
    n_obs = y.size
    d = n_coordinates(tree) if tree is not None else 0

    transforms = {l: assembled.effects[l].whitening_transform() for l in leaves}
    Z = {l: assembled.designs[l] @ transforms[l] for l in leaves}
    free_dims = {l: transforms[l].shape[1] for l in leaves}

    evaluator = HDEvaluator(tree, priors) if tree is not None else None

    def eval_theta(theta):
        """(log prior incl. Jacobian, per-leaf sigma) or (-inf, None)."""
        if tree is None:
            return 0.0, np.zeros(0)
        lp, s2 = evaluator.evaluate(theta)
        if s2 is None:
            return -np.inf, None
        return lp, np.sqrt(s2)

    # initialization: HD coordinates at prior medians, coefficients at zero,
    # intercept at the empirical logit
    theta = prior_median_theta(tree, priors).copy() if tree is not None else np.zeros(0)
    if assembled.model.intercept and n_obs:
        p0 = float(np.clip(y.mean(), 0.01, 0.99))
        mu = float(np.log(p0) - np.log1p(-p0))
    else:
        mu = 0.0
    xi = {l: np.zeros(free_dims[l]) for l in leaves}
    qnorm = {l: 0.0 for l in leaves}

    lp_theta, sig = eval_theta(theta)
    Vmat = np.zeros((n_obs, len(leaves)))
    eta = mu + Vmat @ sig
    ll = bernoulli_loglik(eta, y)
    if not (np.isfinite(lp_theta) and np.isfinite(ll)):
        raise DiagnosticError("non-finite log posterior at the initial state")

    mu_sd = assembled.model.mu_prior_sd
    w = likelihood_weight

    prop_chol = np.eye(d)
    theta_history = np.empty((settings.burn_in, d))
    hyper_scale = np.log(2.38 / np.sqrt(max(d, 1)))
    acc = {
        "hyper": _Accept(hyper_scale, settings.target_accept_hyper),
        "hyper_centered": _Accept(hyper_scale, settings.target_accept_hyper),
        "mu": _Accept(np.log(0.5), settings.target_accept_block),
    }
    for l in leaves:
        acc[f"coef[{l}]"] = _Accept(
            np.log(2.38 / np.sqrt(free_dims[l])), settings.target_accept_block
        )

    n_keep = (settings.iterations - settings.burn_in + settings.thinning - 1) // settings.thinning
    hyper_rows = np.empty((n_keep, len(hyper_param_names(assembled))))
    samples: list[PosteriorSample] = []
    kept = 0

    def alpha_of(logr: float) -> float:
        if logr >= 0.0:
            return 1.0
        if logr > -745.0:  # exp underflow floor; also rejects nan/-inf
            return math.exp(logr)
        return 0.0

    for it in range(settings.iterations):
        adapting = it < settings.burn_in

        if d > 0:
            # (a) hyper block, non-centered: effects rescale with sigma
            step = acc["hyper"].scale * (prop_chol @ rng.standard_normal(d))
            theta_new = theta + step
            lp_new, sig_new = eval_theta(theta_new)
            if np.isfinite(lp_new):
                eta_new = mu + Vmat @ sig_new
                ll_new = bernoulli_loglik(eta_new, y)
                logr = w * (ll_new - ll) + lp_new - lp_theta
            else:
                logr = -np.inf
            alpha = alpha_of(logr)
            if rng.uniform() < alpha:
                theta, sig = theta_new, sig_new
                eta, ll, lp_theta = eta_new, ll_new, lp_new
            acc["hyper"].update(alpha, it, adapting)

            # (b) hyper block, centered interweave: effects held fixed, so the
            # likelihood is unchanged; coefficients rescale on acceptance
            step = acc["hyper_centered"].scale * (prop_chol @ rng.standard_normal(d))
            theta_new = theta + step
            lp_new, sig_new = eval_theta(theta_new)
            if np.isfinite(lp_new):
                with np.errstate(divide="ignore"):
                    log_ratio = np.log(sig_new) - np.log(sig)
                term = 0.0
                for k, l in enumerate(leaves):
                    r = (sig[k] / sig_new[k]) ** 2
                    term += -free_dims[l] * log_ratio[k] - 0.5 * qnorm[l] * (r - 1.0)
                logr = term + lp_new - lp_theta
            else:
                logr = -np.inf
            alpha = alpha_of(logr)
            if rng.uniform() < alpha:
                rescale = sig / sig_new
                for k, l in enumerate(leaves):
                    xi[l] *= rescale[k]
                    qnorm[l] *= rescale[k] ** 2
                Vmat *= rescale
                theta, sig, lp_theta = theta_new, sig_new, lp_new
            acc["hyper_centered"].update(alpha, it, adapting)

        # (c) intercept
        if assembled.model.intercept:
            mu_new = mu + acc["mu"].scale * rng.standard_normal()
            eta_new = eta + (mu_new - mu)
            ll_new = bernoulli_loglik(eta_new, y)
            logr = w * (ll_new - ll) - 0.5 * (mu_new**2 - mu**2) / mu_sd**2
            alpha = alpha_of(logr)
            if rng.uniform() < alpha:
                mu, eta, ll = mu_new, eta_new, ll_new
            acc["mu"].update(alpha, it, adapting)

        # (d) coefficient blocks in prior-whitened coordinates
        for k, l in enumerate(leaves):
            xi_new = xi[l] + acc[f"coef[{l}]"].scale * rng.standard_normal(free_dims[l])
            q_new = float(xi_new @ xi_new)
            v_new = Z[l] @ xi_new
            eta_new = eta + sig[k] * (v_new - Vmat[:, k])
            ll_new = bernoulli_loglik(eta_new, y)
            logr = w * (ll_new - ll) - 0.5 * (q_new - qnorm[l])
            alpha = alpha_of(logr)
            if rng.uniform() < alpha:
                xi[l], qnorm[l], eta, ll = xi_new, q_new, eta_new, ll_new
                Vmat[:, k] = v_new
            acc[f"coef[{l}]"].update(alpha, it, adapting)

        if adapting:
            if d > 0:
                theta_history[it] = theta
            if (
                d > 0
                and it + 1 >= max(2 * d, 20)
                and (it + 1) % settings.adaptation_window == 0
            ):
                window = theta_history[max(0, it - 2000) : it + 1]
                cov = np.cov(window.T)
                cov = np.atleast_2d(cov) + 1e-8 * np.eye(d)
                try:
                    prop_chol = np.linalg.cholesky(cov)
                except np.linalg.LinAlgError:
                    pass
            if it + 1 == settings.burn_in:
                for a in acc.values():
                    a.reset()  # diagnostics reflect the frozen kernel only

        if it >= settings.burn_in and (it - settings.burn_in) % settings.thinning == 0:
            coeffs = {
                l: CoefficientBlock(sig[k] * (transforms[l] @ xi[l]), effect_id=l)
                for k, l in enumerate(leaves)
            }
            hd = from_unconstrained(tree, theta) if tree is not None else None
            hyper_rows[kept] = _hyper_values(assembled, hd, mu)
            samples.append(
                PosteriorSample(hd=hd, coefficients=coeffs, mu=mu, eta=eta.copy())
            )
            kept += 1

    rates = _check_divergent(acc)
    return samples, hyper_rows[:kept], rates


def split_rhat(draws: np.ndarray) -> float:
    """Split-R-hat over chains for one scalar parameter; draws is (chains, n)."""
    m, n = draws.shape
    half = n // 2
    if half < 2:
        return np.nan
    seqs = np.concatenate([draws[:, :half], draws[:, half : 2 * half]], axis=0)
    within = seqs.var(axis=1, ddof=1).mean()
    between = half * seqs.mean(axis=1).var(ddof=1)
    if within <= 0:
        return 1.0
    var_plus = (half - 1) / half * within + between / half
    return float(np.sqrt(var_plus / within))


@dataclass
class FitResult:
    samples: list[PosteriorSample]
    hyper_names: list[str]
    hyper_draws: np.ndarray  # (chains, n_keep, n_params)
    rhat: dict[str, float]
    acceptance: dict[str, float]
    assembled: AssembledModel
    settings: McmcSettings
    likelihood_weight: float = 1.0

    @property
    def n_samples(self) -> int:
        return len(self.samples)


def fit(
    model: ModelSpec | AssembledModel,
    data: Dataset | None,
    settings: McmcSettings,
    rng: np.random.Generator | None = None,
    likelihood_weight: float = 1.0,
) -> FitResult:
    """Run all chains and collect thinned post-burn-in samples.

    Chains are deterministic given (settings.seed, chain index); per-parameter
    split-R-hat is computed across chains for every reported hyperparameter.
    """
    assembled = model if isinstance(model, AssembledModel) else assemble(model, data)
    if rng is None:
        chain_rngs = [
            np.random.default_rng(np.random.SeedSequence((settings.seed, 7, c)))
            for c in range(settings.chains)
        ]
    else:
        chain_rngs = rng.spawn(settings.chains)

    all_samples: list[PosteriorSample] = []
    rows = []
    rates_by_chain = []
    for c in range(settings.chains):
        samples, hyper_rows, rates = _run_chain(
            assembled, settings, chain_rngs[c], likelihood_weight
        )
        all_samples.extend(samples)
        rows.append(hyper_rows)
        rates_by_chain.append(rates)

    names = hyper_param_names(assembled)
    n_keep = min(r.shape[0] for r in rows)
    hyper_draws = np.stack([r[:n_keep] for r in rows])
    rhat = {}
    for j, name in enumerate(names):
        rhat[name] = (
            split_rhat(hyper_draws[:, :, j]) if settings.chains > 1 else np.nan
        )
    acceptance = {
        k: float(np.mean([r[k] for r in rates_by_chain])) for k in rates_by_chain[0]
    }
    return FitResult(
        samples=all_samples,
        hyper_names=names,
        hyper_draws=hyper_draws,
        rhat=rhat,
        acceptance=acceptance,
        assembled=assembled,
        settings=settings,
        likelihood_weight=likelihood_weight,
    )


def predict(
    result: FitResult | list[PosteriorSample],
    newdata: dict[str, np.ndarray] | Dataset,
    assembled: AssembledModel | None = None,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """Pointwise p-hat = logistic(posterior mean linear predictor) at new rows.

    Covariate values outside an effect's declared support raise DomainError:
    the standardization (and hence the fitted scales) is only defined there.
    """
    if isinstance(result, FitResult):
        samples = result.samples
        assembled = result.assembled
    else:
        samples = result
        if assembled is None:
            raise ValidationError("predict needs the assembled model for raw samples")
    if isinstance(newdata, Dataset):
        use = np.ones(newdata.n, dtype=bool) if mask is None else mask
        columns = newdata.rows(use)
    else:
        columns = newdata
    designs = assembled.designs_at(columns)
    if not samples:
        raise ValidationError("no posterior samples")
    if columns:
        n = next(iter(columns.values())).shape[0]
    else:
        n = next(iter(designs.values())).shape[0]
    eta_sum = np.zeros(n)
    for s in samples:
        eta_sum += assembled.linear_predictor(s.coefficients, s.mu, designs, n=n)
    eta_mean = eta_sum / len(samples)
    return 1.0 / (1.0 + np.exp(-eta_mean))


def metrics(p_hat: np.ndarray, y_test: np.ndarray) -> dict[str, float]:
    """Test-set predictive scores: log likelihood, Brier, Tjur R2, accuracy."""
    p_hat = np.asarray(p_hat, dtype=float)
    y = np.asarray(y_test, dtype=float)
    if p_hat.shape != y.shape:
        raise ValidationError("p_hat and y_test must have the same length")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValidationError("y_test must be binary")
    pos = y == 1
    if pos.all() or (~pos).all():
        raise ValidationError("Tjur R2 undefined: test set contains a single class")
    with np.errstate(divide="ignore"):
        loglik = float(np.sum(np.where(pos, np.log(p_hat), np.log1p(-p_hat))))
    return {
        "loglik": loglik,
        "brier": float(np.mean((p_hat - y) ** 2)),
        "tjur_r2": float(p_hat[pos].mean() - p_hat[~pos].mean()),
        "accuracy": float(np.mean((p_hat > 0.5) == pos)),
    }
