"""Posterior variance partitioning over the declared covariate distributions.

Realized (finite-population) variances are computed per posterior sample as
the variance of the effect's trend over its standardization quadrature grid,
so the partition is measured against exactly the distribution each effect
was scaled under. Linear and non-linear components of one covariate are
summed on the shared grid before taking the variance (they are orthogonal
under that grid by construction, so this equals the sum of their variances).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError
from .mcmc import FitResult, McmcSettings, PosteriorSample, fit
from .model import AssembledModel, Dataset, ModelSpec
from .priors import PriorSpec
from .standardize import StandardizedEffect

__all__ = ["PartitionResult", "finite_pop_variance", "phi", "sensitivity_sweep"]


def finite_pop_variance(effect: StandardizedEffect, coefficients) -> float:
    """Variance of the realized trend over the effect's quadrature grid."""
    values = (
        coefficients.values if hasattr(coefficients, "values") else np.asarray(coefficients)
    )
    f = effect.quadrature_design() @ values
    return float(f.var())


@dataclass
class PartitionResult:
    """Per-sample realized variances and shares, grouped by effect group."""

    group_names: list[str]
    s2: np.ndarray  # (n_samples, n_groups)
    phi: np.ndarray  # (n_samples, n_groups)
    phi_mean: np.ndarray  # (n_groups,)
    n_skipped: int = 0

    def summary_rows(self):
        for j, name in enumerate(self.group_names):
            yield name, float(self.phi_mean[j]), float(self.s2[:, j].mean())


def _default_groups(assembled: AssembledModel) -> list[tuple[str, list[str]]]:
    order: list[str] = []
    members: dict[str, list[str]] = {}
    for leaf in assembled.leaf_ids:
        g = assembled.decl_by_leaf[leaf].group
        if g not in members:
            order.append(g)
            members[g] = []
        members[g].append(leaf)
    return [(g, members[g]) for g in order]


def phi(
    samples: list[PosteriorSample] | FitResult,
    assembled: AssembledModel | None = None,
    groups: list[tuple[str, list[str]]] | None = None,
) -> PartitionResult:
    """Posterior variance shares phi per sample and their posterior mean.

    Samples whose total realized variance is zero carry no defined share and
    are skipped (count reported in ``n_skipped``).
    """
    if isinstance(samples, FitResult):
        assembled = samples.assembled
        samples = samples.samples
    if assembled is None:
        raise ValidationError("phi needs the assembled model for raw sample lists")
    if not samples:
        raise ValidationError("no posterior samples")
    groups = _default_groups(assembled) if groups is None else groups

    quad = {leaf: assembled.effects[leaf].quadrature_design() for leaf in assembled.leaf_ids}
    for name, leaves in groups:
        sizes = {quad[l].shape[0] for l in leaves}
        if len(sizes) != 1:
            raise ValidationError(
                f"group {name!r} mixes effects with different quadrature grids"
            )

    s2 = np.empty((len(samples), len(groups)))
    for i, sample in enumerate(samples):
        for j, (name, leaves) in enumerate(groups):
            trend = sum(quad[l] @ sample.coefficients[l].values for l in leaves)
            s2[i, j] = trend.var()
    totals = s2.sum(axis=1)
    keep = totals > 0
    n_skipped = int((~keep).sum())
    shares = s2[keep] / totals[keep, None]
    if shares.size == 0:
        raise ValidationError("all samples have zero total realized variance")
    return PartitionResult(
        group_names=[g for g, _ in groups],
        s2=s2[keep],
        phi=shares,
        phi_mean=shares.mean(axis=0),
        n_skipped=n_skipped,
    )


@dataclass
class SweepEntry:
    q: float
    result: FitResult
    partition: PartitionResult
    trends: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)


def posterior_mean_trends(
    result: FitResult, groups: list[tuple[str, list[str]]] | None = None
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Posterior-mean effect curves per 1D group, centered to zero quadrature
    mean (the normalization used for the emitted plot data)."""
    assembled = result.assembled
    groups = _default_groups(assembled) if groups is None else groups
    out = {}
    for name, leaves in groups:
        grid = assembled.effects[leaves[0]].dist.grid()
        if np.asarray(grid).ndim != 1:
            continue
        quad = [assembled.effects[l].quadrature_design() for l in leaves]
        acc = np.zeros(len(grid))
        for sample in result.samples:
            for G, leaf in zip(quad, leaves):
                acc += G @ sample.coefficients[leaf].values
        trend = acc / len(result.samples)
        out[name] = (np.asarray(grid), trend - trend.mean())
    return out


def sensitivity_sweep(
    model: ModelSpec,
    data: Dataset | None,
    q_values: list[float],
    settings: McmcSettings,
    split_name: str = "covariates",
) -> list[SweepEntry]:
    """Refit with a symmetric Dirichlet(q) on the covariate split per q value.

    Every fit reuses the same seed and settings, so entries differ only
    through the prior; emits the variance partition and the centered
    posterior-mean trend curves for each run.
    """
    entries = []
    for q in q_values:
        priors = dict(model.priors)
        priors[split_name] = PriorSpec(split_name, "dirichlet", {"q": float(q)})
        model_q = ModelSpec(
            effects=model.effects,
            priors=priors,
            intercept=model.intercept,
            mu_prior_sd=model.mu_prior_sd,
        )
        try:
            result = fit(model_q, data, settings)
        except Exception as err:
            raise RuntimeError(f"sensitivity fit failed at q={q}") from err
        entries.append(
            SweepEntry(
                q=float(q),
                result=result,
                partition=phi(result),
                trends=posterior_mean_trends(result),
            )
        )
    return entries
