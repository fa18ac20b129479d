"""Declarative model specification and assembly into standardized effects.

An effect declaration names a covariate, a basis/precision kind and the
covariate distribution used for standardization. Assembly turns the
declarations into standardized effects, builds the decomposition tree from
the declared tags, and evaluates all design blocks on the training rows.
Standardization depends only on the declared supports, never on the data,
so the same assembled effects evaluate consistently on new observations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bases import (
    BSplineBasis1D,
    IndicatorBasis,
    LinearBasis,
    lattice_adjacency,
    prune_basis,
    tensor_basis,
)
from .distributions import CovariateDistribution, PointCloud, UniformInterval, UniformLevels
from .exceptions import DomainError, ValidationError
from .gmrf import build_icar, build_iid, build_rw1
from .priors import PriorSpec
from .standardize import StandardizedEffect, split_pspline, standardize, zero_mean_constraint
from .tree import DecompTree, EffectLabel, build_default_tree

EFFECT_KINDS = ("linear", "pspline", "iid", "rw1", "spatial2d")

__all__ = ["EffectDecl", "ModelSpec", "Dataset", "AssembledModel", "assemble"]


@dataclass(frozen=True)
class EffectDecl:
    """One declared model effect.

    kind:
      linear    - single coefficient on the standardized covariate
      pspline   - B-spline with curvature penalty, split into linear +
                  non-linear standardized components (two tree leaves)
      iid       - exchangeable level effect (identity precision)
      rw1       - first-order random walk over ordered levels
      spatial2d - tensor B-spline surface over a point cloud, pruned to the
                  supported cells, with an ICAR penalty on the cell lattice
    """

    effect_id: str
    kind: str
    covariate: str | tuple[str, str]
    dist: CovariateDistribution
    side: str = "abiotic"
    role: str = "main"
    group: str | None = None
    n_basis: int = 20
    n_basis_2d: tuple[int, int] = (8, 8)

    def __post_init__(self):
        if self.kind not in EFFECT_KINDS:
            raise ValidationError(f"unknown effect kind {self.kind!r}")
        if self.kind == "spatial2d" and not isinstance(self.dist, PointCloud):
            raise ValidationError("spatial2d effects need a point-cloud distribution")
        if self.kind == "pspline" and not isinstance(self.dist, UniformInterval):
            raise ValidationError("pspline effects need an interval distribution")
        if self.kind in ("iid", "rw1") and not isinstance(self.dist, UniformLevels):
            raise ValidationError(f"{self.kind} effects need a discrete level distribution")
        if self.group is None:
            object.__setattr__(self, "group", self.effect_id)

    @property
    def leaf_ids(self) -> tuple[str, ...]:
        if self.kind == "pspline":
            return (f"{self.effect_id}_lin", f"{self.effect_id}_nonlin")
        return (self.effect_id,)

    def labels(self) -> list[EffectLabel]:
        return [
            EffectLabel(leaf, side=self.side, role=self.role, group=self.group)
            for leaf in self.leaf_ids
        ]


@dataclass
class ModelSpec:
    """Bernoulli-logit model: intercept + standardized additive effects."""

    effects: list[EffectDecl]
    priors: dict[str, PriorSpec]
    intercept: bool = True
    mu_prior_sd: float = 10.0

    def __post_init__(self):
        ids = [leaf for e in self.effects for leaf in e.leaf_ids]
        if len(set(ids)) != len(ids):
            raise ValidationError("effect leaf ids are not unique")

    def build_tree(self) -> DecompTree | None:
        if not self.effects:
            return None  # intercept-only model
        labels = [lab for e in self.effects for lab in e.labels()]
        tree = build_default_tree(labels)
        missing = {"total_variance", *(s.name for s in tree.splits)} - set(self.priors)
        if missing:
            raise ValidationError(f"missing priors for tree nodes {sorted(missing)}")
        return tree


@dataclass
class Dataset:
    """Tabular presence/absence data bound to named columns."""

    y: np.ndarray
    columns: dict[str, np.ndarray]
    train_mask: np.ndarray

    def __post_init__(self):
        self.y = np.asarray(self.y)
        if not np.all(np.isin(self.y, (0, 1))):
            raise ValidationError("response must be binary 0/1")
        self.y = self.y.astype(float)
        n = self.y.size
        self.columns = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}
        for k, v in self.columns.items():
            if v.shape != (n,):
                raise ValidationError(f"column {k!r} has shape {v.shape}, expected ({n},)")
            if not np.all(np.isfinite(v)):
                raise ValidationError(f"column {k!r} contains non-finite values")
        self.train_mask = np.asarray(self.train_mask, dtype=bool)
        if self.train_mask.shape != (n,):
            raise ValidationError("train mask length mismatch")

    @classmethod
    def from_arrays(cls, y, train_mask=None, **columns) -> "Dataset":
        y = np.asarray(y)
        mask = np.ones(y.size, dtype=bool) if train_mask is None else train_mask
        return cls(y=y, columns=columns, train_mask=mask)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def n_train(self) -> int:
        return int(self.train_mask.sum())

    def rows(self, mask) -> dict[str, np.ndarray]:
        return {k: v[mask] for k, v in self.columns.items()}


def _covariate_values(decl: EffectDecl, columns: dict[str, np.ndarray]) -> np.ndarray:
    if decl.kind == "spatial2d":
        c1, c2 = decl.covariate
        for c in (c1, c2):
            if c not in columns:
                raise ValidationError(f"effect {decl.effect_id!r}: no column {c!r}")
        return np.column_stack([columns[c1], columns[c2]])
    if decl.covariate not in columns:
        raise ValidationError(f"effect {decl.effect_id!r}: no column {decl.covariate!r}")
    x = columns[decl.covariate]
    if isinstance(decl.dist, UniformInterval):
        # bases with unbounded evaluation (linear) still only carry meaning
        # on the declared support the effect was standardized against
        slack = 1e-10 * (decl.dist.upper - decl.dist.lower)
        bad = np.flatnonzero((x < decl.dist.lower - slack) | (x > decl.dist.upper + slack))
        if bad.size:
            raise DomainError(
                f"effect {decl.effect_id!r}: {bad.size} value(s) outside declared "
                f"support [{decl.dist.lower}, {decl.dist.upper}]; first offending "
                f"indices: {bad[:10].tolist()}",
                indices=bad.tolist(),
            )
    return x


def _build_spatial_effect(decl: EffectDecl) -> StandardizedEffect:
    cloud = decl.dist.points
    na, nb = decl.n_basis_2d
    pad_a = 1e-6 * (cloud[:, 0].max() - cloud[:, 0].min() + 1.0)
    pad_b = 1e-6 * (cloud[:, 1].max() - cloud[:, 1].min() + 1.0)
    spec_a = BSplineBasis1D(na, cloud[:, 0].min() - pad_a, cloud[:, 0].max() + pad_a)
    spec_b = BSplineBasis1D(nb, cloud[:, 1].min() - pad_b, cloud[:, 1].max() + pad_b)
    pruned, retained = prune_basis(tensor_basis(spec_a, spec_b), cloud)
    W = lattice_adjacency(retained, (na, nb))
    precision = build_icar(W)
    # per-component quadrature zero-mean constraints pin every null direction
    # while keeping E_Z[f] = 0 exactly (their sum is the overall constraint)
    extra = None
    if precision.null_dim > 1:
        d = zero_mean_constraint(pruned, decl.dist)
        extra = [d * (np.abs(col) > 1e-12) for col in precision.nullspace.T]
    return standardize(pruned, precision, decl.dist, decl.effect_id, extra_constraints=extra)


def build_effects(decl: EffectDecl) -> list[StandardizedEffect]:
    """Standardized effect(s) for one declaration (two for psplines)."""
    if decl.kind == "linear":
        basis = LinearBasis(center=decl.dist.mean(), scale=decl.dist.sd())
        return [standardize(basis, build_iid(1), decl.dist, decl.effect_id)]
    if decl.kind == "pspline":
        basis = BSplineBasis1D(decl.n_basis, decl.dist.lower, decl.dist.upper)
        return list(split_pspline(basis, decl.dist, decl.effect_id))
    if decl.kind == "iid":
        k = decl.dist.n_levels
        return [standardize(IndicatorBasis(k), build_iid(k), decl.dist, decl.effect_id)]
    if decl.kind == "rw1":
        k = decl.dist.n_levels
        return [standardize(IndicatorBasis(k), build_rw1(k), decl.dist, decl.effect_id)]
    if decl.kind == "spatial2d":
        return [_build_spatial_effect(decl)]
    raise ValidationError(f"unknown effect kind {decl.kind!r}")


@dataclass
class AssembledModel:
    """Model bound to data: standardized effects + training design blocks."""

    model: ModelSpec
    tree: DecompTree | None
    effects: dict[str, StandardizedEffect]
    designs: dict[str, np.ndarray]
    y_train: np.ndarray
    decl_by_leaf: dict[str, EffectDecl] = field(default_factory=dict)

    @property
    def leaf_ids(self) -> tuple[str, ...]:
        return () if self.tree is None else self.tree.leaves

    @property
    def n_train(self) -> int:
        return self.y_train.size

    def designs_at(self, columns: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        """Scaled design blocks at new observations (support-checked)."""
        out = {}
        for leaf in self.leaf_ids:
            decl = self.decl_by_leaf[leaf]
            out[leaf] = self.effects[leaf].design(_covariate_values(decl, columns))
        return out

    def linear_predictor(self, coefficients: dict[str, np.ndarray], mu: float,
                         designs: dict[str, np.ndarray] | None = None,
                         n: int | None = None) -> np.ndarray:
        if designs is None:
            designs, n = self.designs, self.n_train
        if n is None:
            if not designs:
                raise ValidationError("cannot infer row count without design blocks")
            n = next(iter(designs.values())).shape[0]
        eta = np.full(n, float(mu))
        for leaf, G in designs.items():
            u = coefficients[leaf]
            values = u.values if hasattr(u, "values") else np.asarray(u, dtype=float)
            eta = eta + G @ values
        return eta


def assemble(model: ModelSpec, data: Dataset | None) -> AssembledModel:
    """Standardize all declared effects and evaluate them on the training rows.

    ``data=None`` assembles with empty design blocks (prior-only inference).
    """
    tree = model.build_tree()
    effects: dict[str, StandardizedEffect] = {}
    designs: dict[str, np.ndarray] = {}
    decl_by_leaf: dict[str, EffectDecl] = {}
    train_cols = data.rows(data.train_mask) if data is not None else None
    for decl in model.effects:
        for eff in build_effects(decl):
            effects[eff.effect_id] = eff
            decl_by_leaf[eff.effect_id] = decl
            if train_cols is None:
                designs[eff.effect_id] = np.zeros((0, eff.n_coef))
            else:
                designs[eff.effect_id] = eff.design(_covariate_values(decl, train_cols))
    expected = set(tree.leaves) if tree is not None else set()
    if set(effects) != expected:
        raise ValidationError(
            f"tree leaves {sorted(expected)} do not match effects {sorted(effects)}"
        )
    y_train = data.y[data.train_mask] if data is not None else np.zeros(0)
    return AssembledModel(
        model=model,
        tree=tree,
        effects=effects,
        designs=designs,
        y_train=y_train,
        decl_by_leaf=decl_by_leaf,
    )
