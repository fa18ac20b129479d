"""Priors for total variance and proportion parameters.

Includes the shrinkage prior obtained by placing an exponential law on a
Kullback-Leibler-based distance from a zero-contribution base model. For a
proportion of variance this reduces, whenever the sum-of-ranks condition
holds, to a truncated exponential on sqrt(omega) (the "simplified form"),
which is independent of the effect bases and precision matrices. The exact
numeric construction (distance between rank-deficient Gaussian laws) is kept
for validation of that simplification, not for inference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln
from scipy.stats import beta as beta_dist

from .exceptions import CalibrationError, NumericalError, ValidationError
from .gmrf import RANK_TOL
from .tree import DecompTree, HDParams, from_unconstrained, log_jacobian

JEFFREYS_LOG_BOUNDS = (-30.0, 30.0)

__all__ = [
    "PriorSpec",
    "RankInfo",
    "pc_variance_lambda",
    "pc_variance_logpdf",
    "jeffreys_logpdf",
    "pc0_simplified_logpdf",
    "pc0_cdf",
    "pc0_quantile",
    "pc0_sample",
    "pc0_calibrate",
    "dirichlet_q_calibrate",
    "sum_of_ranks_check",
    "kld_distance",
    "pc0_exact_logpdf_numeric",
    "log_prior",
    "log_prior_unconstrained",
    "prior_median_theta",
    "marginal_cdfs",
]


_FAMILIES = {"jeffreys", "pc", "uniform", "beta", "dirichlet", "pc0", "pc0_exact"}


@dataclass(frozen=True)
class PriorSpec:
    """Prior family attached to one tree node.

    node : 'total_variance' or a split name.
    family : jeffreys | pc (on V); uniform | beta | dirichlet | pc0 |
        pc0_exact (on proportions).
    params : family hyperparameters; 'pc' takes lam or (U, alpha); 'beta'
        takes a, b; 'dirichlet' takes q (scalar or vector); 'pc0' takes lam
        or (U, alpha); 'pc0_exact' takes lam plus Sigma0, Sigma1.
    """

    node: str
    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValidationError(f"unknown prior family {self.family!r}")
        if self.family == "pc" and "lam" not in self.params:
            lam = pc_variance_lambda(self.params["U"], self.params["alpha"])
            object.__setattr__(self, "params", {**self.params, "lam": lam})
        if self.family == "pc0" and "lam" not in self.params:
            lam = pc0_calibrate(self.params["U"], self.params["alpha"])
            object.__setattr__(self, "params", {**self.params, "lam": lam})
        for key in ("lam", "q", "a", "b"):
            if key in self.params and np.any(np.asarray(self.params[key]) <= 0):
                raise ValidationError(f"prior {self.node!r}: {key} must be positive")


# ---------------------------------------------------------------------------
# total-variance priors
# ---------------------------------------------------------------------------


def pc_variance_lambda(U: float, alpha: float) -> float:
    """Rate such that P(sqrt(V) > U) = alpha under Exponential(lam) on sqrt(V)."""
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must be in (0,1), got {alpha}")
    if U <= 0:
        raise ValidationError(f"U must be positive, got {U}")
    return -np.log(alpha) / U


def pc_variance_logpdf(V, lam: float):
    """Exponential(lam) on sqrt(V), as a density in V."""
    V = np.asarray(V, dtype=float)
    if np.any(V <= 0):
        raise ValidationError("V must be positive")
    s = np.sqrt(V)
    return np.log(lam) - lam * s - np.log(2.0 * s)


def jeffreys_logpdf(V, log_bounds: tuple[float, float] = JEFFREYS_LOG_BOUNDS):
    """Scale-invariant prior 1/V truncated to log V in ``log_bounds``.

    The truncation makes the prior proper for sampling; the default bounds
    sit far outside any plausible posterior mass on the logit scale.
    """
    V = np.asarray(V, dtype=float)
    if np.any(V <= 0):
        raise ValidationError("V must be positive")
    lo, hi = log_bounds
    logV = np.log(V)
    out = -logV - np.log(hi - lo)
    return np.where((logV >= lo) & (logV <= hi), out, -np.inf)


# ---------------------------------------------------------------------------
# simplified shrinkage prior on a proportion
# ---------------------------------------------------------------------------


def _check_omega_interior(omega):
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0) or np.any(omega >= 1):
        raise ValidationError("omega must lie strictly inside (0, 1)")
    return omega


def _check_lam(lam: float) -> float:
    if lam <= 0:
        raise ValidationError(f"lam must be positive, got {lam}")
    return float(lam)


def pc0_simplified_logpdf(omega, lam: float):
    """log pi(omega) = log[ lam exp(-lam sqrt(omega)) / (2 sqrt(omega) (1 - e^-lam)) ]."""
    omega = _check_omega_interior(omega)
    lam = _check_lam(lam)
    s = np.sqrt(omega)
    return np.log(lam) - lam * s - np.log(2.0 * s) - np.log(-np.expm1(-lam))


def pc0_cdf(omega, lam: float):
    """F(omega) = (1 - e^{-lam sqrt(omega)}) / (1 - e^{-lam}) on [0, 1]."""
    lam = _check_lam(lam)
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0) or np.any(omega > 1):
        raise ValidationError("omega must lie in [0, 1]")
    return np.expm1(-lam * np.sqrt(omega)) / np.expm1(-lam)


def pc0_quantile(p, lam: float):
    """Inverse of ``pc0_cdf``."""
    lam = _check_lam(lam)
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or np.any(p > 1):
        raise ValidationError("probabilities must lie in [0, 1]")
    return (-np.log1p(p * np.expm1(-lam)) / lam) ** 2


def pc0_sample(n: int, lam: float, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draws from the simplified shrinkage prior."""
    return pc0_quantile(rng.uniform(size=n), lam)


def pc0_calibrate(U: float, alpha: float, tol: float = 1e-10) -> float:
    """Rate lam solving P(omega < U) = alpha for the simplified prior.

    Feasibility requires alpha > sqrt(U): as lam -> 0 the CDF at U tends to
    sqrt(U) from above is unreachable, so the target quantile can never sit
    below that limit (equivalently the median can be at most 0.25).
    """
    if not 0 < U < 1:
        raise ValidationError(f"U must be in (0,1), got {U}")
    if not 0 < alpha < 1:
        raise ValidationError(f"alpha must be in (0,1), got {alpha}")
    bound = float(np.sqrt(U))
    if alpha < bound:
        raise CalibrationError(
            f"infeasible target: alpha={alpha} < sqrt(U)={bound:.6f}; "
            "the simplified prior requires alpha >= sqrt(U)",
            bound=bound,
        )
    if alpha - bound < 1e-12:
        raise CalibrationError(
            f"boundary target alpha = sqrt(U) = {bound:.6f} is attained only as lam -> 0",
            bound=bound,
        )

    def residual(lam: float) -> float:
        return float(pc0_cdf(U, lam) - alpha)

    lo = 1e-12
    hi = 1.0
    while residual(hi) < 0:
        hi *= 2.0
        if hi > 1e9:
            raise CalibrationError(f"no rate below 1e9 reaches P(omega<{U}) = {alpha}")
    # bisection on the probability residual
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        r = residual(mid)
        if abs(r) <= tol:
            return mid
        if r < 0:
            lo = mid
        else:
            hi = mid
    raise CalibrationError("bisection failed to reach tolerance")


def dirichlet_q_calibrate(P: int) -> float:
    """Concentration q with even-odds mass near the symmetric share.

    Solves P(logit(1/4) < logit(omega_p) - logit(1/P) < logit(3/4)) = 0.5
    for the symmetric-Dirichlet marginal omega_p ~ Beta(q, (P-1)q).
    """
    if P < 2:
        raise ValidationError(f"need P >= 2 branches, got {P}")

    def logit(x):
        return np.log(x) - np.log1p(-x)

    def expit(x):
        return 1.0 / (1.0 + np.exp(-x))

    lo = expit(logit(0.25) + logit(1.0 / P))
    hi = expit(logit(0.75) + logit(1.0 / P))

    def prob(q: float) -> float:
        return float(
            beta_dist.cdf(hi, q, (P - 1) * q) - beta_dist.cdf(lo, q, (P - 1) * q)
        )

    q_lo, q_hi = 1e-4, 1.0
    while prob(q_hi) < 0.5:
        q_hi *= 2.0
        if q_hi > 1e6:
            raise CalibrationError("calibration target unreachable")
    while prob(q_lo) > 0.5:
        q_lo /= 2.0
        if q_lo < 1e-12:
            raise CalibrationError("calibration target unreachable")
    return float(brentq(lambda q: prob(q) - 0.5, q_lo, q_hi, xtol=1e-12))


# ---------------------------------------------------------------------------
# rank condition and exact distance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RankInfo:
    """Outcome of the sum-of-ranks check R(0) + R(1) <= N."""

    r0: int
    r1: int
    n: int
    upper_bounds: tuple[int, int]
    condition_holds: bool
    method: str  # 'upper_bound' or 'eigen_count'
    conclusive: bool


def _psd_eig(S: np.ndarray):
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValidationError(f"matrix must be square, got {S.shape}")
    if np.abs(S - S.T).max() > 1e-10 * max(np.abs(S).max(), 1.0):
        raise ValidationError("matrix must be symmetric")
    lam, vec = np.linalg.eigh(0.5 * (S + S.T))
    tol = RANK_TOL * max(lam[-1], 0.0)
    if lam[0] < -max(tol, 1e-12):
        raise ValidationError(f"matrix has negative eigenvalue {lam[0]:.3e}")
    nonzero = lam > tol
    return lam, vec, int(np.count_nonzero(nonzero)), nonzero


def _rank(S: np.ndarray) -> int:
    return _psd_eig(S)[2]


def sum_of_ranks_check(
    K0: int,
    N0: int,
    K1: int,
    N1: int,
    N: int,
    Sigma0: np.ndarray | None = None,
    Sigma1: np.ndarray | None = None,
) -> RankInfo:
    """Check R(0) + R(1) <= N, first by upper bounds, then by actual ranks.

    The bounds are R(0) <= min[N0, K0] and R(1) <= min[N1, K1]. When the
    bound sum already fits within N the condition holds with no matrix work;
    otherwise actual ranks are eigen-counted when the covariance matrices are
    supplied, and the check is inconclusive (reported as not holding) when
    they are not.
    """
    for name, v in (("K0", K0), ("N0", N0), ("K1", K1), ("N1", N1), ("N", N)):
        if v < 1:
            raise ValidationError(f"{name} must be a positive integer, got {v}")
    upper = (min(N0, K0), min(N1, K1))
    if upper[0] + upper[1] <= N:
        return RankInfo(
            r0=upper[0],
            r1=upper[1],
            n=N,
            upper_bounds=upper,
            condition_holds=True,
            method="upper_bound",
            conclusive=True,
        )
    if Sigma0 is None or Sigma1 is None:
        return RankInfo(
            r0=upper[0],
            r1=upper[1],
            n=N,
            upper_bounds=upper,
            condition_holds=False,
            method="upper_bound",
            conclusive=False,
        )
    if Sigma0.shape != (N, N) or Sigma1.shape != (N, N):
        raise ValidationError(
            f"covariances must be {N}x{N}, got {Sigma0.shape} and {Sigma1.shape}"
        )
    r0, r1 = _rank(Sigma0), _rank(Sigma1)
    return RankInfo(
        r0=r0,
        r1=r1,
        n=N,
        upper_bounds=upper,
        condition_holds=(r0 + r1 <= N),
        method="eigen_count",
        conclusive=True,
    )


def kld_distance(omega: float, omega0: float, Sigma0: np.ndarray, Sigma1: np.ndarray) -> float:
    """KLD-based distance between the mixture laws at omega and omega0.

    With Sigma(w) = (1-w) Sigma0 + w Sigma1 (possibly rank deficient):

        d^2 = tr[Sigma+(omega0) Sigma(omega)] - R(omega)
              - log(|Sigma(omega)|* / |Sigma(omega0)|*)
              + [R(omega0) - R(omega)] log(2 pi)

    using generalized inverses/determinants and eigen-classified ranks.
    Small negative d^2 from roundoff is clamped to zero; anything below
    -1e-8 raises NumericalError.
    """
    for name, w in (("omega", omega), ("omega0", omega0)):
        if not 0 < w <= 1:
            raise ValidationError(f"{name} must lie in (0, 1], got {w}")
    Sigma0 = np.asarray(Sigma0, dtype=float)
    Sigma1 = np.asarray(Sigma1, dtype=float)
    if Sigma0.shape != Sigma1.shape:
        raise ValidationError("covariances must have the same shape")
    S_w = (1.0 - omega) * Sigma0 + omega * Sigma1
    S_b = (1.0 - omega0) * Sigma0 + omega0 * Sigma1

    lam_w, _, rank_w, nz_w = _psd_eig(S_w)
    lam_b, vec_b, rank_b, nz_b = _psd_eig(S_b)
    if rank_w == 0 or rank_b == 0:
        raise ValidationError("zero covariance matrix in distance computation")

    inv_b = np.zeros_like(lam_b)
    inv_b[nz_b] = 1.0 / lam_b[nz_b]
    pinv_b = (vec_b * inv_b) @ vec_b.T

    trace = float(np.sum(pinv_b * S_w))
    logdet_w = float(np.sum(np.log(lam_w[nz_w])))
    logdet_b = float(np.sum(np.log(lam_b[nz_b])))
    d2 = trace - rank_w - (logdet_w - logdet_b) + (rank_b - rank_w) * np.log(2.0 * np.pi)
    if d2 < -1e-8:
        raise NumericalError(f"squared distance {d2:.3e} is significantly negative")
    return float(np.sqrt(max(d2, 0.0)))


def pc0_exact_logpdf_numeric(
    omega,
    lam: float,
    Sigma0: np.ndarray,
    Sigma1: np.ndarray,
    omega0: float = 1e-6,
    step: float = 1e-5,
) -> np.ndarray:
    """Exact-construction shrinkage density via the numeric distance.

    Places Exponential(lam) on the normalized distance
    dbar(w) = d(w; omega0) sqrt(omega0 / R(1)) (truncated at dbar(1)) and
    changes variables with a central finite difference for dbar'. Validation
    tool only: the simplified closed form is what inference uses.
    """
    lam = _check_lam(lam)
    omega = np.atleast_1d(_check_omega_interior(omega))
    r1 = _rank(Sigma1)
    scale = np.sqrt(omega0 / r1)

    def dbar(w: float) -> float:
        return kld_distance(w, omega0, Sigma0, Sigma1) * scale

    d_max = dbar(1.0)
    out = np.empty(omega.shape)
    for i, w in enumerate(omega):
        lo, hi = max(w - step, 1e-12), min(w + step, 1.0)
        deriv = (dbar(hi) - dbar(lo)) / (hi - lo)
        out[i] = (
            np.log(lam)
            - lam * dbar(w)
            + np.log(abs(deriv))
            - np.log(-np.expm1(-lam * d_max))
        )
    return out if out.size > 1 else float(out[0])


# ---------------------------------------------------------------------------
# joint prior over HD parameters
# ---------------------------------------------------------------------------


def _as_prior_map(priors) -> dict[str, PriorSpec]:
    if isinstance(priors, dict):
        return priors
    return {p.node: p for p in priors}


def _dirichlet_logpdf(props: np.ndarray, conc: np.ndarray) -> float:
    return float(
        gammaln(conc.sum()) - gammaln(conc).sum() + np.sum((conc - 1.0) * np.log(props))
    )


def log_prior(tree: DecompTree, priors, p: HDParams) -> float:
    """Sum of node-wise log prior densities on the natural (V, omega) scale.

    Assumes prior independence across splits. Returns -inf outside prior
    support (e.g. the truncation range of the Jeffreys prior); raises on
    simplex-boundary proportions.
    """
    pm = _as_prior_map(priors)
    missing = {"total_variance", *(s.name for s in tree.splits)} - set(pm)
    if missing:
        raise ValidationError(f"missing priors for nodes {sorted(missing)}")
    if p.total <= 0:
        raise ValidationError("total variance must be positive")

    spec = pm["total_variance"]
    if spec.family == "jeffreys":
        out = float(jeffreys_logpdf(p.total))
    elif spec.family == "pc":
        out = float(pc_variance_logpdf(p.total, spec.params["lam"]))
    else:
        raise ValidationError(f"family {spec.family!r} not valid for the total variance")

    for s in tree.splits:
        props = _check_omega_interior(p.proportions[s.name])
        spec = pm[s.name]
        if spec.family == "uniform":
            out += _dirichlet_logpdf(props, np.ones(s.n_children))
        elif spec.family == "dirichlet":
            conc = np.asarray(spec.params["q"], dtype=float) * np.ones(s.n_children)
            if conc.shape != (s.n_children,):
                raise ValidationError(
                    f"split {s.name!r}: concentration shape {conc.shape} mismatch"
                )
            out += _dirichlet_logpdf(props, conc)
        elif spec.family == "beta":
            if not s.is_binary:
                raise ValidationError(f"beta prior needs a binary split, got {s.name!r}")
            w = props[s.omega_index]
            a, b = spec.params["a"], spec.params["b"]
            out += float(
                gammaln(a + b)
                - gammaln(a)
                - gammaln(b)
                + (a - 1) * np.log(w)
                + (b - 1) * np.log1p(-w)
            )
        elif spec.family == "pc0":
            if not s.is_binary:
                raise ValidationError(f"pc0 prior needs a binary split, got {s.name!r}")
            out += float(pc0_simplified_logpdf(props[s.omega_index], spec.params["lam"]))
        elif spec.family == "pc0_exact":
            if not s.is_binary:
                raise ValidationError(f"pc0_exact prior needs a binary split, got {s.name!r}")
            out += float(
                pc0_exact_logpdf_numeric(
                    props[s.omega_index],
                    spec.params["lam"],
                    spec.params["Sigma0"],
                    spec.params["Sigma1"],
                )
            )
        else:
            raise ValidationError(f"family {spec.family!r} not valid for split {s.name!r}")
    return out


def log_prior_unconstrained(tree: DecompTree, priors, theta: np.ndarray) -> float:
    """Prior density of the unconstrained coordinates (includes the Jacobian)."""
    p = from_unconstrained(tree, theta)
    lp = log_prior(tree, priors, p)
    if not np.isfinite(lp):
        return -np.inf
    return lp + log_jacobian(tree, theta)


class HDEvaluator:
    """Precompiled joint evaluation of the HD prior and leaf variances.

    Bundles, per split, the theta offsets, the Dirichlet-style exponents
    with the log-ratio Jacobian folded in, and per-leaf root-to-leaf index
    paths, so the MCMC hot loop does one flat pass per proposal. Numerics
    match ``log_prior_unconstrained`` + ``to_variances``.
    """

    def __init__(self, tree: DecompTree, priors):
        pm = _as_prior_map(priors)
        missing = {"total_variance", *(s.name for s in tree.splits)} - set(pm)
        if missing:
            raise ValidationError(f"missing priors for nodes {sorted(missing)}")
        self.tree = tree
        v_spec = pm["total_variance"]
        if v_spec.family not in ("jeffreys", "pc"):
            raise ValidationError(
                f"family {v_spec.family!r} not valid for the total variance"
            )
        self.v_family = v_spec.family
        self.v_lam = v_spec.params.get("lam")
        self.supported = True

        # per split: (start, n_children, is_binary, omega_index, kind,
        #             conc-or-lam, lognorm-or-const)
        self.split_meta = []
        pos = 1
        for s in tree.splits:
            spec = pm[s.name]
            n = s.n_children
            start = pos
            pos += 1 if s.is_binary else n - 1
            if spec.family == "uniform":
                conc = np.ones(n)
            elif spec.family == "dirichlet":
                conc = np.asarray(spec.params["q"], dtype=float) * np.ones(n)
            elif spec.family == "beta" and s.is_binary:
                conc = np.empty(2)
                conc[s.omega_index] = spec.params["a"]
                conc[1 - s.omega_index] = spec.params["b"]
            elif spec.family == "pc0" and s.is_binary:
                conc = None
            else:
                self.supported = False
                conc = None
            if conc is not None:
                lognorm = float(gammaln(conc.sum()) - gammaln(conc).sum())
                # prior exponent (conc - 1) plus the log-ratio Jacobian
                self.split_meta.append(
                    (start, n, s.is_binary, s.omega_index, "dirichlet", conc, lognorm)
                )
            elif spec.family == "pc0":
                lam = spec.params["lam"]
                const = float(np.log(lam) - np.log(2.0) - np.log(-np.expm1(-lam)))
                self.split_meta.append(
                    (start, n, s.is_binary, s.omega_index, "pc0", lam, const)
                )
            else:
                self.split_meta.append((start, n, s.is_binary, s.omega_index,
                                        "unsupported", None, None))
        self.n_coords = pos
        self._fallback_priors = pm

        self.leaf_paths = []
        for leaf in tree.leaves:
            path = []
            for k, s in enumerate(tree.splits):
                for ci, leaves in enumerate(s.child_leaves):
                    if leaf in leaves:
                        path.append((k, ci))
                        break
            self.leaf_paths.append(path)

    def evaluate(self, theta: np.ndarray) -> tuple[float, np.ndarray | None]:
        """(log prior incl. Jacobian, leaf variances in tree.leaves order)."""
        if not self.supported:
            lp = log_prior_unconstrained(self.tree, self._fallback_priors, theta)
            if not np.isfinite(lp):
                return -np.inf, None
            from .tree import from_unconstrained as _fu, to_variances as _tv

            s2 = _tv(self.tree, _fu(self.tree, theta))
            return lp, np.array([s2[l] for l in self.tree.leaves])

        th = theta.tolist()
        t = th[0]
        if self.v_family == "jeffreys":
            lo, hi = JEFFREYS_LOG_BOUNDS
            if not lo <= t <= hi:
                return -np.inf, None
            logp = -math.log(hi - lo)
        else:
            lam = self.v_lam
            logp = math.log(lam) - lam * math.exp(0.5 * t) - math.log(2.0) + 0.5 * t

        log_props = []
        for start, n, is_binary, omega_index, kind, a, b in self.split_meta:
            if is_binary:
                x = th[start]
                if x > 0:
                    log_w = -math.log1p(math.exp(-x))
                else:
                    log_w = x - math.log1p(math.exp(x))
                if omega_index == 0:
                    lp_children = (log_w, log_w - x)
                else:
                    lp_children = (log_w - x, log_w)
                if kind == "dirichlet":
                    logp += b + a[0] * lp_children[0] + a[1] * lp_children[1]
                else:  # pc0
                    w = math.exp(log_w)
                    logp += b - a * math.sqrt(w) + 0.5 * log_w + (log_w - x)
            else:
                raw = np.empty(n)
                raw[: n - 1] = th[start : start + n - 1]
                raw[n - 1] = 0.0
                raw -= raw.max()
                lp_children = raw - math.log(np.exp(raw).sum())
                logp += b + float(a @ lp_children)
            log_props.append(lp_children)
        sigma2 = np.empty(len(self.leaf_paths))
        for i, path in enumerate(self.leaf_paths):
            acc = t
            for k, ci in path:
                acc += log_props[k][ci]
            sigma2[i] = math.exp(acc)
        return logp, sigma2


def prior_median_theta(tree: DecompTree, priors) -> np.ndarray:
    """Unconstrained coordinates at the per-node prior medians (initialization)."""
    pm = _as_prior_map(priors)
    spec = pm["total_variance"]
    if spec.family == "pc":
        total = float((np.log(2.0) / spec.params["lam"]) ** 2)
    else:
        total = 1.0
    proportions = {}
    for s in tree.splits:
        spec = pm[s.name]
        if spec.family == "beta" and s.is_binary:
            w = float(beta_dist.ppf(0.5, spec.params["a"], spec.params["b"]))
        elif spec.family in ("pc0", "pc0_exact") and s.is_binary:
            w = float(pc0_quantile(0.5, spec.params["lam"]))
        else:
            w = 1.0 / s.n_children
        if s.is_binary:
            props = np.empty(2)
            props[s.omega_index] = w
            props[1 - s.omega_index] = 1.0 - w
        else:
            props = np.full(s.n_children, 1.0 / s.n_children)
        proportions[s.name] = props
    from .tree import to_unconstrained

    return to_unconstrained(tree, HDParams(total=total, proportions=proportions))


def marginal_cdfs(tree: DecompTree, priors) -> dict[str, Callable[[np.ndarray], np.ndarray]]:
    """Analytic marginal CDFs for natural-scale parameters, for KS checks.

    Keys are 'V' and '<split>:<child>' for each proportion entry; Dirichlet
    entries use the Beta(q_i, sum(q) - q_i) marginal.
    """
    pm = _as_prior_map(priors)
    out: dict[str, Callable] = {}
    spec = pm["total_variance"]
    if spec.family == "jeffreys":
        lo, hi = JEFFREYS_LOG_BOUNDS
        out["V"] = lambda v: np.clip((np.log(v) - lo) / (hi - lo), 0.0, 1.0)
    elif spec.family == "pc":
        lam = spec.params["lam"]
        out["V"] = lambda v, lam=lam: -np.expm1(-lam * np.sqrt(v))
    for s in tree.splits:
        spec = pm[s.name]
        if spec.family in ("uniform", "dirichlet"):
            conc = (
                np.ones(s.n_children)
                if spec.family == "uniform"
                else np.asarray(spec.params["q"], dtype=float) * np.ones(s.n_children)
            )
            for i, child in enumerate(s.child_names):
                a_i, rest = conc[i], conc.sum() - conc[i]
                out[f"{s.name}:{child}"] = (
                    lambda w, a=a_i, b=rest: beta_dist.cdf(np.asarray(w), a, b)
                )
        elif spec.family == "beta":
            child = s.child_names[s.omega_index]
            a, b = spec.params["a"], spec.params["b"]
            out[f"{s.name}:{child}"] = lambda w, a=a, b=b: beta_dist.cdf(np.asarray(w), a, b)
        elif spec.family in ("pc0", "pc0_exact"):
            child = s.child_names[s.omega_index]
            lam = spec.params["lam"]
            out[f"{s.name}:{child}"] = lambda w, lam=lam: pc0_cdf(np.asarray(w), lam)
    return out
