"""Numerical core: weighted least squares, permutation tests, reliability,
effect sizes, descriptives, and normal-quantile diagnostics.

Weighted least squares minimizes sum(w_i * (y_i - x_i b)^2). The solve goes
through a QR factorization of sqrt(W) X for conditioning; the explicit
normal-equations inverse appears only in test oracles.

Permutation tests shuffle the response vector against the fixed design and
weights, refit, and compare model R^2. Permutation i draws its Fisher-Yates
swaps from an independent counter-based stream derived from (seed, i), so
any evaluation order (or chunking) yields the same p-value.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.stats

from .errors import ComputationError, ValidationError
from .seeding import philox_key
from .stimuli import Entity

STAR_THRESHOLDS = ((0.01, "***"), (0.05, "**"), (0.1, "*"))


def significance_stars(p: float) -> str:
    """Star convention: *p<0.1, **p<0.05, ***p<0.01."""
    if not math.isfinite(p):
        return ""
    for threshold, mark in STAR_THRESHOLDS:
        if p < threshold:
            return mark
    return ""


# ---------------------------------------------------------------------------
# Design matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DesignSpec:
    """Predictor set and dummy coding for one regression model.

    The reference party gets no dummy column; remaining parties appear in
    ``parties`` order. Column order is intercept, party dummies, then the
    optional gender / trust / mentions confounders.
    """

    reference_party: str = "ZP"
    parties: tuple[str, ...] = ("ZP", "TD", "K", "KO", "Left")
    affiliation: bool = True
    gender: bool = False
    trust: bool = False
    mentions: bool = False

    def columns(self) -> list[str]:
        cols = ["intercept"]
        if self.affiliation:
            cols.extend(p for p in self.parties if p != self.reference_party)
        if self.gender:
            cols.append("gender")
        if self.trust:
            cols.append("trust")
        if self.mentions:
            cols.append("mentions")
        return cols


@dataclass
class DesignMatrix:
    X: np.ndarray
    weights: np.ndarray
    columns: list[str]
    entity_ids: list[str]


def design_matrix(entities: Sequence[Entity], spec: DesignSpec) -> DesignMatrix:
    """Build the model matrix and mention-count weights.

    Entities with zero mentions carry zero weight and are excluded before
    fitting; requesting trust or mentions confounders requires those fields
    on every retained entity.
    """
    retained = [e for e in entities if e.mention_count > 0]
    if not retained:
        raise ValidationError("no entities with positive mention_count")
    for entity in retained:
        if spec.affiliation and entity.party not in spec.parties:
            raise ValidationError(
                f"entity {entity.id!r}: party {entity.party!r} not in design parties {spec.parties}")
        if spec.trust and entity.trust is None:
            raise ValidationError(f"entity {entity.id!r}: trust requested but absent")
        if spec.mentions and entity.mean_mention_valence is None:
            raise ValidationError(
                f"entity {entity.id!r}: mentions confounder requested but absent")
    columns = spec.columns()
    rows = []
    for entity in retained:
        row = [1.0]
        if spec.affiliation:
            row.extend(1.0 if entity.party == p else 0.0
                       for p in spec.parties if p != spec.reference_party)
        if spec.gender:
            row.append(float(entity.gender))
        if spec.trust:
            row.append(float(entity.trust))
        if spec.mentions:
            row.append(float(entity.mean_mention_valence))
        rows.append(row)
    return DesignMatrix(
        X=np.asarray(rows, dtype=float),
        weights=np.asarray([float(e.mention_count) for e in retained]),
        columns=columns,
        entity_ids=[e.id for e in retained],
    )


# ---------------------------------------------------------------------------
# Weighted least squares
# ---------------------------------------------------------------------------

@dataclass
class RegressionResult:
    """One fitted WLS model.

    Parametric p-values are two-sided t-tests on df_resid; stars follow the
    *p<0.1, **p<0.05, ***p<0.01 convention. permutation_p is filled in by
    permutation_test when requested.
    """

    columns: list[str]
    coefficients: np.ndarray
    standard_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    r2: float
    adj_r2: float
    residual_se: float
    df_resid: int
    n: int
    residuals: np.ndarray
    permutation_p: float | None = None

    @property
    def stars(self) -> list[str]:
        return [significance_stars(p) for p in self.p_values]

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "coefficients": [float(v) for v in self.coefficients],
            "standard_errors": [float(v) for v in self.standard_errors],
            "t_stats": [float(v) for v in self.t_stats],
            "p_values": [float(v) for v in self.p_values],
            "stars": self.stars,
            "r2": float(self.r2),
            "adj_r2": float(self.adj_r2),
            "residual_se": float(self.residual_se),
            "df_resid": int(self.df_resid),
            "n": int(self.n),
            "residuals": [float(v) for v in self.residuals],
            "permutation_p": None if self.permutation_p is None else float(self.permutation_p),
        }


def _validate_xyw(X: np.ndarray, y: np.ndarray, w: np.ndarray | None):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValidationError("X must be a 2-D matrix")
    n, p = X.shape
    if y.shape != (n,):
        raise ValidationError(f"y has shape {y.shape}, expected ({n},)")
    if w is None:
        w = np.ones(n)
    else:
        w = np.asarray(w, dtype=float)
        if w.shape != (n,):
            raise ValidationError(f"weights have shape {w.shape}, expected ({n},)")
        if np.any(w <= 0):
            raise ValidationError("weights must be strictly positive")
    if n <= p:
        raise ValidationError(f"need more observations ({n}) than columns ({p})")
    return X, y, w


def wls_fit(X: np.ndarray, y: Sequence[float], w: Sequence[float] | None = None,
            columns: Sequence[str] | None = None) -> RegressionResult:
    """Fit y on X by weighted least squares.

    b = (X'WX)^-1 X'Wy via QR of sqrt(W)X; sigma^2 = sum(w r^2) / (n - p);
    se_j = sqrt(sigma^2 [(X'WX)^-1]_jj); R^2 = 1 - sum(w r^2) /
    sum(w (y - wmean(y))^2). Raises on singular designs and on zero
    weighted total sum of squares (R^2 undefined).
    """
    X, y, w = _validate_xyw(X, np.asarray(y, dtype=float), w)
    n, p = X.shape
    u = np.sqrt(w)
    Q, R = np.linalg.qr(X * u[:, None])
    diag = np.abs(np.diag(R))
    if diag.min() == 0.0 or diag.min() < 1e-12 * diag.max():
        cond = float(diag.max() / diag.min()) if diag.min() > 0 else float("inf")
        raise ComputationError(
            f"singular normal equations (triangular factor condition ~{cond:.3g})")

    wy = u * y
    beta = scipy.linalg.solve_triangular(R, Q.T @ wy)
    residuals = y - X @ beta
    ssr = float(np.sum(w * residuals ** 2))
    df_resid = n - p
    sigma2 = ssr / df_resid
    wmean = float(np.sum(w * y) / np.sum(w))
    tss = float(np.sum(w * (y - wmean) ** 2))
    if tss <= 0.0:
        raise ComputationError("zero weighted total sum of squares: R^2 undefined")

    r_inv = scipy.linalg.solve_triangular(R, np.eye(p))
    unscaled_var = np.sum(r_inv ** 2, axis=1)
    se = np.sqrt(sigma2 * unscaled_var)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = np.where(se > 0, beta / se, np.where(beta == 0, 0.0, np.inf * np.sign(beta)))
        p_values = 2.0 * scipy.stats.t.sf(np.abs(t_stats), df_resid)

    r2 = 1.0 - ssr / tss
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / df_resid
    return RegressionResult(
        columns=list(columns) if columns is not None else [f"x{j}" for j in range(p)],
        coefficients=beta,
        standard_errors=se,
        t_stats=np.asarray(t_stats),
        p_values=np.asarray(p_values),
        r2=r2,
        adj_r2=adj_r2,
        residual_se=math.sqrt(sigma2),
        df_resid=df_resid,
        n=n,
        residuals=residuals,
        permutation_p=None,
    )


# ---------------------------------------------------------------------------
# Permutation test
# ---------------------------------------------------------------------------

def _projection(X: np.ndarray, w: np.ndarray):
    u = np.sqrt(w)
    Q, R = np.linalg.qr(X * u[:, None])
    diag = np.abs(np.diag(R))
    if diag.min() == 0.0 or diag.min() < 1e-12 * diag.max():
        raise ComputationError("singular design in permutation test")
    return Q, u


def _r2_single(y: np.ndarray, Q: np.ndarray, u: np.ndarray, w: np.ndarray,
               w_total: float) -> float:
    wy = u * y
    total = float(wy @ wy)
    proj = Q.T @ wy
    ssr = total - float(proj @ proj)
    tss = total - float(w @ y) ** 2 / w_total
    return 1.0 - ssr / tss


def _r2_batch(Y: np.ndarray, Q: np.ndarray, u: np.ndarray, w: np.ndarray,
              w_total: float) -> np.ndarray:
    Yw = Y * u
    total = np.einsum("ij,ij->i", Yw, Yw)
    proj = Yw @ Q
    ssr = total - np.einsum("ij,ij->i", proj, proj)
    tss = total - (Y @ w) ** 2 / w_total
    return 1.0 - ssr / tss


def permutation_indices(seed: int, start: int, count: int, n: int) -> np.ndarray:
    """Fisher-Yates permutations for indices start..start+count-1.

    Permutation i consumes draws from Philox keyed on the seed with counter
    i, so blocks can be generated in any order without changing results.
    """
    key = philox_key(seed, "permutation")
    highs = np.arange(n, 1, -1)
    K = np.empty((count, n - 1), dtype=np.int64)
    for offset in range(count):
        g = np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, start + offset]))
        K[offset] = g.integers(0, highs)
    P = np.tile(np.arange(n), (count, 1))
    rows = np.arange(count)
    for t in range(n - 1):
        j = n - 1 - t
        ks = K[:, t]
        tmp = P[rows, j].copy()
        P[rows, j] = P[rows, ks]
        P[rows, ks] = tmp
    return P


def permutation_test(X: np.ndarray, y: Sequence[float], w: Sequence[float] | None = None,
                     n_perm: int = 100_000, seed: int = 0, exhaustive: bool = False,
                     exhaustive_limit: int = 9, chunk_size: int = 20_000) -> float:
    """Permutation p-value for the whole-model R^2 statistic.

    The response vector is shuffled against fixed design rows and weights.
    Monte Carlo mode returns (1 + #{R^2_perm >= R^2_obs}) / (n_perm + 1);
    exhaustive mode enumerates all n! permutations (allowed for
    n <= exhaustive_limit) and returns the exact proportion. A constant
    response makes every permutation identical, so p = 1.
    """
    X, y, w = _validate_xyw(X, np.asarray(y, dtype=float), w)
    n = X.shape[0]
    if np.all(y == y[0]):
        return 1.0
    wls_fit(X, y, w)  # fail fast on degenerate observed fits

    Q, u = _projection(X, w)
    w_total = float(np.sum(w))
    r2_obs = _r2_single(y, Q, u, w, w_total)

    if exhaustive:
        if n > exhaustive_limit:
            raise ValidationError(
                f"exhaustive mode needs n <= {exhaustive_limit}, got {n}")
        hits = 0
        total = 0
        for perm in itertools.permutations(range(n)):
            r2 = _r2_single(y[list(perm)], Q, u, w, w_total)
            hits += r2 >= r2_obs
            total += 1
        return hits / total

    if n_perm <= 0:
        raise ValidationError("n_perm must be positive")
    hits = 0
    for start in range(0, n_perm, chunk_size):
        count = min(chunk_size, n_perm - start)
        P = permutation_indices(seed, start, count, n)
        r2 = _r2_batch(y[P], Q, u, w, w_total)
        hits += int(np.sum(r2 >= r2_obs))
    return (1 + hits) / (n_perm + 1)


# ---------------------------------------------------------------------------
# Reliability, effect sizes, descriptives
# ---------------------------------------------------------------------------

@dataclass
class RatingsMatrix:
    """Ratings grouped per text; texts may have different rater counts."""

    groups: list[np.ndarray]

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "RatingsMatrix":
        return cls([np.asarray(row, dtype=float) for row in rows])

    @classmethod
    def from_long(cls, records: Sequence[tuple[str, float]]) -> "RatingsMatrix":
        """Build from (text_id, rating) records, grouping by text id."""
        by_text: dict[str, list[float]] = {}
        for text_id, rating in records:
            by_text.setdefault(text_id, []).append(float(rating))
        return cls([np.asarray(v) for v in by_text.values()])


def icc1(ratings: RatingsMatrix | Sequence[Sequence[float]]) -> float:
    """One-way random-effects intraclass correlation, ICC(1).

    ICC(1) = (MSB - MSW) / (MSB + (k0 - 1) MSW) with the one-way ANOVA mean
    squares; k0 is the common group size for balanced designs and
    (N - sum(k_i^2)/N) / (n - 1) otherwise.
    """
    groups = ratings.groups if isinstance(ratings, RatingsMatrix) \
        else [np.asarray(g, dtype=float) for g in ratings]
    n = len(groups)
    if n < 2:
        raise ValidationError("ICC(1) needs at least 2 texts")
    sizes = np.array([len(g) for g in groups], dtype=float)
    if np.any(sizes < 2):
        raise ValidationError("ICC(1) needs at least 2 ratings per text")
    N = float(sizes.sum())
    grand = sum(float(g.sum()) for g in groups) / N
    means = np.array([float(g.mean()) for g in groups])
    ssb = float(np.sum(sizes * (means - grand) ** 2))
    ssw = sum(float(np.sum((g - m) ** 2)) for g, m in zip(groups, means))
    msb = ssb / (n - 1)
    msw = ssw / (N - n)
    if msb == 0.0 and msw == 0.0:
        raise ComputationError("degenerate ratings: no variance between or within texts")
    if np.all(sizes == sizes[0]):
        k0 = float(sizes[0])
    else:
        k0 = (N - float(np.sum(sizes ** 2)) / N) / (n - 1)
    return (msb - msw) / (msb + (k0 - 1.0) * msw)


def cohens_d(group_difference: float, pooled_sd: float) -> float:
    """Standardized effect size: difference / pooled standard deviation."""
    if pooled_sd <= 0:
        raise ValidationError("pooled_sd must be positive")
    return group_difference / pooled_sd


def pooled_sd(sample_a: Sequence[float], sample_b: Sequence[float]) -> float:
    """Pooled SD: sqrt(((n1-1)s1^2 + (n2-1)s2^2) / (n1+n2-2))."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValidationError("pooled_sd needs at least 2 values per sample")
    s2a = float(np.var(a, ddof=1))
    s2b = float(np.var(b, ddof=1))
    return math.sqrt(((len(a) - 1) * s2a + (len(b) - 1) * s2b) / (len(a) + len(b) - 2))


@dataclass(frozen=True)
class Descriptives:
    mean: float
    sd: float | None
    min: float
    max: float
    n: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "sd": self.sd, "min": self.min,
                "max": self.max, "n": self.n}


def descriptives(values: Sequence[float]) -> Descriptives:
    """Unweighted mean, sample SD (n-1), min, max. SD needs >= 2 values."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValidationError("descriptives: empty input")
    sd = float(np.std(arr, ddof=1)) if arr.size >= 2 else None
    return Descriptives(mean=float(arr.mean()), sd=sd,
                        min=float(arr.min()), max=float(arr.max()), n=int(arr.size))


# ---------------------------------------------------------------------------
# Normal quantiles and QQ diagnostics
# ---------------------------------------------------------------------------

# Rational-approximation coefficients for the inverse standard-normal CDF
# (Wichura's PPND16 algorithm); accurate to well below 1e-9 over the open
# unit interval.
_NQ_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
         1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
         3.3430575583588128105e4, 2.5090809287301226727e3)
_NQ_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
         2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
         5.2264952788528545610e3)
_NQ_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
         3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
         2.27238449892691845833e-2, 7.74545014278341407640e-4)
_NQ_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
         1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
         1.05075007164441684324e-9)
_NQ_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
         2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
         2.71155556874348757815e-5, 2.01033439929228813265e-7)
_NQ_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
         7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
         2.04426310338993978564e-15)


def _poly(coeffs: tuple[float, ...], x: float) -> float:
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def norm_quantile(p: float) -> float:
    """Inverse standard-normal CDF on (0, 1) via rational approximation."""
    if not 0.0 < p < 1.0:
        raise ValidationError(f"norm_quantile: p={p!r} outside (0, 1)")
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _poly(_NQ_A, r) / _poly(_NQ_B, r)
    r = p if q < 0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        x = _poly(_NQ_C, r) / _poly(_NQ_D, r)
    else:
        r -= 5.0
        x = _poly(_NQ_E, r) / _poly(_NQ_F, r)
    return -x if q < 0 else x


def qq_data(residuals: Sequence[float], residual_se: float) -> list[tuple[float, float]]:
    """(theoretical, observed) pairs for a residual QQ plot.

    Observed values are sorted residuals standardized by the fit's residual
    standard error; theoretical quantiles use plotting positions
    (i - 0.5) / n.
    """
    arr = np.asarray(residuals, dtype=float)
    if arr.size < 3:
        raise ValidationError("qq_data needs at least 3 residuals")
    if residual_se <= 0:
        raise ComputationError("qq_data: residual_se must be positive")
    observed = np.sort(arr / residual_se)
    n = arr.size
    return [(norm_quantile((i - 0.5) / n), float(obs))
            for i, obs in zip(range(1, n + 1), observed)]
