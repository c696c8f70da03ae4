"""Least-squares back end: rank-revealing fits, sandwich covariances, Wald tests."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

__all__ = [
    "RegressionError",
    "RegressionFit",
    "TestResult",
    "ols_fit",
    "vcov",
    "wald_test",
    "t_test",
    "bonferroni",
]


class RegressionError(ValueError):
    pass


# Columns whose norm survives projection on the earlier ones by less than
# this relative factor are treated as linearly dependent and dropped.
DROP_TOL = 1e-10

VCOV_KINDS = ("classical", "hc1", "cr1")


@dataclass(frozen=True)
class TestResult:
    """Outcome of a single hypothesis test."""

    kind: str
    statistic: float
    df: tuple
    p_value: float
    null: str
    detail: tuple = ()
    aux: tuple = ()
    notes: tuple = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "statistic": self.statistic,
            "df": list(self.df),
            "p_value": self.p_value,
            "null": self.null,
            "detail": [d.to_dict() for d in self.detail],
            "aux": {k: v for k, v in self.aux},
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class RegressionFit:
    names: tuple
    coef: np.ndarray
    dropped: tuple
    design: np.ndarray
    response: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    xtx_inv: np.ndarray
    n: int
    rank: int
    cluster: np.ndarray | None = field(default=None, repr=False)

    @property
    def df_resid(self) -> int:
        return self.n - self.rank

    def coefficient(self, name) -> float:
        if name in self.dropped:
            raise RegressionError(f"coefficient {name!r} was dropped as collinear")
        try:
            return float(self.coef[self.names.index(name)])
        except ValueError:
            raise RegressionError(f"no coefficient named {name!r}") from None

    @property
    def rss(self) -> float:
        return float(self.residuals @ self.residuals)


def _column(name, values, n):
    arr = np.asarray(values, dtype=float).ravel()
    if arr.shape != (n,):
        raise RegressionError(
            f"regressor {name!r} has length {arr.size}, expected {n}"
        )
    if not np.all(np.isfinite(arr)):
        raise RegressionError(f"regressor {name!r} contains non-finite values")
    return arr


def ols_fit(y, regressors, names=None, intercept=True, cluster=None) -> RegressionFit:
    """Fit y on the named regressors by least squares.

    Two calling forms are accepted:

    - ``ols_fit(dataset, response_name, regressor_names)`` pulls the columns
      out of a :class:`Dataset`; its cluster column (when set and not among
      the regressors) rides along for later CR1 covariances.
    - ``ols_fit(y_array, {name: column, ...})`` takes the response and the
      design columns directly; insertion order is design order.

    An intercept column named "const" leads the design unless
    ``intercept=False``.  Collinear columns are dropped left-to-right and
    recorded on the fit instead of raising.
    """
    if isinstance(regressors, str):
        data, response = y, regressors
        use = tuple(names or ())
        y = data[response]
        regressors = {nm: data[nm] for nm in use}
        if (
            cluster is None
            and getattr(data, "cluster", None) is not None
            and data.cluster != response
            and data.cluster not in use
        ):
            cluster = data[data.cluster]
    elif names is not None:
        raise RegressionError(
            "regressor names are only meaningful with a dataset and response name"
        )
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    if not np.all(np.isfinite(y)):
        raise RegressionError("response contains non-finite values")
    cols = []
    if intercept:
        cols.append(("const", np.ones(n)))
    for name, values in regressors.items():
        if name == "const" and intercept:
            raise RegressionError("'const' clashes with the automatic intercept")
        cols.append((name, _column(name, values, n)))
    if not cols:
        raise RegressionError("no regressors and no intercept")
    if n <= len(cols):
        raise RegressionError(
            f"need more observations than columns (n={n}, columns={len(cols)})"
        )

    kept_names, dropped, basis = [], [], []
    kept_cols = []
    for name, col in cols:
        resid = col.copy()
        for q in basis:
            resid -= q * (q @ resid)
        for q in basis:  # second pass for numerical safety
            resid -= q * (q @ resid)
        nrm = np.linalg.norm(resid)
        if nrm <= DROP_TOL * max(np.linalg.norm(col), 1.0):
            dropped.append(name)
            continue
        basis.append(resid / nrm)
        kept_names.append(name)
        kept_cols.append(col)

    if not kept_names:
        raise RegressionError("all columns are numerically zero")
    design = np.column_stack(kept_cols)
    q_mat, r_mat = np.linalg.qr(design)
    coef = np.linalg.solve(r_mat, q_mat.T @ y)
    fitted = design @ coef
    residuals = y - fitted
    r_inv = np.linalg.solve(r_mat, np.eye(r_mat.shape[0]))
    xtx_inv = r_inv @ r_inv.T

    cl = None
    if cluster is not None:
        cl = np.asarray(cluster).ravel()
        if cl.shape != (n,):
            raise RegressionError(
                f"cluster labels have length {cl.size}, expected {n}"
            )
    return RegressionFit(
        names=tuple(kept_names),
        coef=coef,
        dropped=tuple(dropped),
        design=design,
        response=y,
        fitted=fitted,
        residuals=residuals,
        xtx_inv=xtx_inv,
        n=n,
        rank=len(kept_names),
        cluster=cl,
    )


def vcov(fit: RegressionFit, kind="classical", cluster=None) -> np.ndarray:
    """Coefficient covariance matrix of the requested kind."""
    if kind not in VCOV_KINDS:
        raise RegressionError(f"unknown vcov kind {kind!r}; use one of {VCOV_KINDS}")
    if cluster is not None and kind != "cr1":
        raise RegressionError(f"cluster labels are only meaningful for kind='cr1', got {kind!r}")
    if fit.df_resid <= 0:
        raise RegressionError("no residual degrees of freedom")
    e = fit.residuals
    x = fit.design
    if kind == "classical":
        sigma2 = fit.rss / fit.df_resid
        return sigma2 * fit.xtx_inv
    if kind == "hc1":
        meat = (x * (e**2)[:, None]).T @ x
        scale = fit.n / fit.df_resid
        return scale * fit.xtx_inv @ meat @ fit.xtx_inv
    cl = cluster if cluster is not None else fit.cluster
    if cl is None:
        raise RegressionError("kind='cr1' needs cluster labels")
    cl = np.asarray(cl).ravel()
    if cl.shape != (fit.n,):
        raise RegressionError(f"cluster labels have length {cl.size}, expected {fit.n}")
    labels = np.unique(cl)
    n_groups = labels.size
    if n_groups < 2:
        raise RegressionError("kind='cr1' needs at least two clusters")
    meat = np.zeros((fit.rank, fit.rank))
    for g in labels:
        sel = cl == g
        s = x[sel].T @ e[sel]
        meat += np.outer(s, s)
    scale = (n_groups / (n_groups - 1)) * ((fit.n - 1) / fit.df_resid)
    return scale * fit.xtx_inv @ meat @ fit.xtx_inv


def _wald_df2(fit, kind, cluster):
    if kind == "cr1":
        cl = cluster if cluster is not None else fit.cluster
        return int(np.unique(np.asarray(cl).ravel()).size - 1)
    return fit.df_resid


def _df_notes(kind):
    # The G-1 denominator for clustered tests is a convention, so every
    # result that uses it says so.
    if kind == "cr1":
        return ("cluster-robust df: G-1",)
    return ()


def t_test(fit: RegressionFit, name, kind="classical", cluster=None) -> TestResult:
    """Two-sided t test of a single coefficient against zero."""
    v = vcov(fit, kind, cluster)
    if name in fit.dropped:
        raise RegressionError(f"cannot test dropped coefficient {name!r}")
    if name not in fit.names:
        raise RegressionError(f"no coefficient named {name!r}")
    i = fit.names.index(name)
    se = float(np.sqrt(v[i, i]))
    est = float(fit.coef[i])
    df2 = _wald_df2(fit, kind, cluster)
    if se <= 0 or not np.isfinite(se):
        raise RegressionError(f"degenerate standard error for {name!r}")
    stat = est / se
    p = 2.0 * float(stats.t.sf(abs(stat), df2))
    return TestResult(
        kind="t",
        statistic=stat,
        df=(df2,),
        p_value=p,
        null=f"coefficient on {name} is zero",
        aux=(("estimate", est), ("se", se)),
        notes=_df_notes(kind),
    )


def wald_test(fit: RegressionFit, names, kind="classical", cluster=None) -> TestResult:
    """Joint Wald test that the named coefficients are all zero.

    The statistic is reported on the F scale with denominator degrees of
    freedom n-k (classical / hc1) or G-1 (cr1).
    """
    names = tuple(names)
    if not names:
        raise RegressionError("empty coefficient subset")
    for nm in names:
        if nm in fit.dropped:
            raise RegressionError(f"cannot test dropped coefficient {nm!r}")
        if nm not in fit.names:
            raise RegressionError(f"no coefficient named {nm!r}")
    idx = [fit.names.index(nm) for nm in names]
    v = vcov(fit, kind, cluster)
    sub = v[np.ix_(idx, idx)]
    theta = fit.coef[idx]
    try:
        sol = np.linalg.solve(sub, theta)
    except np.linalg.LinAlgError:
        raise RegressionError(
            "singular covariance for the tested subset"
        ) from None
    w = float(theta @ sol)
    if not np.isfinite(w) or w < 0:
        raise RegressionError("degenerate Wald statistic")
    q = len(names)
    df2 = _wald_df2(fit, kind, cluster)
    stat = w / q
    p = float(stats.f.sf(stat, q, df2))
    return TestResult(
        kind="wald",
        statistic=stat,
        df=(q, df2),
        p_value=p,
        null="coefficients on {} are jointly zero".format(", ".join(names)),
        aux=tuple(("estimate:" + nm, float(fit.coef[i])) for nm, i in zip(names, idx)),
        notes=_df_notes(kind),
    )


def bonferroni(p_values):
    """Bonferroni adjustment: returns (adjusted p-values, aggregate).

    Each adjusted value is min(1, m*p); the aggregate is their minimum.
    """
    ps = [float(p) for p in p_values]
    if not ps:
        raise RegressionError("no p-values to adjust")
    for p in ps:
        if not (0.0 <= p <= 1.0) or not np.isfinite(p):
            raise RegressionError(f"p-value out of range: {p!r}")
    m = len(ps)
    adjusted = tuple(min(1.0, m * p) for p in ps)
    return adjusted, min(adjusted)
