"""Penalized B-spline smoothing and additive-model fits.

The basis is a clamped cubic (by default) B-spline with interior knots at
quantiles of the data; smooth terms carry a second-difference coefficient
penalty and a sum-to-zero identifiability constraint, with a global
intercept in the model.  Smoothing parameters come from a GCV grid search,
cycled over terms when several are free.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .regression import TestResult

__all__ = [
    "SplineError",
    "SmoothTerm",
    "GamFit",
    "bspline_basis",
    "quantile_knots",
    "fit_gam",
    "gam_term_test",
    "GCV_GRID",
]


class SplineError(ValueError):
    pass


GCV_GRID = tuple(np.logspace(-4.0, 6.0, 25))
_MAX_SWEEPS = 8


@dataclass(frozen=True)
class SmoothTerm:
    """A univariate smooth f(var) with k basis functions.

    ``lam`` fixes the smoothing parameter.  ``df`` instead picks, on the
    same grid, the lambda whose effective degrees of freedom come closest
    to the target; that choice depends only on the design, never on the
    response, which keeps downstream tests free of selection effects.
    With neither given, lambda is selected by GCV.
    """

    var: str
    k: int = 10
    degree: int = 3
    lam: float | None = None
    df: float | None = None

    def __post_init__(self):
        if self.degree < 1:
            raise SplineError("degree must be at least 1")
        if self.k < self.degree + 1:
            raise SplineError(
                f"k={self.k} too small for degree {self.degree} (need k >= degree+1)"
            )
        if self.lam is not None and not (np.isfinite(self.lam) and self.lam >= 0):
            raise SplineError("lam must be a nonnegative finite number or None")
        if self.df is not None:
            if self.lam is not None:
                raise SplineError("give lam or df, not both")
            if not (np.isfinite(self.df) and 1.0 <= self.df <= self.k - 1):
                raise SplineError(
                    f"df target must lie in [1, k-1] = [1, {self.k - 1}]"
                )

    @property
    def label(self) -> str:
        return f"s({self.var})"


def quantile_knots(x, k, degree) -> np.ndarray:
    """Clamped knot vector with k-degree-1 interior knots at quantiles."""
    x = np.asarray(x, dtype=float).ravel()
    lo, hi = float(np.min(x)), float(np.max(x))
    if not hi > lo:
        raise SplineError("cannot place knots: variable is constant")
    n_interior = k - degree - 1
    qs = np.arange(1, n_interior + 1) / (n_interior + 1)
    interior = np.quantile(x, qs) if n_interior else np.empty(0)
    return np.concatenate(
        [np.full(degree + 1, lo), interior, np.full(degree + 1, hi)]
    )


def bspline_basis(x, knots, degree) -> np.ndarray:
    """Cox-de Boor B-spline basis, closed on the right boundary.

    Returns an (n, len(knots)-degree-1) matrix; rows sum to one for x inside
    the boundary knots.
    """
    x = np.asarray(x, dtype=float).ravel()
    t = np.asarray(knots, dtype=float).ravel()
    if t.size < 2 * (degree + 1):
        raise SplineError("knot vector too short for this degree")
    if np.any(np.diff(t) < 0):
        raise SplineError("knots must be nondecreasing")
    n_basis = t.size - degree - 1
    # order-1 (piecewise constant) seed
    b = np.zeros((x.size, t.size - 1))
    nonempty = np.nonzero(t[1:] > t[:-1])[0]
    if nonempty.size == 0:
        raise SplineError("all knots coincide")
    last = nonempty[-1]
    for j in range(t.size - 1):
        if t[j + 1] > t[j]:
            if j == last:
                b[:, j] = (x >= t[j]) & (x <= t[j + 1])
            else:
                b[:, j] = (x >= t[j]) & (x < t[j + 1])
    for d in range(1, degree + 1):
        nb = np.zeros((x.size, t.size - 1 - d))
        for j in range(t.size - 1 - d):
            den1 = t[j + d] - t[j]
            den2 = t[j + d + 1] - t[j + 1]
            term = np.zeros(x.size)
            if den1 > 0:
                term = term + (x - t[j]) / den1 * b[:, j]
            if den2 > 0:
                term = term + (t[j + d + 1] - x) / den2 * b[:, j + 1]
            nb[:, j] = term
        b = nb
    assert b.shape[1] == n_basis
    return b


def _second_difference_penalty(k) -> np.ndarray:
    if k < 3:
        return np.zeros((k, k))
    d = np.zeros((k - 2, k))
    for i in range(k - 2):
        d[i, i : i + 3] = (1.0, -2.0, 1.0)
    return d.T @ d


@dataclass(frozen=True)
class _SmoothBlock:
    term: SmoothTerm
    knots: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)  # sum-to-zero reparameterization
    design: np.ndarray = field(repr=False)
    penalty: np.ndarray = field(repr=False)
    sl: slice


@dataclass(frozen=True)
class GamFit:
    """Fitted additive model: intercept + linear part + centered smooths."""

    names: tuple
    coef: np.ndarray
    response: np.ndarray = field(repr=False)
    fitted: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    rss: float
    n: int
    lambdas: tuple  # (label, lam) per smooth term
    edf_terms: tuple  # (label, edf) per smooth term
    edf_total: float
    gcv: float
    blocks: tuple = field(repr=False)
    linear_names: tuple = ()

    def edf_of(self, label) -> float:
        for lb, e in self.edf_terms:
            if lb == label:
                return e
        raise SplineError(f"no smooth term {label!r}")

    def lam_of(self, label) -> float:
        for lb, l in self.lambdas:
            if lb == label:
                return l
        raise SplineError(f"no smooth term {label!r}")

    def term_curve(self, label, grid):
        """Evaluate the centered smooth for ``label`` on new points."""
        for blk in self.blocks:
            if blk.term.label == label:
                basis = bspline_basis(
                    np.clip(grid, blk.knots[0], blk.knots[-1]),
                    blk.knots,
                    blk.term.degree,
                )
                return (basis @ blk.z) @ self.coef[blk.sl]
        raise SplineError(f"no smooth term {label!r}")


def _assemble(y, data, smooth, linear):
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    if not np.all(np.isfinite(y)):
        raise SplineError("response contains non-finite values")
    cols = [np.ones(n)]
    names = ["const"]
    for name in linear:
        try:
            v = np.asarray(data[name], dtype=float).ravel()
        except KeyError:
            raise SplineError(f"no data column {name!r}") from None
        if v.size != n:
            raise SplineError(f"column {name!r} has length {v.size}, expected {n}")
        cols.append(v)
        names.append(name)
    offset = len(cols)
    blocks = []
    seen = set()
    for term in smooth:
        if term.label in seen:
            raise SplineError(f"duplicate smooth term {term.label}")
        seen.add(term.label)
        try:
            x = np.asarray(data[term.var], dtype=float).ravel()
        except KeyError:
            raise SplineError(f"no data column {term.var!r}") from None
        if x.size != n:
            raise SplineError(
                f"column {term.var!r} has length {x.size}, expected {n}"
            )
        knots = quantile_knots(x, term.k, term.degree)
        basis = bspline_basis(x, knots, term.degree)
        c = basis.sum(axis=0)
        q, _ = np.linalg.qr(c[:, None], mode="complete")
        z = q[:, 1:]
        bz = basis @ z
        pen = z.T @ _second_difference_penalty(term.k) @ z
        sl = slice(offset, offset + bz.shape[1])
        offset += bz.shape[1]
        cols.append(bz)
        names.append(term.label)
        blocks.append(_SmoothBlock(term, knots, z, bz, pen, sl))
    design = np.column_stack(cols)
    if n <= design.shape[1]:
        raise SplineError(
            f"need more observations than coefficients "
            f"(n={n}, coefficients={design.shape[1]})"
        )
    return y, design, tuple(names), tuple(blocks)


def _solve(y, design, blocks, lams):
    xtx = design.T @ design
    xty = design.T @ y
    a = xtx.copy()
    for blk, lam in zip(blocks, lams):
        a[blk.sl, blk.sl] += lam * blk.penalty
    try:
        a_inv = np.linalg.inv(a)
    except np.linalg.LinAlgError:
        raise SplineError("singular penalized system; check for constant or "
                          "duplicated smooth variables") from None
    beta = a_inv @ xty
    fitted = design @ beta
    resid = y - fitted
    rss = float(resid @ resid)
    f_mat = a_inv @ xtx  # edf contributions on the diagonal
    diag = np.diag(f_mat)
    n = y.size
    edf_terms = tuple(float(diag[blk.sl].sum()) for blk in blocks)
    edf_total = float(diag.sum())
    denom = n - edf_total
    gcv = float(n * rss / denom**2) if denom > 0 else np.inf
    return beta, fitted, resid, rss, edf_terms, edf_total, gcv


def _df_matched_lambda(block: _SmoothBlock) -> float:
    """Grid lambda whose standalone edf is closest to the df target."""
    btb = block.design.T @ block.design
    target = block.term.df
    best_lam, best_gap = GCV_GRID[0], np.inf
    for lam in GCV_GRID:
        try:
            edf = float(
                np.trace(np.linalg.solve(btb + lam * block.penalty, btb))
            )
        except np.linalg.LinAlgError:
            continue
        gap = abs(edf - target)
        if gap < best_gap:
            best_lam, best_gap = lam, gap
    return best_lam


def fit_gam(y, data, smooth=(), linear=()) -> GamFit:
    """Fit an additive model y ~ 1 + linear columns + sum of smooths.

    Accepts either ``fit_gam(y_array, columns_mapping, ...)`` or the
    dataset-first form ``fit_gam(dataset, response_name, ...)``; smooth and
    linear terms are keyword selections in both.

    Free smoothing parameters are chosen on a log-spaced GCV grid; with
    several free terms the grid search cycles through them until the
    selection is stable (ties resolve to the smallest lambda).  Terms with
    a df target get their lambda matched on the same grid before the GCV
    sweep and are held fixed during it.
    """
    if isinstance(data, str):
        # dataset-first form: fit_gam(dataset, response_name, ...)
        dataset, response = y, data
        y = dataset[response]
        data = dataset
    smooth = tuple(smooth)
    linear = tuple(linear)
    y, design, names, blocks = _assemble(y, data, smooth, linear)
    lams = []
    for blk in blocks:
        if blk.term.lam is not None:
            lams.append(blk.term.lam)
        elif blk.term.df is not None:
            lams.append(_df_matched_lambda(blk))
        else:
            lams.append(1.0)
    free = [
        i
        for i, blk in enumerate(blocks)
        if blk.term.lam is None and blk.term.df is None
    ]
    if free:
        for _ in range(_MAX_SWEEPS):
            changed = False
            for i in free:
                best_lam, best_gcv = None, np.inf
                for lam in GCV_GRID:
                    trial = list(lams)
                    trial[i] = lam
                    gcv = _solve(y, design, blocks, trial)[6]
                    if gcv < best_gcv:
                        best_lam, best_gcv = lam, gcv
                if best_lam is not None and best_lam != lams[i]:
                    lams[i] = best_lam
                    changed = True
            if not changed:
                break
    beta, fitted, resid, rss, edf_terms, edf_total, gcv = _solve(
        y, design, blocks, lams
    )
    return GamFit(
        names=names,
        coef=beta,
        response=y,
        fitted=fitted,
        residuals=resid,
        rss=rss,
        n=y.size,
        lambdas=tuple((blk.term.label, float(l)) for blk, l in zip(blocks, lams)),
        edf_terms=tuple(
            (blk.term.label, e) for blk, e in zip(blocks, edf_terms)
        ),
        edf_total=edf_total,
        gcv=gcv,
        blocks=blocks,
        linear_names=linear,
    )


def gam_term_test(full: GamFit, reduced: GamFit) -> TestResult:
    """Approximate F test comparing nested additive fits.

    F = [(RSS_r - RSS_f) / (edf_f - edf_r)] / [RSS_f / (n - edf_f)], with
    the numerator clamped at zero when smoothing makes the comparison
    slightly non-monotone.
    """
    if full.n != reduced.n or not np.array_equal(full.response, reduced.response):
        raise SplineError("fits compare different responses")
    full_terms = set(full.names)
    red_terms = set(reduced.names)
    if not red_terms <= full_terms:
        raise SplineError("reduced model is not nested in the full model")
    df2_same = full.n - full.edf_total
    if red_terms == full_terms:
        return TestResult(
            kind="gam-f",
            statistic=0.0,
            df=(0.0, float(df2_same)),
            p_value=1.0,
            null="no terms dropped; the fits coincide",
            aux=(("rss_full", full.rss), ("rss_reduced", reduced.rss)),
        )
    df1 = full.edf_total - reduced.edf_total
    if df1 <= 1e-8:
        raise SplineError("no effective degrees of freedom in the comparison")
    df2 = full.n - full.edf_total
    if df2 <= 0:
        raise SplineError("no residual degrees of freedom in the full fit")
    num = max(reduced.rss - full.rss, 0.0) / df1
    den = full.rss / df2
    stat = num / den
    p = float(stats.f.sf(stat, df1, df2))
    dropped = sorted(full_terms - red_terms)
    return TestResult(
        kind="gam-f",
        statistic=float(stat),
        df=(float(df1), float(df2)),
        p_value=p,
        null="smooth terms {} are zero".format(", ".join(dropped)),
        aux=(("rss_full", full.rss), ("rss_reduced", reduced.rss)),
    )
