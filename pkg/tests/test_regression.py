"""Least-squares core: fits against the normal equations, sandwiches by hand."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ivfalsify import (
    Dataset,
    RegressionError,
    bonferroni,
    ols_fit,
    t_test,
    vcov,
    wald_test,
)


def random_problem(rng, n=40, k=3):
    x = rng.normal(size=(n, k))
    beta = rng.normal(size=k + 1)
    y = beta[0] + x @ beta[1:] + rng.normal(size=n)
    return y, {f"x{i}": x[:, i] for i in range(k)}


# -- fitting -----------------------------------------------------------------


def test_identity_line():
    fit = ols_fit(np.array([1.0, 2, 3]), {"x": np.array([1.0, 2, 3])})
    assert fit.coefficient("x") == pytest.approx(1.0)
    assert fit.coefficient("const") == pytest.approx(0.0, abs=1e-12)


def test_hand_solved_normal_equations():
    fit = ols_fit(np.array([1.0, 2, 2]), {"x": np.array([0.0, 1, 2])})
    assert fit.coefficient("x") == pytest.approx(0.5)
    assert fit.coefficient("const") == pytest.approx(7 / 6)


def test_matches_lstsq_on_random_problems():
    rng = np.random.default_rng(41)
    for _ in range(100):
        y, cols = random_problem(rng)
        fit = ols_fit(y, cols)
        design = np.column_stack([np.ones(y.size)] + list(cols.values()))
        ref, *_ = np.linalg.lstsq(design, y, rcond=None)
        assert np.allclose(fit.coef, ref, atol=1e-9)


def test_intercept_leads_and_name_is_reserved():
    y, cols = random_problem(np.random.default_rng(1))
    fit = ols_fit(y, cols)
    assert fit.names[0] == "const"
    with pytest.raises(RegressionError, match="const"):
        ols_fit(y, {"const": np.ones(y.size)})
    bare = ols_fit(y, cols, intercept=False)
    assert "const" not in bare.names


def test_residuals_orthogonal_to_design():
    y, cols = random_problem(np.random.default_rng(2), n=80, k=4)
    fit = ols_fit(y, cols)
    scale = np.linalg.norm(fit.response)
    assert np.max(np.abs(fit.design.T @ fit.residuals)) < 1e-8 * scale


def test_collinear_column_is_dropped_and_recorded():
    rng = np.random.default_rng(3)
    x = rng.normal(size=30)
    fit = ols_fit(rng.normal(size=30), {"a": x, "b": 2 * x, "c": rng.normal(size=30)})
    assert fit.dropped == ("b",)
    assert fit.names == ("const", "a", "c")
    assert fit.rank == 3
    with pytest.raises(RegressionError, match="dropped"):
        fit.coefficient("b")
    with pytest.raises(RegressionError, match="dropped"):
        t_test(fit, "b")
    with pytest.raises(RegressionError, match="dropped"):
        wald_test(fit, ["a", "b"])


@pytest.mark.parametrize(
    "bad",
    [
        lambda y, cols: ols_fit(y[:4], cols),  # response too short
        lambda y, cols: ols_fit(np.r_[y[:-1], np.nan], cols),
        lambda y, cols: ols_fit(y, {"x": np.r_[cols["x0"][:-1], np.inf]}),
        lambda y, cols: ols_fit(y[:3], {k: v[:3] for k, v in cols.items()}),  # n <= k
        lambda y, cols: ols_fit(y, {}, intercept=False),
    ],
)
def test_malformed_fits_raise(bad):
    y, cols = random_problem(np.random.default_rng(4))
    with pytest.raises(RegressionError):
        bad(y, cols)


def test_dataset_form_matches_array_form():
    rng = np.random.default_rng(5)
    ds = Dataset(
        {
            "Y": rng.normal(size=60),
            "X": rng.normal(size=60),
            "W": rng.normal(size=60),
            "G": np.repeat(np.arange(12.0), 5),
        },
        cluster="G",
    )
    a = ols_fit(ds, "Y", ["X", "W"])
    b = ols_fit(ds["Y"], {"X": ds["X"], "W": ds["W"]})
    assert np.allclose(a.coef, b.coef)
    assert a.cluster is not None and b.cluster is None
    # cluster labels stored on the fit feed cr1 without re-passing them
    assert t_test(a, "X", kind="cr1").notes == ("cluster-robust df: G-1",)
    with pytest.raises(RegressionError, match="dataset"):
        ols_fit(ds["Y"], {"X": ds["X"]}, names=["X"])


def test_fit_invariant_to_column_order():
    rng = np.random.default_rng(6)
    y, cols = random_problem(rng, n=50, k=4)
    fwd = ols_fit(y, cols)
    rev = ols_fit(y, dict(reversed(list(cols.items()))))
    for nm in cols:
        assert fwd.coefficient(nm) == pytest.approx(rev.coefficient(nm), rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(scale=st.floats(0.01, 100.0), shift=st.floats(-50.0, 50.0))
def test_affine_rescaling_transforms_the_slope(scale, shift):
    rng = np.random.default_rng(7)
    x = rng.normal(size=40)
    y = 2.0 * x + rng.normal(size=40)
    base = ols_fit(y, {"x": x})
    moved = ols_fit(y, {"x": scale * x + shift})
    assert moved.coefficient("x") == pytest.approx(
        base.coefficient("x") / scale, rel=1e-6
    )


# -- covariance --------------------------------------------------------------


def _dense_fit(rng, n=60, k=3):
    y, cols = random_problem(rng, n=n, k=k)
    fit = ols_fit(y, cols)
    x = fit.design
    return fit, x, np.linalg.inv(x.T @ x)


def test_classical_vcov_by_hand():
    fit, x, bread = _dense_fit(np.random.default_rng(8))
    sigma2 = fit.rss / (fit.n - fit.rank)
    assert np.allclose(vcov(fit, "classical"), sigma2 * bread, rtol=1e-9)


def test_hc1_vcov_by_hand():
    fit, x, bread = _dense_fit(np.random.default_rng(9))
    e = fit.residuals
    meat = x.T @ np.diag(e**2) @ x
    ref = fit.n / (fit.n - fit.rank) * bread @ meat @ bread
    assert np.allclose(vcov(fit, "hc1"), ref, rtol=1e-9)


def test_cr1_vcov_by_hand():
    rng = np.random.default_rng(10)
    y, cols = random_problem(rng, n=60)
    g = np.repeat(np.arange(6), 10)
    fit = ols_fit(y, cols, cluster=g)
    x, e = fit.design, fit.residuals
    meat = np.zeros((fit.rank, fit.rank))
    for lab in range(6):
        s = x[g == lab].T @ e[g == lab]
        meat += np.outer(s, s)
    bread = np.linalg.inv(x.T @ x)
    scale = (6 / 5) * ((fit.n - 1) / (fit.n - fit.rank))
    assert np.allclose(vcov(fit, "cr1"), scale * bread @ meat @ bread, rtol=1e-9)


def test_singleton_clusters_reduce_cr1_to_hc1():
    rng = np.random.default_rng(11)
    y, cols = random_problem(rng, n=45)
    fit = ols_fit(y, cols)
    v_cr = vcov(fit, "cr1", cluster=np.arange(45))
    # G=n makes the two finite-sample factors coincide exactly
    assert np.allclose(v_cr, vcov(fit, "hc1"), rtol=1e-10)


def test_two_identical_clusters_still_yield_a_usable_vcov():
    rng = np.random.default_rng(12)
    half_y, half_cols = random_problem(rng, n=20)
    y = np.tile(half_y, 2)
    cols = {k: np.tile(v, 2) for k, v in half_cols.items()}
    fit = ols_fit(y, cols, cluster=np.repeat([0, 1], 20))
    v = vcov(fit, "cr1")
    assert np.all(np.isfinite(v))
    assert np.all(np.diag(v) > 0)


def test_hc1_close_to_classical_under_homoskedasticity():
    rng = np.random.default_rng(13)
    n = 5000
    x = rng.normal(size=n)
    y = 1.0 + 0.5 * x + rng.normal(size=n)
    fit = ols_fit(y, {"x": x})
    se_c = np.sqrt(np.diag(vcov(fit, "classical")))
    se_h = np.sqrt(np.diag(vcov(fit, "hc1")))
    assert np.all(np.abs(se_h / se_c - 1) < 0.15)


def test_vcov_is_symmetric_psd():
    rng = np.random.default_rng(14)
    y, cols = random_problem(rng, n=80, k=4)
    g = np.repeat(np.arange(8), 10)
    fit = ols_fit(y, cols, cluster=g)
    for kind in ("classical", "hc1", "cr1"):
        v = vcov(fit, kind)
        assert np.allclose(v, v.T, atol=1e-12)
        assert np.min(np.linalg.eigvalsh((v + v.T) / 2)) > -1e-10


@pytest.mark.parametrize(
    "kind, kwargs, msg",
    [
        ("banana", {}, "unknown vcov kind"),
        ("hc1", {"cluster": np.zeros(40)}, "only meaningful"),
        ("cr1", {}, "needs cluster"),
        ("cr1", {"cluster": np.zeros(40)}, "two clusters"),
        ("cr1", {"cluster": np.zeros(7)}, "length"),
    ],
)
def test_vcov_argument_errors(kind, kwargs, msg):
    y, cols = random_problem(np.random.default_rng(15))
    fit = ols_fit(y, cols)
    with pytest.raises(RegressionError, match=msg):
        vcov(fit, kind, **kwargs)


# -- hypothesis tests on coefficients ----------------------------------------


def test_single_coefficient_f_equals_t_squared():
    rng = np.random.default_rng(16)
    y, cols = random_problem(rng)
    fit = ols_fit(y, cols)
    for kind in ("classical", "hc1"):
        t = t_test(fit, "x1", kind=kind)
        f = wald_test(fit, ["x1"], kind=kind)
        assert f.statistic == pytest.approx(t.statistic**2, rel=1e-10)
        assert f.p_value == pytest.approx(t.p_value, rel=1e-10)
        assert f.df == (1, fit.n - fit.rank)


def test_t_pvalue_decreases_in_statistic_magnitude():
    rng = np.random.default_rng(17)
    x = rng.normal(size=50)
    weak = ols_fit(0.1 * x + rng.normal(size=50), {"x": x})
    strong = ols_fit(2.0 * x + rng.normal(size=50), {"x": x})
    tw, ts = t_test(weak, "x"), t_test(strong, "x")
    assert abs(ts.statistic) > abs(tw.statistic)
    assert ts.p_value < tw.p_value


def test_wald_null_description_and_aux():
    rng = np.random.default_rng(18)
    y, cols = random_problem(rng)
    fit = ols_fit(y, cols)
    res = wald_test(fit, ["x0", "x2"])
    assert "x0" in res.null and "x2" in res.null
    aux = dict(res.aux)
    assert aux["estimate:x0"] == pytest.approx(fit.coefficient("x0"))
    assert res.notes == ()


def test_perfect_fit_degenerates_the_tests():
    # an identically-zero response leaves no residual variation at all
    x = np.arange(10.0)
    fit = ols_fit(np.zeros(10), {"x": x})
    with pytest.raises(RegressionError, match="degenerate|singular"):
        t_test(fit, "x")
    with pytest.raises(RegressionError, match="degenerate|singular"):
        wald_test(fit, ["x"])


def test_wald_rejects_unknown_and_empty_subsets():
    y, cols = random_problem(np.random.default_rng(19))
    fit = ols_fit(y, cols)
    with pytest.raises(RegressionError, match="no coefficient"):
        wald_test(fit, ["zz"])
    with pytest.raises(RegressionError, match="empty"):
        wald_test(fit, [])
    with pytest.raises(RegressionError, match="no coefficient"):
        t_test(fit, "zz")


def test_cluster_wald_uses_group_df_and_flags_it():
    rng = np.random.default_rng(20)
    y, cols = random_problem(rng, n=60)
    g = np.repeat(np.arange(6), 10)
    fit = ols_fit(y, cols, cluster=g)
    res = wald_test(fit, ["x0", "x1"], kind="cr1")
    assert res.df == (2, 5)
    assert res.notes == ("cluster-robust df: G-1",)


def test_null_pvalues_are_uniform():
    rng = np.random.default_rng(21)
    n, reps = 200, 2000
    ps_t, ps_w = [], []
    for _ in range(reps):
        x = rng.normal(size=(n, 2))
        y = 1.0 + rng.normal(size=n)
        fit = ols_fit(y, {"a": x[:, 0], "b": x[:, 1]})
        ps_t.append(t_test(fit, "a").p_value)
        ps_w.append(wald_test(fit, ["a", "b"], kind="hc1").p_value)
    assert stats.kstest(ps_t, "uniform").statistic < 0.05
    assert stats.kstest(ps_w, "uniform").statistic < 0.05


# -- partialling out ----------------------------------------------------------


def test_frisch_waugh_lovell_partialling():
    rng = np.random.default_rng(22)
    n = 300
    c1, c2 = rng.normal(size=n), rng.normal(size=n)
    nc = 0.4 * c1 + rng.normal(size=n)
    z = 0.8 * c1 - 0.3 * c2 + 0.25 * nc + rng.normal(size=n)
    joint = ols_fit(z, {"c1": c1, "c2": c2, "nc": nc})
    controls = {"c1": c1, "c2": c2}
    z_t = ols_fit(z, controls).residuals
    nc_t = ols_fit(nc, controls).residuals
    partial = ols_fit(z_t, {"nc": nc_t}, intercept=False)
    assert partial.coefficient("nc") == pytest.approx(
        joint.coefficient("nc"), rel=1e-8
    )


def test_reverse_regressions_share_sign_and_zero():
    # Both reverse coefficients carry cov(z~, nc~) in the numerator, so they
    # agree in sign and vanish together.
    rng = np.random.default_rng(23)
    n = 400
    c = rng.normal(size=n)
    for link in (0.7, -0.7, 0.0):
        nc = 0.5 * c + rng.normal(size=n)
        z = 0.3 * c + link * nc + rng.normal(size=n)
        gamma = ols_fit(z, {"c": c, "nc": nc}).coefficient("nc")
        beta = ols_fit(nc, {"c": c, "z": z}).coefficient("z")
        zt = ols_fit(z, {"c": c}).residuals
        nt = ols_fit(nc, {"c": c}).residuals
        num = float(zt @ nt)
        assert gamma == pytest.approx(num / float(nt @ nt), rel=1e-8)
        assert beta == pytest.approx(num / float(zt @ zt), rel=1e-8)
        assert np.sign(gamma) == np.sign(beta)


# -- bonferroni ---------------------------------------------------------------


def test_bonferroni_definition():
    adjusted, aggregate = bonferroni([0.01, 0.04, 0.5])
    assert adjusted == pytest.approx((0.03, 0.12, 1.0))
    assert aggregate == pytest.approx(0.03)


def test_bonferroni_single_and_clamped():
    assert bonferroni([1.0]) == ((1.0,), 1.0)
    adjusted, aggregate = bonferroni([0.2] * 10)
    assert aggregate == 1.0
    assert all(a == 1.0 for a in adjusted)


def test_bonferroni_dominates_raw():
    rng = np.random.default_rng(24)
    ps = rng.uniform(size=8)
    adjusted, aggregate = bonferroni(ps)
    assert all(a >= p for a, p in zip(adjusted, ps))
    assert aggregate == min(adjusted)


@pytest.mark.parametrize("bad", [[], [1.2], [-0.1], [float("nan")]])
def test_bonferroni_rejects_bad_inputs(bad):
    with pytest.raises(RegressionError):
        bonferroni(bad)
