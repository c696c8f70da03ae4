"""Negative-control falsification tests for instrumental-variable designs.

The linear battery:

* NCO direction: each candidate negative-control outcome is regressed on
  the IV and controls (``nco_test_single``); with several candidates a
  reverse regression of the IV on the whole block gives a joint Wald test
  (``nco_test_joint``) that keeps power against vector-level dependence
  that single tests miss.
* NCI direction: the outcome is regressed on the IV, controls, and the
  candidate block (``nci_test``); the IV is always part of that design.
  ``nci_test_unconditional`` drops the IV but first checks, on the data,
  that the candidates look independent of it, and falls back to the
  conditional test otherwise.

Smooth variants (``gam_nco_test``, ``gam_nci_test``) replace the linear
pieces with penalized splines, and ``reset_test`` probes the control
specification of the outcome regression directly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .graphs import Dag, d_separated
from .qualify import qualify_nci, qualify_nco
from .regression import (
    VCOV_KINDS,
    RegressionError,
    TestResult,
    bonferroni,
    ols_fit,
    t_test,
    wald_test,
)
from .report import DiagnosticRow, Report
from .splines import SmoothTerm, fit_gam, gam_term_test

__all__ = [
    "BatteryError",
    "TestPlan",
    "nco_test_single",
    "nco_test_joint",
    "nci_test",
    "nci_test_unconditional",
    "gam_nco_test",
    "gam_nci_test",
    "reset_test",
    "nc_diagnostics",
    "run_suite",
]


class BatteryError(ValueError):
    pass


CAVEAT_NCO = (
    "rich-covariates: an NCO test is only as sharp as its covariate set; "
    "associations explained by controls outside the design remain invisible."
)
CAVEAT_NCI = (
    "csrf: conditional NCI tests presume the outcome's reduced form in the "
    "IV and controls is correctly specified; nonlinearity there can "
    "masquerade as a violation."
)
NOTE_GAM_NCI = (
    "own-construction: the smooth NCI variant extends the linear battery "
    "and is not part of the core test family."
)


@dataclass(frozen=True)
class TestPlan:
    """Column-level description of one falsification run.

    ``gam_k`` and ``gam_df`` are the smooth-test settings: basis size per
    term, and the design-only degrees-of-freedom target used for the
    tested candidate smooths (their penalty is never tuned against the
    response, which keeps the approximate F test honestly sized).
    """

    __test__ = False  # not a pytest class, despite the name

    iv: str
    outcome: str | None = None
    controls: tuple = ()
    nco: tuple = ()
    nci: tuple = ()
    alpha: float = 0.05
    cluster: str | None = None
    vcov: str | None = None
    gam_k: int = 10
    gam_df: float = 4.0

    def __post_init__(self):
        if self.vcov is not None:
            if self.vcov not in VCOV_KINDS:
                raise BatteryError(
                    f"vcov must be one of {sorted(VCOV_KINDS)}, got {self.vcov!r}"
                )
            if self.vcov == "cr1" and not self.cluster:
                raise BatteryError("vcov='cr1' needs a cluster column")
        if not (isinstance(self.gam_k, int) and self.gam_k >= 4):
            raise BatteryError("gam_k must be an integer >= 4")
        if not (1.0 <= self.gam_df <= self.gam_k - 1):
            raise BatteryError("gam_df must lie in [1, gam_k - 1]")
        object.__setattr__(self, "controls", tuple(self.controls))
        object.__setattr__(self, "nco", tuple(self.nco))
        object.__setattr__(self, "nci", tuple(self.nci))
        if not self.iv:
            raise BatteryError("plan needs an IV column name")
        if not (0.0 < self.alpha < 1.0):
            raise BatteryError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        fixed = {self.iv}
        if self.outcome:
            if self.outcome in fixed:
                raise BatteryError("outcome and IV coincide")
            fixed.add(self.outcome)
        for group, label in (
            (self.controls, "control"),
            (self.nco, "NCO candidate"),
            (self.nci, "NCI candidate"),
        ):
            for name in group:
                if name in fixed:
                    raise BatteryError(
                        f"{label} {name!r} clashes with another plan role"
                    )
        dup = set(self.nco) & set(self.nci)
        if dup:
            raise BatteryError(
                f"column(s) {sorted(dup)} listed as both NCO and NCI"
            )

    @property
    def vcov_kind(self) -> str:
        if self.vcov is not None:
            return self.vcov
        return "cr1" if self.cluster else "hc1"

    def to_dict(self) -> dict:
        return {
            "iv": self.iv,
            "outcome": self.outcome,
            "controls": list(self.controls),
            "nco": list(self.nco),
            "nci": list(self.nci),
            "alpha": self.alpha,
            "cluster": self.cluster,
            "vcov": self.vcov_kind,
            "gam_k": self.gam_k,
            "gam_df": self.gam_df,
        }


def _require_columns(data: Dataset, plan: TestPlan, names):
    for name in names:
        if name is None:
            continue
        if name not in data:
            raise BatteryError(f"plan column {name!r} not found in data")


def _candidates_survive(fit, candidates, against):
    gone = [nc for nc in candidates if nc in fit.dropped]
    if gone:
        raise BatteryError(
            f"candidate {gone[0]!r} is collinear with {against}; "
            "its coefficient cannot be tested"
        )


def _cluster_labels(data: Dataset, plan: TestPlan):
    if plan.cluster is None:
        return None
    if plan.cluster not in data:
        raise BatteryError(f"cluster column {plan.cluster!r} not found in data")
    return data[plan.cluster]


def _controls(data: Dataset, plan: TestPlan) -> dict:
    return {c: data[c] for c in plan.controls}


def _retag(res: TestResult, kind, null=None, notes=()) -> TestResult:
    return TestResult(
        kind=kind,
        statistic=res.statistic,
        df=res.df,
        p_value=res.p_value,
        null=null if null is not None else res.null,
        detail=res.detail,
        aux=res.aux,
        notes=res.notes + tuple(notes),
    )


# -- linear NCO direction --------------------------------------------------


def nco_test_single(data: Dataset, plan: TestPlan):
    """Per-candidate tests: NC ~ IV + controls, t on the IV coefficient."""
    if not plan.nco:
        raise BatteryError("plan lists no NCO candidates")
    _require_columns(data, plan, (plan.iv, *plan.controls, *plan.nco))
    if np.ptp(data[plan.iv]) == 0:
        raise BatteryError(f"IV column {plan.iv!r} is constant")
    cl = _cluster_labels(data, plan)
    out = []
    for nc in plan.nco:
        if np.ptp(data[nc]) == 0:
            raise BatteryError(f"candidate {nc!r} is constant")
        fit = ols_fit(
            data[nc],
            {plan.iv: data[plan.iv], **_controls(data, plan)},
            cluster=cl,
        )
        res = t_test(fit, plan.iv, kind=plan.vcov_kind)
        out.append(
            _retag(
                res,
                "nco-single",
                null=f"{nc} is mean-independent of {plan.iv} given controls",
                notes=(f"nc={nc}",),
            )
        )
    return tuple(out)


def nco_test_joint(data: Dataset, plan: TestPlan) -> TestResult:
    """Reverse joint test: IV ~ NC block + controls, Wald on the block.

    Per-candidate t tests and their Bonferroni aggregate ride along so the
    joint verdict can be compared with the marginal ones (jointly dependent
    blocks of marginally independent candidates are the interesting case).
    """
    if not plan.nco:
        raise BatteryError("plan lists no NCO candidates")
    _require_columns(data, plan, (plan.iv, *plan.controls, *plan.nco))
    cl = _cluster_labels(data, plan)
    # controls enter the design first so that a candidate inside their span
    # is the column that gets dropped -- and then reported -- not a control
    regs = _controls(data, plan)
    regs.update({nc: data[nc] for nc in plan.nco})
    fit = ols_fit(data[plan.iv], regs, cluster=cl)
    _candidates_survive(fit, plan.nco, "the controls")
    res = wald_test(fit, plan.nco, kind=plan.vcov_kind)
    detail = tuple(
        _retag(t_test(fit, nc, kind=plan.vcov_kind), "t", notes=(f"nc={nc}",))
        for nc in plan.nco
    )
    adjusted, aggregate = bonferroni([d.p_value for d in detail])
    aux = res.aux + tuple(
        (f"bonferroni:{nc}", adj) for nc, adj in zip(plan.nco, adjusted)
    ) + (("bonferroni-aggregate", aggregate),)
    return TestResult(
        kind="nco-reverse-joint",
        statistic=res.statistic,
        df=res.df,
        p_value=res.p_value,
        null=f"{plan.iv} is mean-independent of the NCO block given controls",
        detail=detail,
        aux=aux,
    )


# -- linear NCI direction --------------------------------------------------


def _nci_design(data: Dataset, plan: TestPlan, include_iv: bool) -> dict:
    # The IV column is assembled here and nowhere else; the conditional
    # test cannot be built without it.
    regs = {}
    if include_iv:
        regs[plan.iv] = data[plan.iv]
    regs.update(_controls(data, plan))
    regs.update({nc: data[nc] for nc in plan.nci})
    return regs


def nci_test(data: Dataset, plan: TestPlan) -> TestResult:
    """Conditional test: outcome ~ IV + controls + NC block, Wald on block."""
    if not plan.nci:
        raise BatteryError("plan lists no NCI candidates")
    if not plan.outcome:
        raise BatteryError("NCI tests need an outcome column in the plan")
    _require_columns(
        data, plan, (plan.iv, plan.outcome, *plan.controls, *plan.nci)
    )
    cl = _cluster_labels(data, plan)
    fit = ols_fit(data[plan.outcome], _nci_design(data, plan, True), cluster=cl)
    _candidates_survive(fit, plan.nci, f"{plan.iv} and the controls")
    res = wald_test(fit, plan.nci, kind=plan.vcov_kind)
    detail = tuple(
        _retag(t_test(fit, nc, kind=plan.vcov_kind), "t", notes=(f"nc={nc}",))
        for nc in plan.nci
    )
    return TestResult(
        kind="nci-conditional",
        statistic=res.statistic,
        df=res.df,
        p_value=res.p_value,
        null=(
            f"{plan.outcome} is mean-independent of the NCI block "
            f"given {plan.iv} and controls"
        ),
        detail=detail,
        aux=res.aux,
    )


def nci_test_unconditional(data: Dataset, plan: TestPlan, force=False) -> TestResult:
    """Marginal test: outcome ~ controls + NC block, without the IV.

    Valid only when the candidates are independent of the IV, so that is
    checked first on the data (per candidate, Bonferroni-aggregated at the
    plan alpha); failure routes to the conditional test.  ``force=True``
    skips the check and stamps the result.
    """
    if not plan.nci:
        raise BatteryError("plan lists no NCI candidates")
    if not plan.outcome:
        raise BatteryError("NCI tests need an outcome column in the plan")
    _require_columns(
        data, plan, (plan.iv, plan.outcome, *plan.controls, *plan.nci)
    )
    cl = _cluster_labels(data, plan)
    notes = []
    if force:
        notes.append("force-unconditional: IV-independence pre-check skipped")
    else:
        pre_ps = []
        for nc in plan.nci:
            pre_fit = ols_fit(
                data[nc],
                {plan.iv: data[plan.iv], **_controls(data, plan)},
                cluster=cl,
            )
            pre_ps.append(t_test(pre_fit, plan.iv, kind=plan.vcov_kind).p_value)
        _, aggregate = bonferroni(pre_ps)
        if aggregate <= plan.alpha:
            routed = nci_test(data, plan)
            return _retag(
                routed,
                routed.kind,
                notes=routed.notes
                + (
                    "routed-to-conditional: candidates look associated with "
                    f"the IV (pre-check p={aggregate:.4g})",
                ),
            )
        notes.append(f"pre-check passed (aggregate p={aggregate:.4g})")
    fit = ols_fit(data[plan.outcome], _nci_design(data, plan, False), cluster=cl)
    _candidates_survive(fit, plan.nci, "the controls")
    res = wald_test(fit, plan.nci, kind=plan.vcov_kind)
    detail = tuple(
        _retag(t_test(fit, nc, kind=plan.vcov_kind), "t", notes=(f"nc={nc}",))
        for nc in plan.nci
    )
    return TestResult(
        kind="nci-unconditional",
        statistic=res.statistic,
        df=res.df,
        p_value=res.p_value,
        null=f"{plan.outcome} is mean-independent of the NCI block",
        detail=detail,
        aux=res.aux,
        notes=tuple(notes),
    )


# -- smooth variants -------------------------------------------------------


def _nuisance_terms(plan: TestPlan, names) -> tuple:
    # GCV-selected smoothing for the non-tested part of the model
    return tuple(SmoothTerm(name, k=plan.gam_k) for name in names)


def _tested_terms(plan: TestPlan, names) -> tuple:
    # df-matched smoothing for the candidate block: the penalty is chosen
    # from the design alone, so the F test never competes with GCV's
    # tendency to chase noise in the very terms under test
    return tuple(SmoothTerm(name, k=plan.gam_k, df=plan.gam_df) for name in names)


def gam_nco_test(data: Dataset, plan: TestPlan, smooth_controls=True) -> TestResult:
    """Smooth reverse test: IV ~ controls + smooth NC block.

    Controls enter as smooths by default; ``smooth_controls=False``
    restricts them to linear terms, which folds covariate richness into
    the tested null.
    """
    if not plan.nco:
        raise BatteryError("plan lists no NCO candidates")
    _require_columns(data, plan, (plan.iv, *plan.controls, *plan.nco))
    cols = {name: data[name] for name in (*plan.controls, *plan.nco)}
    if smooth_controls:
        base_smooth, linear = _nuisance_terms(plan, plan.controls), ()
    else:
        base_smooth, linear = (), plan.controls
    full = fit_gam(
        data[plan.iv],
        cols,
        smooth=base_smooth + _tested_terms(plan, plan.nco),
        linear=linear,
    )
    reduced = fit_gam(data[plan.iv], cols, smooth=base_smooth, linear=linear)
    res = gam_term_test(full, reduced)
    return _retag(
        res,
        "gam-nco",
        null=f"{plan.iv} is mean-independent of the NCO block given "
        f"{'smooth' if smooth_controls else 'linear'} controls",
    )


def gam_nci_test(data: Dataset, plan: TestPlan, smooth_controls=True) -> TestResult:
    """Smooth conditional test: outcome ~ s(IV) + controls + smooth NC block.

    With ``smooth_controls`` the controls enter as smooths as well; the IV
    is always smoothed, which is what guards the conditional test against
    reduced-form curvature.
    """
    if not plan.nci:
        raise BatteryError("plan lists no NCI candidates")
    if not plan.outcome:
        raise BatteryError("NCI tests need an outcome column in the plan")
    _require_columns(
        data, plan, (plan.iv, plan.outcome, *plan.controls, *plan.nci)
    )
    cols = {
        name: data[name] for name in (plan.iv, *plan.controls, *plan.nci)
    }
    if smooth_controls:
        base_smooth = _nuisance_terms(plan, (plan.iv, *plan.controls))
        linear = ()
    else:
        base_smooth = _nuisance_terms(plan, (plan.iv,))
        linear = plan.controls
    full = fit_gam(
        data[plan.outcome],
        cols,
        smooth=base_smooth + _tested_terms(plan, plan.nci),
        linear=linear,
    )
    reduced = fit_gam(
        data[plan.outcome], cols, smooth=base_smooth, linear=linear
    )
    res = gam_term_test(full, reduced)
    return _retag(
        res,
        "gam-nci",
        null=f"{plan.outcome} is mean-independent of the NCI block given a "
        f"smooth function of {plan.iv} and controls",
        notes=(NOTE_GAM_NCI,),
    )


# -- specification probe ---------------------------------------------------


def reset_test(data: Dataset, plan: TestPlan, powers=(2, 3)) -> TestResult:
    """Regression-specification probe on the outcome/control relation.

    Fits outcome ~ controls, then re-fits with powers of the standardized
    fitted values added and tests the added block.
    """
    if not plan.outcome:
        raise BatteryError("reset test needs an outcome column in the plan")
    if not plan.controls:
        raise BatteryError("reset test needs at least one control column")
    powers = tuple(int(p) for p in powers)
    if not powers or any(p < 2 for p in powers) or len(set(powers)) != len(powers):
        raise BatteryError(f"powers must be distinct integers >= 2, got {powers}")
    _require_columns(data, plan, (plan.outcome, *plan.controls))
    cl = _cluster_labels(data, plan)
    base = ols_fit(data[plan.outcome], _controls(data, plan), cluster=cl)
    g = base.fitted - base.fitted.mean()
    scale = g.std()
    if scale <= 0:
        raise BatteryError("fitted values are constant; nothing to test")
    g = g / scale
    regs = dict(_controls(data, plan))
    power_names = []
    for p in powers:
        name = f"fit^{p}"
        regs[name] = g**p
        power_names.append(name)
    aug = ols_fit(data[plan.outcome], regs, cluster=cl)
    res = wald_test(aug, power_names, kind=plan.vcov_kind)
    return _retag(
        res,
        "reset",
        null=f"{plan.outcome} is linear in the controls "
        f"(powers {', '.join(map(str, powers))} add nothing)",
    )


# -- diagnostics -----------------------------------------------------------


def _residualize(values, data: Dataset, plan: TestPlan):
    if not plan.controls:
        return np.asarray(values, dtype=float) - float(np.mean(values))
    fit = ols_fit(values, _controls(data, plan))
    return fit.residuals


def _abs_corr(a, b) -> float:
    sa, sb = np.std(a), np.std(b)
    if sa <= 0 or sb <= 0:
        return 0.0
    return float(abs(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb)))


def nc_diagnostics(data: Dataset, plan: TestPlan) -> tuple:
    """Control-residualized |correlations| of each candidate with IV and
    outcome, strongest IV association first."""
    ncs = (*plan.nco, *plan.nci)
    if not ncs:
        raise BatteryError("plan lists no negative-control candidates")
    _require_columns(data, plan, (plan.iv, plan.outcome, *plan.controls, *ncs))
    z_res = _residualize(data[plan.iv], data, plan)
    y_res = (
        _residualize(data[plan.outcome], data, plan) if plan.outcome else None
    )
    rows = []
    for nc in ncs:
        nc_res = _residualize(data[nc], data, plan)
        if np.std(nc_res) <= 1e-10 * (np.std(data[nc]) + 1.0):
            raise BatteryError(
                f"candidate {nc!r} has zero residual variance after the "
                "controls; correlations are undefined"
            )
        rows.append(
            DiagnosticRow(
                nc=nc,
                abs_corr_iv=_abs_corr(nc_res, z_res),
                abs_corr_outcome=(
                    _abs_corr(nc_res, y_res) if y_res is not None else None
                ),
            )
        )
    rows.sort(key=lambda r: (-r.abs_corr_iv, r.nc))
    return tuple(rows)


# -- the suite -------------------------------------------------------------


def _gate(graph: Dag, kind, nc):
    """Strict qualification with generalized fallback."""
    qualifier = qualify_nco if kind == "nco" else qualify_nci
    verdict = qualifier(graph, nc)
    mode = "strict"
    if not verdict.qualified:
        gen = qualifier(graph, nc, generalized=True)
        if gen.qualified:
            verdict, mode = gen, "generalized"
    entry = verdict.to_dict()
    entry["mode"] = mode
    return verdict.qualified, entry


SUITE_TESTS = (
    "nco-single",
    "nco-joint",
    "nci",
    "nci-unconditional",
    "gam-nco",
    "gam-nci",
    "reset",
)


def run_suite(
    data: Dataset,
    plan: TestPlan,
    graph: Dag | None = None,
    tags=(),
    force_unconditional=False,
    with_gam=False,
    tests=None,
    meta=(),
) -> Report:
    """Run the applicable battery and bundle a Report.

    With a graph, candidates first pass graphical qualification (strict,
    then generalized); failing candidates are excluded and noted.  The NCI
    route is unconditional when every candidate is d-separated from the IV
    in the full graph (or when forced), conditional otherwise.  ``tests``
    restricts the battery to the named members (see ``SUITE_TESTS``);
    selecting the unconditional NCI still goes through its pre-check.
    """
    caveats = []
    qualification = []
    nco = list(plan.nco)
    nci = list(plan.nci)
    if graph is not None:
        for kind, pool in (("nco", nco), ("nci", nci)):
            for nc in list(pool):
                if nc not in graph.nodes:
                    raise BatteryError(
                        f"candidate {nc!r} is not a node of the graph"
                    )
                ok, entry = _gate(graph, kind, nc)
                qualification.append(entry)
                if not ok:
                    pool.remove(nc)
                    caveats.append(
                        f"excluded {nc}: graphical qualification failed "
                        f"({', '.join(sorted(set(c for c in _failed(entry))))})"
                    )
                elif entry["mode"] == "generalized":
                    caveats.append(
                        f"{nc}: qualified only in generalized form"
                    )
    if not nco and not nci:
        detail = "; ".join(c for c in caveats if c.startswith("excluded"))
        raise BatteryError(
            "no qualified negative controls to test"
            + (f" ({detail})" if detail else "")
        )
    gated = TestPlan(
        iv=plan.iv,
        outcome=plan.outcome,
        controls=plan.controls,
        nco=tuple(nco),
        nci=tuple(nci),
        alpha=plan.alpha,
        cluster=plan.cluster,
        vcov=plan.vcov,
        gam_k=plan.gam_k,
        gam_df=plan.gam_df,
    )
    if tests is not None:
        tests = tuple(tests)
        unknown = sorted(set(tests) - set(SUITE_TESTS))
        if unknown:
            raise BatteryError(
                f"unknown test selection(s) {unknown}; choose from {SUITE_TESTS}"
            )

    def picked(name, default_on):
        return (name in tests) if tests is not None else default_on

    unconditional = force_unconditional
    if not unconditional and graph is not None and nci:
        unconditional = all(d_separated(graph, nc, gated.iv, ()) for nc in nci)
    run_nco_single = picked("nco-single", bool(gated.nco))
    run_nco_joint = picked("nco-joint", len(gated.nco) > 1)
    run_gam_nco = picked("gam-nco", bool(with_gam and gated.nco))
    run_nci_cond = picked("nci", bool(gated.nci) and not unconditional)
    run_nci_uncond = picked("nci-unconditional", bool(gated.nci) and unconditional)
    run_gam_nci = picked("gam-nci", bool(with_gam and gated.nci))
    run_reset = picked("reset", bool(gated.outcome and gated.controls))
    if (run_nco_single or run_nco_joint or run_gam_nco) and not gated.nco:
        raise BatteryError("NCO tests selected but no qualified NCO candidates")
    if (run_nci_cond or run_nci_uncond or run_gam_nci) and not gated.nci:
        raise BatteryError("NCI tests selected but no qualified NCI candidates")
    results = []
    if run_nco_single:
        results.extend(nco_test_single(data, gated))
    if run_nco_joint:
        results.append(nco_test_joint(data, gated))
    if run_gam_nco:
        results.append(gam_nco_test(data, gated))
    if run_nco_single or run_nco_joint or run_gam_nco:
        caveats.append(CAVEAT_NCO)
    if run_nci_uncond:
        results.append(
            nci_test_unconditional(data, gated, force=force_unconditional)
        )
    if run_nci_cond:
        results.append(nci_test(data, gated))
    if run_gam_nci:
        results.append(gam_nci_test(data, gated))
    if any(r.kind in ("nci-conditional", "gam-nci") for r in results):
        caveats.append(CAVEAT_NCI)
    if run_reset:
        results.append(reset_test(data, gated))
    if not results:
        raise BatteryError("no tests ran; selection not applicable to this plan")
    for tag in tags:
        caveats.append(f"scenario tag: {tag}")
    diagnostics = nc_diagnostics(data, gated)
    return Report(
        plan=gated.to_dict(),
        results=tuple(results),
        caveats=tuple(caveats),
        diagnostics=diagnostics,
        qualification=tuple(qualification),
        meta=tuple(meta),
    )


def _failed(entry: dict):
    failed = [c["name"] for c in entry.get("clauses", ()) if not c["holds"]]
    return failed or ["unqualified"]
