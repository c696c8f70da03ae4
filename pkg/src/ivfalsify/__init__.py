"""Negative-control falsification tests for instrumental-variable designs.

The package splits into graph-side qualification (is a candidate negative
control usable, given which edges are in doubt?) and data-side testing
(does the qualified candidate actually falsify the design?):

* :mod:`ivfalsify.graphs` — DAGs with design roles, suspect edges,
  d-separation and open-trail witnesses.
* :mod:`ivfalsify.qualify` — graphical qualification checks for
  alternative-path variables and negative-control candidates.
* :mod:`ivfalsify.scm` — structural models: counter-based sampling plus
  exact finite-support oracles (joint laws, conditional independence,
  potential-outcome independence).
* :mod:`ivfalsify.scenarios` — the catalog of worked graph/model pairs.
* :mod:`ivfalsify.regression`, :mod:`ivfalsify.splines` — the linear and
  penalized-spline estimation back ends.
* :mod:`ivfalsify.battery` — the falsification tests and suite runner.
"""

__version__ = "0.1.0"

from .battery import (
    BatteryError,
    TestPlan,
    gam_nci_test,
    gam_nco_test,
    nc_diagnostics,
    nci_test,
    nci_test_unconditional,
    nco_test_joint,
    nco_test_single,
    reset_test,
    run_suite,
)
from .data import DataError, Dataset
from .graphs import (
    Dag,
    Edge,
    GraphError,
    d_separated,
    find_open_trail,
    parse_graph,
    remove_incoming,
)
from .qualify import (
    ClauseResult,
    QualificationVerdict,
    check_api,
    check_apo,
    check_general_api,
    check_general_apo,
    check_iv_graphical,
    check_nci,
    check_nco,
    qualify_nci,
    qualify_nco,
)
from .regression import (
    RegressionError,
    RegressionFit,
    TestResult,
    bonferroni,
    ols_fit,
    t_test,
    vcov,
    wald_test,
)
from .report import Report
from .scenarios import (
    ScenarioInfo,
    clear_user_scenarios,
    list_scenarios,
    register_scenario_config,
    scenario,
    spec_from_config,
)
from .scm import (
    Bernoulli,
    Constant,
    Discrete,
    Equation,
    ExactnessError,
    Gaussian,
    JointPmf,
    Linear,
    ScmError,
    ScmSpec,
    Uniform,
    ci_oracle,
    exact_joint,
    intervene,
    linear_eq,
    po_independence_oracle,
    sample,
)
from .splines import (
    GCV_GRID,
    GamFit,
    SmoothTerm,
    SplineError,
    bspline_basis,
    fit_gam,
    gam_term_test,
    quantile_knots,
)

__all__ = [name for name in dir() if not name.startswith("_")]
