"""Structural-model sampling, exact joints, and the independence oracles.

Moments are checked against closed forms derived from the structural
coefficients; independence facts are checked in exact rational arithmetic
wherever the model is discrete.
"""

import itertools
from fractions import Fraction

import numpy as np
import pytest

from ivfalsify import (
    Bernoulli,
    Dataset,
    Equation,
    ExactnessError,
    Gaussian,
    JointPmf,
    Linear,
    ScmError,
    ScmSpec,
    ci_oracle,
    d_separated,
    exact_joint,
    intervene,
    linear_eq,
    po_independence_oracle,
    sample,
    scenario,
)
from ivfalsify.scm import Switch, Xor

HALF = Fraction(1, 2)


def spec_of(name, **overrides):
    _, spec = scenario(name, overrides or None)
    return spec


def discrete(name, **overrides):
    overrides.setdefault("variant", "discrete")
    return spec_of(name, **overrides)


# -- sampling ----------------------------------------------------------------


def test_sampling_is_deterministic():
    spec = ScmSpec({"A": Gaussian(0.0, 1.0)})
    a = sample(spec, 5, 7)
    b = sample(spec, 5, 7)
    assert np.array_equal(a["A"], b["A"])


def test_sample_size_must_be_positive():
    spec = ScmSpec({"A": Gaussian()})
    with pytest.raises(ScmError):
        sample(spec, 0, 1)
    with pytest.raises(ScmError):
        sample(spec, -3, 1)


def test_invalid_distributions_rejected():
    with pytest.raises(ScmError):
        Gaussian(0.0, -1.0)
    with pytest.raises(ScmError):
        Bernoulli(Fraction(3, 2))


def test_linear_gaussian_moments_match_structural_closed_form():
    # Writing the outcome in the exogenous basis:
    #   Y = 1.5*U1 + 2*W + eZ + eX + eY, so var(Y) = 2.25 + 4 + 3 = 9.25,
    #   cov(Z, Y) = 0.5*1.5 + 1 = 1.75, cov(Z, NC1) = 0.5.
    n = 100_000
    data = sample(spec_of("fig1a"), n, 99)
    y = data["Y"]
    sd = np.sqrt(9.25)
    assert abs(y.mean()) < 4 * sd / np.sqrt(n)
    assert abs(y.var() - 9.25) < 5 * 9.25 * np.sqrt(2.0 / n)
    cov_zy = np.cov(data["Z"], y)[0, 1]
    assert abs(cov_zy - 1.75) < 0.1
    cov_znc = np.cov(data["Z"], data["NC1"])[0, 1]
    assert abs(cov_znc - 0.5) < 0.05


def test_sampling_is_schedule_free():
    # Draws are keyed by node position, so adding a downstream node must not
    # change upstream columns.
    base = ScmSpec({"A": Gaussian(), "B": linear_eq({"A": 1.0}, noise=Gaussian())})
    grown = ScmSpec(
        {
            "A": Gaussian(),
            "B": linear_eq({"A": 1.0}, noise=Gaussian()),
            "C": linear_eq({"B": 2.0}, noise=Gaussian()),
        }
    )
    a = sample(base, 100, 5)
    b = sample(grown, 100, 5)
    assert np.array_equal(a["A"], b["A"])
    assert np.array_equal(a["B"], b["B"])


def test_switch_gates_by_subgroup():
    spec = ScmSpec(
        {
            "M": Bernoulli(HALF),
            "U": Gaussian(),
            "Y": Equation((Switch("M", 1, "U", 2.0),)),
        }
    )
    data = sample(spec, 500, 3)
    on = data["M"] == 1.0
    assert np.allclose(data["Y"][on], 2.0 * data["U"][on])
    assert np.allclose(data["Y"][~on], 0.0)


def test_xor_matches_logical_xor():
    spec = discrete("d5", theta=0)
    data = sample(spec, 400, 11)
    expected = np.logical_xor(data["U"] > 0.5, data["R1"] > 0.5).astype(float)
    assert np.array_equal(data["NC1"], expected)


# -- exact joints ------------------------------------------------------------


def test_single_bernoulli_pmf_is_exact():
    pmf = exact_joint(ScmSpec({"A": Bernoulli(Fraction(3, 10))}))
    assert pmf.exact
    assert pmf.table == {(0,): Fraction(7, 10), (1,): Fraction(3, 10)}


def test_xor_scenario_has_eight_uniform_exogenous_states():
    pmf = exact_joint(discrete("d5", theta=0))
    assert pmf.exact
    sources = pmf.marginal(("U", "R1", "R2"))
    assert len(sources.table) == 8
    assert set(sources.table.values()) == {Fraction(1, 8)}
    z = pmf.marginal(("Z",))
    assert z.table[(1,)] == HALF


def test_probabilities_sum_to_one():
    pmf = exact_joint(discrete("fig1a"))
    assert sum(pmf.table.values()) == 1
    assert all(p >= 0 for p in pmf.table.values())


def test_continuous_nodes_cannot_be_enumerated():
    with pytest.raises(ExactnessError):
        exact_joint(ScmSpec({"A": Gaussian()}))


def test_state_cap_guards_enumeration():
    wide = ScmSpec({f"B{i}": Bernoulli(HALF) for i in range(24)})
    with pytest.raises(ScmError, match="cap"):
        exact_joint(wide)


# -- conditional-independence oracle ----------------------------------------


def test_xor_marginals_are_independent_but_the_pair_is_not():
    pmf = exact_joint(discrete("d5", theta=0))
    assert ci_oracle(pmf, "NC1", "Z")
    assert ci_oracle(pmf, "NC2", "Z")
    assert not ci_oracle(pmf, ("NC1", "NC2"), "Z")
    assert not ci_oracle(pmf, ("NC1", "NC2"), "Z", ("U",))


def test_biased_coin_breaks_the_xor_symmetry():
    # With P(R1=1)=3/5 the second proxy is no longer independent of the IV
    # given the latent, while the first proxy survives.  Unconditionally the
    # fair latent still masks the dependence; biasing it too unmasks it.
    pmf = exact_joint(discrete("d5", theta=0, p1=Fraction(3, 5)))
    assert pmf.exact
    assert not ci_oracle(pmf, "NC2", "Z", ("U",))
    assert ci_oracle(pmf, "NC1", "Z", ("U",))
    assert ci_oracle(pmf, "NC2", "Z")
    both = exact_joint(
        discrete("d5", theta=0, p1=Fraction(3, 5), pu=Fraction(3, 5))
    )
    assert not ci_oracle(both, "NC2", "Z")


def test_independent_product_is_independent():
    pmf = exact_joint(ScmSpec({"A": Bernoulli(HALF), "B": Bernoulli(Fraction(1, 3))}))
    assert ci_oracle(pmf, "A", "B")


def test_unknown_variable_is_an_error():
    pmf = exact_joint(ScmSpec({"A": Bernoulli(HALF)}))
    with pytest.raises(ScmError):
        ci_oracle(pmf, "A", "missing")


def _random_fraction(rng):
    num = int(rng.integers(1, 5))
    return Fraction(num, num + int(rng.integers(1, 6)))


def test_contraction_axiom_on_constructed_pmfs():
    # Factorization P(D) P(Q|D) P(B|D) P(A|D,Q) guarantees A⊥B|(D,Q) and
    # B⊥Q|D; contraction then forces A⊥B|D.  All arithmetic is rational.
    rng = np.random.default_rng(2026)
    for _ in range(500):
        p_d = _random_fraction(rng)
        p_q = {d: _random_fraction(rng) for d in (0, 1)}
        p_b = {d: _random_fraction(rng) for d in (0, 1)}
        p_a = {(d, q): _random_fraction(rng) for d in (0, 1) for q in (0, 1)}
        table = {}
        for a, b, d, q in itertools.product((0, 1), repeat=4):
            p = p_d if d else 1 - p_d
            p *= p_q[d] if q else 1 - p_q[d]
            p *= p_b[d] if b else 1 - p_b[d]
            p *= p_a[d, q] if a else 1 - p_a[d, q]
            table[(a, b, d, q)] = p
        pmf = JointPmf(("A", "B", "D", "Q"), table, True)
        assert ci_oracle(pmf, "A", "B", ("D", "Q"))
        assert ci_oracle(pmf, "B", "Q", ("D",))
        assert ci_oracle(pmf, "A", "B", ("D",))


# -- interventions -----------------------------------------------------------


def test_do_operator_degenerates_the_assigned_node():
    spec = discrete("fig1a", suspect="off")
    pmf = exact_joint(intervene(spec, {"X": 1}))
    assert pmf.marginal(("X",)).table == {(1,): Fraction(1)}


def test_do_on_treatment_leaves_upstream_mediator_alone():
    spec = discrete("fig1b")
    before = exact_joint(spec).marginal(("U2",)).table
    for x in (0, 1):
        after = exact_joint(intervene(spec, {"X": x})).marginal(("U2",)).table
        assert after == before


def test_exclusion_restriction_under_joint_interventions():
    # do(Z=z, X=x): cutting into Z severs confounding, so the valid design
    # and the confounded one (fig1a) both leave the outcome law flat in z;
    # a mediated leak (fig1b) makes it move.
    for name in ("fig1a", "fig1b"):
        off = discrete(name, suspect="off")
        for x in (0, 1):
            laws = [
                exact_joint(intervene(off, {"Z": z, "X": x})).marginal(("Y",)).table
                for z in (0, 1)
            ]
            assert laws[0] == laws[1]
    leak = discrete("fig1b")
    moved = False
    for x in (0, 1):
        laws = [
            exact_joint(intervene(leak, {"Z": z, "X": x})).marginal(("Y",)).table
            for z in (0, 1)
        ]
        moved = moved or laws[0] != laws[1]
    assert moved


def test_intervene_rejects_unknown_nodes():
    with pytest.raises(ScmError):
        intervene(spec_of("fig1a"), {"Nope": 1})


# -- potential-outcome oracle -------------------------------------------------


def test_po_oracle_tracks_the_suspect_edge():
    assert po_independence_oracle(discrete("fig1a", suspect="off"))
    assert not po_independence_oracle(discrete("fig1a"))
    assert not po_independence_oracle(discrete("fig1b"))


def test_po_oracle_accepts_a_randomized_iv():
    spec = ScmSpec(
        {
            "Z": Bernoulli(HALF),
            "X": linear_eq({"Z": 1}, noise=Bernoulli(HALF)),
            "Y": linear_eq({"X": 1}, noise=Bernoulli(HALF)),
        },
        roles={"z": "Z", "x": "X", "y": "Y"},
    )
    assert po_independence_oracle(spec)


def test_po_oracle_requires_a_discrete_model():
    with pytest.raises(ExactnessError):
        po_independence_oracle(spec_of("fig1a"))


# -- graph/distribution coherence --------------------------------------------


SOUNDNESS_SCENARIOS = ("fig1a", "fig1c", "fig2b", "d1", "d2", "d5")


def _queries(nodes):
    for a, b in itertools.combinations(nodes, 2):
        rest = [n for n in nodes if n not in (a, b)]
        conds = [()]
        conds += [(c,) for c in rest]
        conds += list(itertools.combinations(rest, 2))
        for cond in conds[:12]:
            yield a, b, cond


@pytest.mark.parametrize("name", SOUNDNESS_SCENARIOS)
def test_d_separation_implies_exact_independence(name):
    dag, spec = scenario(name, {"variant": "discrete"})
    pmf = exact_joint(spec)
    for a, b, cond in _queries(dag.nodes):
        if d_separated(dag, a, b, cond):
            assert ci_oracle(pmf, a, b, cond), (name, a, b, cond)


@pytest.mark.parametrize("name", ["fig1a", "fig1c"])
def test_d_connection_shows_up_at_default_parameters(name):
    # Faithfulness spot-check.  Unit coefficients everywhere (including the
    # suspect edge) keep the discrete sums non-injective, so conditioning
    # never silently pins a latent; any remaining degenerate cells are
    # filtered out explicitly.
    dag, spec = scenario(name, {"variant": "discrete", "s": 1.0})
    pmf = exact_joint(spec)
    checked = 0
    for a, b, cond in _queries(dag.nodes):
        connected = not d_separated(dag, a, b, cond)
        if connected and _both_vary_in_every_cell(pmf, a, b, cond):
            assert not ci_oracle(pmf, a, b, cond), (name, a, b, cond)
            checked += 1
    assert checked > 10


def _both_vary_in_every_cell(pmf, a, b, cond):
    # Conditioning on a generic linear image of discrete parents can pin the
    # parents exactly; such degenerate cells are deterministically unfaithful
    # and carry no information about the query.
    m = pmf.marginal((a, b) + tuple(cond))
    cells = {}
    for state, p in m.table.items():
        if p == 0:
            continue
        seen = cells.setdefault(state[2:], (set(), set()))
        seen[0].add(state[0])
        seen[1].add(state[1])
    return all(len(sa) > 1 and len(sb) > 1 for sa, sb in cells.values())


def test_theorem_one_direction_on_the_nco_scenarios():
    # Qualified NCO + invalid design => detectable dependence, and a
    # detected dependence => the design really is invalid.
    for name, nc in (("fig1a", "NC1"), ("fig1b", "NC2")):
        for suspect in ("on", "off"):
            dag, spec = scenario(name, {"variant": "discrete", "suspect": suspect})
            pmf = exact_joint(spec)
            dependent = not ci_oracle(pmf, nc, "Z")
            valid = po_independence_oracle(spec)
            if dependent:
                assert not valid, (name, suspect)
            if not valid:
                assert dependent, (name, suspect)


def test_theorem_two_and_three_directions_on_the_nci_scenarios():
    for name, nc in (("fig1c", "NC3"), ("fig1d", "NC4")):
        for suspect in ("on", "off"):
            dag, spec = scenario(name, {"variant": "discrete", "suspect": suspect})
            pmf = exact_joint(spec)
            dependent = not ci_oracle(pmf, nc, "Y", ("Z",))
            valid = po_independence_oracle(spec)
            if dependent:
                assert not valid, (name, suspect)
            if not valid:
                assert dependent, (name, suspect)
    # the unconditional form applies when the candidate is independent of Z
    for suspect, expect_dep in (("on", True), ("off", False)):
        spec = discrete("fig2a", suspect=suspect)
        pmf = exact_joint(spec)
        assert ci_oracle(pmf, "NC", "Z")
        assert (not ci_oracle(pmf, "NC", "Y")) == expect_dep
