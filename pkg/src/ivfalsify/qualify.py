"""Graphical qualification of IV designs, alternative-path variables, and
negative-control candidates.

Every check reduces to d-separation claims evaluated over all subsets of the
graph's suspect edges (a suspect edge is a hypothesized threat that may or
may not be real):

* a plain independence clause must hold in every subset;
* a dependence clause (comparability, relevance) must be d-connected in
  every subset;
* an implication clause must, subset by subset, have a true consequent
  whenever its antecedent holds.

Verdicts are graphical only -- d-connection does not imply dependence in a
particular unfaithful distribution -- so every verdict carries a
``graphical-only`` note and the exact-distribution oracle owns the
unfaithful counterexamples.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .graphs import Dag, Edge, GraphError, d_separated, find_open_trail, remove_incoming

_NC_ROLES = ("latent", "candidate", "other")


@dataclass(frozen=True)
class ClauseResult:
    name: str
    claim: str
    holds: bool
    witness_subset: tuple[str, ...] | None = None
    witness_trail: tuple[str, ...] | None = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "claim": self.claim,
            "holds": self.holds,
            "witness_subset": list(self.witness_subset) if self.witness_subset is not None else None,
            "witness_trail": list(self.witness_trail) if self.witness_trail is not None else None,
        }


@dataclass(frozen=True)
class QualificationVerdict:
    subject: str
    qualified: bool
    clauses: tuple[ClauseResult, ...]
    notes: tuple[str, ...] = ()

    @property
    def failed_conditions(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.clauses if not c.holds)

    @property
    def witness(self) -> tuple[tuple[str, ...] | None, tuple[str, ...] | None] | None:
        """(suspect-edge subset, open trail) of the first failing clause."""
        for c in self.clauses:
            if not c.holds:
                return (c.witness_subset, c.witness_trail)
        return None

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "qualified": self.qualified,
            "failed_conditions": list(self.failed_conditions),
            "clauses": [c.to_dict() for c in self.clauses],
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(", ", ": "))


# -- statement / clause machinery -----------------------------------------


@dataclass(frozen=True)
class _Stmt:
    a: str
    b: str
    cond: frozenset
    cut: str | None = None  # remove arrows entering this node first

    def holds_in(self, sub: Dag) -> bool:
        g2 = remove_incoming(sub, self.cut) if self.cut else sub
        return d_separated(g2, self.a, self.b, self.cond)

    def open_trail(self, sub: Dag) -> tuple[str, ...] | None:
        g2 = remove_incoming(sub, self.cut) if self.cut else sub
        return find_open_trail(g2, self.a, self.b, self.cond)

    def claim(self, negate: bool = False) -> str:
        rel = "⊥̸" if negate else "⊥"
        s = f"{self.a} {rel} {self.b}"
        if self.cond:
            s += " | " + ",".join(sorted(self.cond))
        if self.cut:
            s += f" [arrows into {self.cut} removed]"
        return s


def _subset_names(subset: tuple[Edge, ...]) -> tuple[str, ...]:
    return tuple(f"{e.tail}->{e.head}" for e in subset)


def _clause_sep(g: Dag, subsets, name: str, stmt: _Stmt) -> ClauseResult:
    for subset in subsets:
        sub = g.resolve_suspects(subset)
        if not stmt.holds_in(sub):
            return ClauseResult(name, stmt.claim(), False, _subset_names(subset), stmt.open_trail(sub))
    return ClauseResult(name, stmt.claim(), True)


def _clause_dep(g: Dag, subsets, name: str, stmt: _Stmt) -> ClauseResult:
    for subset in subsets:
        sub = g.resolve_suspects(subset)
        if stmt.holds_in(sub):
            return ClauseResult(name, stmt.claim(negate=True), False, _subset_names(subset), None)
    return ClauseResult(name, stmt.claim(negate=True), True)


def _clause_imp(g: Dag, subsets, name: str, ante: _Stmt, cons: _Stmt) -> ClauseResult:
    claim = f"if {ante.claim()} then {cons.claim()}"
    for subset in subsets:
        sub = g.resolve_suspects(subset)
        if ante.holds_in(sub) and not cons.holds_in(sub):
            return ClauseResult(name, claim, False, _subset_names(subset), cons.open_trail(sub))
    return ClauseResult(name, claim, True)


def _verdict(subject: str, clauses, notes=()) -> QualificationVerdict:
    clauses = tuple(clauses)
    qualified = all(c.holds for c in clauses)
    return QualificationVerdict(subject, qualified, clauses, tuple(notes))


def _design_nodes(g: Dag) -> tuple[str, str, str, frozenset]:
    z, x, y = g.iv, g.treatment, g.outcome
    missing = [r for r, n in (("iv", z), ("treatment", x), ("outcome", y)) if n is None]
    if missing:
        raise GraphError(f"graph must assign role(s): {', '.join(missing)}")
    return z, x, y, frozenset(g.controls)


def _check_threat_var(g: Dag, u: str, what: str) -> None:
    g.role(u)  # raises on unknown node
    if g.role(u) not in _NC_ROLES:
        raise GraphError(f"{what} {u!r} must be a latent, candidate, or untagged node")


def _uninformative(g: Dag, u: str, z: str, y: str) -> bool:
    # u disconnected from both the IV and the outcome even with every
    # suspect edge present: the checks hold vacuously.
    return d_separated(g, u, z, ()) and d_separated(g, u, y, ())


# -- public checks ---------------------------------------------------------


def check_iv_graphical(g: Dag, include_suspect: bool | None = None) -> QualificationVerdict:
    """Graphical IV validity: exclusion in the treatment-cut graph, relevance in the full graph.

    Evaluated on the graph including suspect edges (threats real) and, when
    ``include_suspect`` is None, also excluding them; pass True/False to get
    a single variant.
    """
    z, x, y, c = _design_nodes(g)
    if include_suspect is None:
        variants = [(True, "-with-suspects"), (False, "-without-suspects")]
    else:
        variants = [(include_suspect, "")]
    clauses = []
    for present, tag in variants:
        sub = g if present else g.resolve_suspects(())
        excl = _Stmt(z, y, c, cut=x)
        rel = _Stmt(z, x, c)
        trail = None if excl.holds_in(sub) else excl.open_trail(sub)
        subset = _subset_names(g.suspect_edges) if present else ()
        clauses.append(
            ClauseResult(f"exclusion{tag}", excl.claim(), trail is None,
                         None if trail is None else subset, trail)
        )
        connected = not rel.holds_in(sub)
        clauses.append(
            ClauseResult(f"relevance{tag}", rel.claim(negate=True), connected,
                         None if connected else subset, None)
        )
    return _verdict(f"iv:{z}", clauses, notes=("graphical-only",))


def check_apo(g: Dag, u: str) -> QualificationVerdict:
    """Is ``u`` an alternative-path variable whose outcome link is taken as known
    (so the test concern is its link to the IV)?"""
    z, x, y, c = _design_nodes(g)
    _check_threat_var(g, u, "alternative-path variable")
    subsets = list(g.suspect_subsets())
    clauses = [
        _clause_sep(g, subsets, "latent-iv-validity", _Stmt(z, y, c | {u}, cut=x)),
        _clause_imp(g, subsets, "path-indication",
                    _Stmt(z, y, c, cut=x), _Stmt(z, u, c)),
    ]
    notes = ["graphical-only"]
    if _uninformative(g, u, z, y):
        notes.append("uninformative")
    return _verdict(f"apo:{u}", clauses, notes)


def check_api(g: Dag, u: str) -> QualificationVerdict:
    """Is ``u`` an alternative-path variable whose IV link is taken as known
    (so the test concern is its link to the outcome)?"""
    z, x, y, c = _design_nodes(g)
    _check_threat_var(g, u, "alternative-path variable")
    subsets = list(g.suspect_subsets())
    clauses = [
        _clause_sep(g, subsets, "latent-iv-validity", _Stmt(z, y, c | {u}, cut=x)),
        _clause_imp(g, subsets, "path-indication",
                    _Stmt(z, y, c, cut=x), _Stmt(u, y, c | {z})),
    ]
    notes = ["graphical-only"]
    if _uninformative(g, u, z, y):
        notes.append("uninformative")
    return _verdict(f"api:{u}", clauses, notes)


def _general_common(g: Dag, u: str, v: str, c) -> tuple[str, str, str, frozenset, list]:
    z, x, y, controls = _design_nodes(g)
    _check_threat_var(g, u, "alternative-path variable")
    _check_threat_var(g, v, "secondary threat variable")
    if u == v:
        raise GraphError("u and v must be distinct")
    cset = frozenset(c) if c is not None else frozenset()
    for n in cset:
        if g.role(n) != "control":
            raise GraphError(f"conditioning node {n!r} must have role control")
    return z, x, y, cset, list(g.suspect_subsets())


def check_general_apo(g: Dag, u: str, v: str, c=()) -> QualificationVerdict:
    """Multi-threat variant of check_apo: a second threat variable ``v`` may
    itself sit on IV- or outcome-side paths."""
    z, x, y, cset, subsets = _general_common(g, u, v, c)
    clauses = [
        _clause_sep(g, subsets, "latent-iv-validity", _Stmt(z, y, cset | {u, v}, cut=x)),
        _clause_imp(g, subsets, "path-indication",
                    _Stmt(z, y, cset | {v}, cut=x), _Stmt(z, u, cset | {v})),
        _clause_imp(g, subsets, "direct-iv-link",
                    _Stmt(z, u, cset | {v}), _Stmt(z, u, cset)),
        _clause_imp(g, subsets, "v-validity",
                    _Stmt(z, y, cset, cut=x), _Stmt(z, y, cset | {v}, cut=x)),
    ]
    return _verdict(f"general-apo:{u}|v={v}", clauses, notes=("graphical-only",))


def check_general_api(g: Dag, u: str, v: str, c=()) -> QualificationVerdict:
    """Multi-threat variant of check_api."""
    z, x, y, cset, subsets = _general_common(g, u, v, c)
    clauses = [
        _clause_sep(g, subsets, "latent-iv-validity", _Stmt(z, y, cset | {u, v}, cut=x)),
        _clause_imp(g, subsets, "path-indication",
                    _Stmt(z, y, cset | {v}, cut=x), _Stmt(u, y, cset | {v, z})),
        _clause_imp(g, subsets, "direct-outcome-link",
                    _Stmt(u, y, cset | {v, z}), _Stmt(u, y, cset | {z})),
        _clause_imp(g, subsets, "v-validity",
                    _Stmt(z, y, cset, cut=x), _Stmt(z, y, cset | {v}, cut=x)),
    ]
    return _verdict(f"general-api:{u}|v={v}", clauses, notes=("graphical-only",))


def check_nco(g: Dag, nc: str, u: str, generalized: bool = False) -> QualificationVerdict:
    """Is ``nc`` a valid negative-control outcome with respect to ``u``?

    Requires ``u`` to pass check_apo first.  ``generalized`` switches the
    NCO-assumption clause to its implication form: it is required only in
    suspect subsets where the IV is separated from ``u`` given controls.
    """
    z, x, y, c = _design_nodes(g)
    _check_threat_var(g, nc, "negative-control candidate")
    if nc == u:
        raise GraphError("nc and u must be distinct")
    apo = check_apo(g, u)
    if not apo.qualified:
        bad = ClauseResult(
            "u-not-apo",
            f"{u} qualifies as an alternative-path variable (failed: "
            + ", ".join(apo.failed_conditions) + ")",
            False, *(apo.witness or (None, None)),
        )
        return _verdict(f"nco:{nc}|u={u}", [bad], notes=("graphical-only",))
    subsets = list(g.suspect_subsets())
    nco_stmt = _Stmt(nc, z, c | {u})
    if generalized:
        first = _clause_imp(g, subsets, "nco-assumption", _Stmt(z, u, c), nco_stmt)
    else:
        first = _clause_sep(g, subsets, "nco-assumption", nco_stmt)
    clauses = [first, _clause_dep(g, subsets, "u-comparability", _Stmt(nc, u, c))]
    notes = ("graphical-only", "generalized") if generalized else ("graphical-only",)
    return _verdict(f"nco:{nc}|u={u}", clauses, notes)


def check_nci(g: Dag, nc: str, u: str, generalized: bool = False) -> QualificationVerdict:
    """Is ``nc`` a valid negative-control instrument with respect to ``u``?

    Requires ``u`` to pass check_api first.
    """
    z, x, y, c = _design_nodes(g)
    _check_threat_var(g, nc, "negative-control candidate")
    if nc == u:
        raise GraphError("nc and u must be distinct")
    api = check_api(g, u)
    if not api.qualified:
        bad = ClauseResult(
            "u-not-api",
            f"{u} qualifies as an alternative-path variable (failed: "
            + ", ".join(api.failed_conditions) + ")",
            False, *(api.witness or (None, None)),
        )
        return _verdict(f"nci:{nc}|u={u}", [bad], notes=("graphical-only",))
    subsets = list(g.suspect_subsets())
    nci_stmt = _Stmt(nc, y, c | {z, u})
    if generalized:
        first = _clause_imp(g, subsets, "nci-assumption", _Stmt(u, y, c | {z}), nci_stmt)
    else:
        first = _clause_sep(g, subsets, "nci-assumption", nci_stmt)
    clauses = [first, _clause_dep(g, subsets, "u-comparability", _Stmt(nc, u, c | {z}))]
    notes = ("graphical-only", "generalized") if generalized else ("graphical-only",)
    return _verdict(f"nci:{nc}|u={u}", clauses, notes)


def qualify_nco(g: Dag, nc: str, u: str | None = None, generalized: bool = False) -> QualificationVerdict:
    """check_nco against a named ``u``, or search all eligible nodes for one
    that qualifies (the definitions are existential in the latent variable)."""
    if u is not None:
        return check_nco(g, nc, u, generalized=generalized)
    return _qualify_search(g, nc, check_nco, "nco", generalized)


def qualify_nci(g: Dag, nc: str, u: str | None = None, generalized: bool = False) -> QualificationVerdict:
    """check_nci against a named ``u``, or search for a qualifying one."""
    if u is not None:
        return check_nci(g, nc, u, generalized=generalized)
    return _qualify_search(g, nc, check_nci, "nci", generalized)


def _qualify_search(g: Dag, nc: str, checker, kind: str, generalized: bool) -> QualificationVerdict:
    z, x, y, c = _design_nodes(g)
    tried = []
    for u in g.nodes:
        if u == nc or g.role(u) not in _NC_ROLES:
            continue
        verdict = checker(g, nc, u, generalized=generalized)
        if verdict.qualified and "uninformative" not in verdict.notes:
            return verdict
        tried.append(u)
    missing = ClauseResult(
        "no-qualifying-alternative-path-variable",
        f"some latent/candidate node qualifies {nc} (tried: " + ", ".join(tried) + ")",
        False,
    )
    return _verdict(f"{kind}:{nc}", [missing], notes=("graphical-only",))
