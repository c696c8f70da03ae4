"""Structural causal models: sampling, exact discrete joints, interventions,
and the brute-force independence/potential-outcome oracles.

Exact computations enumerate the product of all exogenous (and noise)
supports; probabilities stay exact rationals whenever the inputs are
rationals, so independence claims can be verified with equality rather than
tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as _iterproduct

import numpy as np

from . import streams
from .data import Dataset

STATE_CAP = 10**7


class ScmError(ValueError):
    """Malformed model or invalid operation on one."""


class ExactnessError(ScmError):
    """An exact computation was requested on a model with continuous parts."""


def _is_exact(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


# -- exogenous distributions ----------------------------------------------


@dataclass(frozen=True)
class Bernoulli:
    p: float | Fraction = Fraction(1, 2)

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ScmError(f"bernoulli p={self.p} outside [0, 1]")

    def sample(self, seed: int, node_index: int, n: int) -> np.ndarray:
        u = streams.uniforms(seed, node_index, 0, 0, n)
        return (u < float(self.p)).astype(float)

    def support(self):
        one = Fraction(1) if _is_exact(self.p) else 1.0
        return [(v, p) for v, p in ((0, one - self.p), (1, self.p)) if p != 0]


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if self.sd < 0:
            raise ScmError(f"gaussian sd={self.sd} negative")

    def sample(self, seed: int, node_index: int, n: int) -> np.ndarray:
        return self.mean + self.sd * streams.gaussians(seed, node_index, 0, 0, n)

    def support(self):
        return None


@dataclass(frozen=True)
class Uniform:
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if not self.high > self.low:
            raise ScmError("uniform requires high > low")

    def sample(self, seed: int, node_index: int, n: int) -> np.ndarray:
        u = streams.uniforms(seed, node_index, 0, 0, n)
        return self.low + (self.high - self.low) * u

    def support(self):
        return None


@dataclass(frozen=True)
class Discrete:
    values: tuple
    probs: tuple

    def __post_init__(self):
        if len(self.values) != len(self.probs) or not self.values:
            raise ScmError("discrete distribution needs matching, nonempty values/probs")
        if any(p < 0 for p in self.probs):
            raise ScmError("negative probability")
        total = sum(self.probs)
        if all(_is_exact(p) for p in self.probs):
            if total != 1:
                raise ScmError(f"probabilities sum to {total}, not 1")
        elif abs(float(total) - 1.0) > 1e-12:
            raise ScmError(f"probabilities sum to {float(total)}, not 1")

    def sample(self, seed: int, node_index: int, n: int) -> np.ndarray:
        u = streams.uniforms(seed, node_index, 0, 0, n)
        cum = np.cumsum([float(p) for p in self.probs])
        cum[-1] = 1.0
        idx = np.searchsorted(cum, u, side="right")
        return np.asarray([float(v) for v in self.values])[idx]

    def support(self):
        return [(v, p) for v, p in zip(self.values, self.probs) if p != 0]


@dataclass(frozen=True)
class Constant:
    value: float | int | Fraction

    def sample(self, seed: int, node_index: int, n: int) -> np.ndarray:
        return np.full(n, float(self.value))

    def support(self):
        return [(self.value, Fraction(1))]


_DISTS = (Bernoulli, Gaussian, Uniform, Discrete, Constant)


# -- structural equation terms --------------------------------------------


def _ind(x):
    if isinstance(x, np.ndarray):
        return x.astype(float)
    return 1 if x else 0


def _scale(coef, x):
    if isinstance(x, np.ndarray):
        return float(coef) * x
    return coef * x


@dataclass(frozen=True)
class Linear:
    parent: str
    coef: float | Fraction = 1

    def parents(self):
        return (self.parent,)

    def eval(self, env):
        return _scale(self.coef, env[self.parent])


@dataclass(frozen=True)
class Xor:
    a: str
    b: str
    coef: float | Fraction = 1

    def parents(self):
        return (self.a, self.b)

    def eval(self, env):
        return _scale(self.coef, _ind(env[self.a] != env[self.b]))


@dataclass(frozen=True)
class Product:
    a: str
    b: str
    coef: float | Fraction = 1

    def parents(self):
        return (self.a, self.b)

    def eval(self, env):
        return _scale(self.coef, env[self.a] * env[self.b])


@dataclass(frozen=True)
class Square:
    parent: str
    coef: float | Fraction = 1

    def parents(self):
        return (self.parent,)

    def eval(self, env):
        x = env[self.parent]
        return _scale(self.coef, x * x)


@dataclass(frozen=True)
class Threshold:
    parent: str
    cut: float = 0.0
    coef: float | Fraction = 1

    def parents(self):
        return (self.parent,)

    def eval(self, env):
        return _scale(self.coef, _ind(env[self.parent] > self.cut))


@dataclass(frozen=True)
class Switch:
    """coef * parent, active only in rows where ``gate == value``."""

    gate: str
    value: float | int
    parent: str
    coef: float | Fraction = 1

    def parents(self):
        return (self.gate, self.parent)

    def eval(self, env):
        return _scale(self.coef, env[self.parent] * _ind(env[self.gate] == self.value))


@dataclass(frozen=True)
class Equation:
    terms: tuple = ()
    intercept: float | Fraction = 0
    noise: object | None = None

    def __post_init__(self):
        if self.noise is not None and not isinstance(self.noise, _DISTS):
            raise ScmError(f"invalid noise distribution {self.noise!r}")

    def parents(self):
        seen, out = set(), []
        for t in self.terms:
            for p in t.parents():
                if p not in seen:
                    seen.add(p)
                    out.append(p)
        return tuple(out)


def linear_eq(parents=None, intercept=0, noise=None, extra=()) -> Equation:
    """Shorthand for a linear structural equation; zero-coefficient terms are
    dropped so the implied graph never carries vacuous edges."""
    terms = [Linear(p, c) for p, c in dict(parents or {}).items() if c != 0]
    terms += [t for t in extra if t.coef != 0]
    return Equation(tuple(terms), intercept, noise)


# -- model spec ------------------------------------------------------------


class ScmSpec:
    """Nodes in definition order, each exogenous (a distribution) or
    structural (an Equation over earlier-defined or any other nodes, acyclic).

    ``roles`` may name the design variables ({"z": ..., "x": ..., "y": ...});
    ``latents`` lists unobserved nodes; ``tags`` carries scenario markers such
    as ``unfaithful``.
    """

    def __init__(self, nodes, roles=None, latents=(), tags=(), name=None):
        self.nodes = dict(nodes)
        if not self.nodes:
            raise ScmError("model has no nodes")
        for node, defn in self.nodes.items():
            if not isinstance(defn, (Equation, *_DISTS)):
                raise ScmError(f"node {node!r}: invalid definition {defn!r}")
        self.roles = dict(roles or {})
        for key, val in self.roles.items():
            if val not in self.nodes:
                raise ScmError(f"role {key!r} points to unknown node {val!r}")
        self.latents = tuple(latents)
        for lat in self.latents:
            if lat not in self.nodes:
                raise ScmError(f"latent {lat!r} not a node")
        self.tags = tuple(tags)
        self.name = name
        self._node_index = {n: i for i, n in enumerate(self.nodes)}
        self._topo = self._topo_order()

    def _topo_order(self):
        pending = {
            n: set(d.parents()) if isinstance(d, Equation) else set()
            for n, d in self.nodes.items()
        }
        for n, parents in pending.items():
            unknown = parents - set(self.nodes)
            if unknown:
                raise ScmError(f"node {n!r} references unknown parent(s): {sorted(unknown)}")
        order = []
        done = set()
        while pending:
            ready = [n for n, ps in pending.items() if ps <= done]
            if not ready:
                raise ScmError(f"cyclic structural equations among: {sorted(pending)}")
            for n in ready:
                order.append(n)
                done.add(n)
                del pending[n]
        return tuple(order)

    @property
    def observed(self) -> tuple[str, ...]:
        return tuple(n for n in self.nodes if n not in self.latents)

    def parents_of(self, node: str) -> tuple[str, ...]:
        d = self.nodes[node]
        return d.parents() if isinstance(d, Equation) else ()

    def node_index(self, node: str) -> int:
        return self._node_index[node]

    def replace_nodes(self, updates) -> "ScmSpec":
        merged = dict(self.nodes)
        merged.update(updates)
        return ScmSpec(merged, self.roles, self.latents, self.tags, self.name)


# -- sampling --------------------------------------------------------------


def sample(spec: ScmSpec, n: int, seed: int) -> Dataset:
    """n i.i.d. rows; draws are addressed by (seed, node position, row), so
    identical (spec, n, seed) give bit-identical output regardless of
    evaluation order."""
    if not isinstance(n, int) or n < 1:
        raise ScmError(f"sample size must be a positive integer, got {n}")
    env: dict[str, np.ndarray] = {}
    for node in spec._topo:
        defn = spec.nodes[node]
        idx = spec.node_index(node)
        if isinstance(defn, Equation):
            acc = np.full(n, float(defn.intercept))
            for t in defn.terms:
                acc = acc + t.eval(env)
            if defn.noise is not None:
                acc = acc + defn.noise.sample(seed, idx, n)
            env[node] = acc
        else:
            env[node] = defn.sample(seed, idx, n)
    return Dataset({node: env[node] for node in spec.nodes})


# -- exact joint -----------------------------------------------------------


class JointPmf:
    """Finite joint distribution over named variables."""

    def __init__(self, names, table, exact):
        self.names = tuple(names)
        self.table = dict(table)
        self.exact = bool(exact)
        total = sum(self.table.values())
        if any(p < 0 for p in self.table.values()):
            raise ScmError("negative probability in pmf")
        if self.exact:
            if total != 1:
                raise ScmError(f"pmf sums to {total}, not 1")
        elif abs(float(total) - 1.0) > 1e-12:
            raise ScmError(f"pmf sums to {float(total)}, not 1")

    def marginal(self, names) -> "JointPmf":
        names = tuple(names)
        idx = [self._index(n) for n in names]
        zero = Fraction(0) if self.exact else 0.0
        out: dict[tuple, object] = {}
        for key, p in self.table.items():
            sub = tuple(key[i] for i in idx)
            out[sub] = out.get(sub, zero) + p
        return JointPmf(names, out, self.exact)

    def _index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ScmError(f"unknown variable {name!r}") from None

    def __len__(self) -> int:
        return len(self.table)


def _finite_sources(spec: ScmSpec):
    """(source key, support) for every stochastic input, in definition order."""
    sources = []
    for node in spec.nodes:
        defn = spec.nodes[node]
        dists = []
        if isinstance(defn, Equation):
            if defn.noise is not None:
                dists.append(((node, "noise"), defn.noise))
        else:
            dists.append(((node, "dist"), defn))
        for key, dist in dists:
            sup = dist.support()
            if sup is None:
                raise ExactnessError(
                    f"node {node!r} is continuous; exact computation requires finite supports"
                )
            sources.append((key, sup))
    return sources


def _eval_given(spec: ScmSpec, source_values: dict) -> dict:
    env: dict = {}
    for node in spec._topo:
        defn = spec.nodes[node]
        if isinstance(defn, Equation):
            val = defn.intercept
            for t in defn.terms:
                val = val + t.eval(env)
            if defn.noise is not None:
                val = val + source_values[(node, "noise")]
            env[node] = val
        elif isinstance(defn, Constant):
            env[node] = defn.value
        else:
            env[node] = source_values[(node, "dist")]
    return env


def _enumerate_states(spec: ScmSpec):
    """Yield (source_values, probability) over the product of finite supports."""
    sources = _finite_sources(spec)
    n_states = math.prod(len(sup) for _, sup in sources) if sources else 1
    if n_states > STATE_CAP:
        raise ScmError(f"{n_states} exogenous states exceed the cap of {STATE_CAP}")
    keys = [k for k, _ in sources]
    exact = all(_is_exact(p) for _, sup in sources for _, p in sup)
    one = Fraction(1) if exact else 1.0
    for combo in _iterproduct(*(sup for _, sup in sources)):
        prob = one
        for _, p in combo:
            prob = prob * p
        yield dict(zip(keys, (v for v, _ in combo))), prob, exact


def exact_joint(spec: ScmSpec) -> JointPmf:
    """Full joint over all nodes by enumeration of exogenous supports."""
    table: dict[tuple, object] = {}
    exact = True
    nodes = tuple(spec.nodes)
    for source_values, prob, is_exact in _enumerate_states(spec):
        exact = is_exact
        env = _eval_given(spec, source_values)
        key = tuple(env[n] for n in nodes)
        table[key] = table.get(key, Fraction(0) if is_exact else 0.0) + prob
    return JointPmf(nodes, table, exact)


# -- independence oracle ---------------------------------------------------


def _as_tuple(x):
    if x is None:
        return ()
    if isinstance(x, str):
        return (x,)
    return tuple(x)


def ci_oracle(pmf: JointPmf, a, b, cond=(), tol: float = 1e-12) -> bool:
    """True iff P(a, b | cond) factorizes in every positive-mass cond cell.

    Exact equality when the pmf is rational, else within ``tol``.
    """
    a, b, cond = _as_tuple(a), _as_tuple(b), _as_tuple(cond)
    if not a or not b:
        raise ScmError("a and b must be nonempty")
    all_names = a + b + cond
    if len(set(all_names)) != len(all_names):
        raise ScmError("a, b, cond must be disjoint")
    sub = pmf.marginal(all_names)
    ia = range(len(a))
    ib = range(len(a), len(a) + len(b))
    ic = range(len(a) + len(b), len(all_names))

    cells: dict[tuple, dict] = {}
    for key, p in sub.table.items():
        ck = tuple(key[i] for i in ic)
        av = tuple(key[i] for i in ia)
        bv = tuple(key[i] for i in ib)
        cell = cells.setdefault(ck, {"ab": {}, "a": {}, "b": {}, "mass": None})
        zero = Fraction(0) if sub.exact else 0.0
        if cell["mass"] is None:
            cell["mass"] = zero
        cell["ab"][(av, bv)] = cell["ab"].get((av, bv), zero) + p
        cell["a"][av] = cell["a"].get(av, zero) + p
        cell["b"][bv] = cell["b"].get(bv, zero) + p
        cell["mass"] = cell["mass"] + p

    zero = Fraction(0) if sub.exact else 0.0
    for cell in cells.values():
        mass = cell["mass"]
        if mass == 0:
            continue
        for av, pa in cell["a"].items():
            for bv, pb in cell["b"].items():
                pab = cell["ab"].get((av, bv), zero)
                if sub.exact:
                    if pab * mass != pa * pb:
                        return False
                elif abs(float(pab) * float(mass) - float(pa) * float(pb)) > tol:
                    return False
    return True


# -- interventions and potential outcomes ---------------------------------


def intervene(spec: ScmSpec, assignments: dict) -> ScmSpec:
    """Replace each assigned node's mechanism with a constant (the do-operator)."""
    for node in assignments:
        if node not in spec.nodes:
            raise ScmError(f"unknown node {node!r} in intervention")
    return spec.replace_nodes({n: Constant(v) for n, v in assignments.items()})


def po_independence_oracle(spec: ScmSpec, cond=(), z=None, x=None, y=None,
                           tol: float = 1e-12) -> bool:
    """Exact check that the IV is independent of each fixed-treatment potential
    outcome given ``cond``.

    The observational IV and the intervened outcome are coupled by sharing
    the exogenous state: for every treatment value x0 with positive
    observational mass, the joint law of (Z, Y under do(X=x0), cond) must
    factorize between Z and the outcome.
    """
    z = z or spec.roles.get("z")
    x = x or spec.roles.get("x")
    y = y or spec.roles.get("y")
    if not (z and x and y):
        raise ScmError("spec must identify z, x, y roles (or pass them explicitly)")
    cond = _as_tuple(cond)
    if len({z, x, y} | set(cond)) != 3 + len(cond):
        raise ScmError("z, x, y, cond must be distinct")

    states = []
    x_support = []
    exact = True
    for source_values, prob, is_exact in _enumerate_states(spec):
        exact = is_exact
        env = _eval_given(spec, source_values)
        states.append((source_values, prob, env[z], tuple(env[c] for c in cond)))
        if env[x] not in x_support:
            x_support.append(env[x])

    names = (z, "__do_outcome__") + cond
    for x0 in sorted(x_support):
        spec_x = intervene(spec, {x: x0})
        table: dict[tuple, object] = {}
        zero = Fraction(0) if exact else 0.0
        for source_values, prob, zval, cvals in states:
            env_x = _eval_given(spec_x, source_values)
            key = (zval, env_x[y]) + cvals
            table[key] = table.get(key, zero) + prob
        pmf = JointPmf(names, table, exact)
        if not ci_oracle(pmf, z, "__do_outcome__", cond, tol=tol):
            return False
    return True
