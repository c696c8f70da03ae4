"""Catalog of paired (graph, model) scenarios.

Each scenario builds a Dag and a matching ScmSpec; suspect edges in the
graph correspond exactly to nonzero suspect coefficients in the model, so
``suspect="off"`` removes both.  Every scenario has a continuous default and
a discrete variant usable by the exact oracles.

User-defined scenarios can be registered from declarative config trees
(see ``spec_from_config``); the CLI loads them from IVF_SCENARIO_PATH.
"""
from __future__ import annotations

import inspect
from dataclasses import dataclass
from fractions import Fraction

from .graphs import Dag, Edge
from .scm import (
    Bernoulli,
    Discrete,
    Equation,
    Gaussian,
    Linear,
    Product,
    ScmError,
    ScmSpec,
    Square,
    Switch,
    Threshold,
    Uniform,
    Xor,
    linear_eq,
)

_HALF = Fraction(1, 2)


@dataclass(frozen=True)
class ScenarioInfo:
    name: str
    description: str
    params: tuple[str, ...]
    tags: tuple[str, ...]


_BUILDERS: dict = {}
_USER: dict = {}


def _register(name, description, tags=()):
    def deco(fn):
        sig = inspect.signature(fn)
        params = tuple(p for p in sig.parameters if p not in ("suspect", "variant"))
        _BUILDERS[name] = (fn, ScenarioInfo(name, description, params, tuple(tags)))
        return fn

    return deco


def list_scenarios() -> list[ScenarioInfo]:
    infos = [info for _, info in _BUILDERS.values()]
    infos += [info for _, info in _USER.values()]
    return sorted(infos, key=lambda i: i.name)


def scenario(name: str, overrides=None):
    """Build the named scenario -> (Dag, ScmSpec).

    Recognized override keys: ``suspect`` ("on"/"off" or bool), ``variant``
    ("continuous"/"discrete"), plus the scenario's named parameters.
    """
    overrides = dict(overrides or {})
    if name in _BUILDERS:
        builder, info = _BUILDERS[name]
    elif name in _USER:
        builder, info = _USER[name]
    else:
        raise ScmError(f"unknown scenario {name!r}")
    suspect = overrides.pop("suspect", "on")
    if isinstance(suspect, str):
        if suspect not in ("on", "off"):
            raise ScmError(f"suspect must be 'on' or 'off', got {suspect!r}")
        suspect = suspect == "on"
    variant = overrides.pop("variant", "continuous")
    if variant not in ("continuous", "discrete"):
        raise ScmError(f"variant must be 'continuous' or 'discrete', got {variant!r}")
    unknown = set(overrides) - set(info.params)
    if unknown:
        raise ScmError(
            f"invalid override(s) for {name!r}: {sorted(unknown)}; allowed: {list(info.params)}"
        )
    return builder(suspect=suspect, variant=variant, **overrides)


# -- assembly helpers ------------------------------------------------------


def _assemble(name, nodes, roles, latents=(), candidates=(), controls=(),
              suspects=(), tags=()):
    spec = ScmSpec(nodes, roles=roles, latents=latents, tags=tags, name=name)
    suspects = {tuple(s) for s in suspects}
    role_map = {}
    for n in spec.nodes:
        if n == roles.get("z"):
            role_map[n] = "iv"
        elif n == roles.get("x"):
            role_map[n] = "treatment"
        elif n == roles.get("y"):
            role_map[n] = "outcome"
        elif n in controls:
            role_map[n] = "control"
        elif n in candidates:
            role_map[n] = "candidate"
        elif n in latents:
            role_map[n] = "latent"
        else:
            role_map[n] = "other"
    edges = []
    for node in spec.nodes:
        for p in spec.parents_of(node):
            edges.append(Edge(p, node, suspect=(p, node) in suspects))
    dag = Dag(role_map, edges)
    missing = [s for s in suspects if s not in {(e.tail, e.head) for e in dag.edges}]
    if missing:
        raise ScmError(f"scenario {name}: suspect edge(s) not realized: {missing}")
    return dag, spec


def _exo(variant, sd=1.0):
    return Gaussian(0.0, sd) if variant == "continuous" else Bernoulli(_HALF)


def _noise(variant, sd=1.0):
    return Gaussian(0.0, sd) if variant == "continuous" else Bernoulli(_HALF)


# -- core figure scenarios -------------------------------------------------


@_register(
    "fig1a",
    "Latent trait may drive both the IV and the outcome (outcome-independence "
    "threat); NC1 proxies the trait.",
)
def _fig1a(suspect=True, variant="continuous", s=0.5, a=1.0, b=1.0, c=1.0, d=1.0,
           e=1.0, f=1.0, nc_noise=0.5):
    sv = s if suspect else 0
    nodes = {
        "W": _exo(variant),
        "U1": _exo(variant),
        "Z": linear_eq({"U1": sv}, noise=_noise(variant)),
        "X": linear_eq({"Z": a, "W": b}, noise=_noise(variant)),
        "Y": linear_eq({"X": c, "W": d, "U1": e}, noise=_noise(variant)),
        "NC1": linear_eq({"U1": f}, noise=_noise(variant, nc_noise)),
    }
    return _assemble("fig1a", nodes, {"z": "Z", "x": "X", "y": "Y"},
                     latents=("W", "U1"), candidates=("NC1",),
                     suspects=[("U1", "Z")] if sv != 0 else [])


@_register(
    "fig1b",
    "IV may shift a latent mediator of the outcome (exclusion threat); "
    "NC2 proxies the mediator.",
)
def _fig1b(suspect=True, variant="continuous", s=0.5, a=1.0, b=1.0, c=1.0, d=1.0,
           e=1.0, f=1.0, nc_noise=0.5):
    sv = s if suspect else 0
    nodes = {
        "W": _exo(variant),
        "Z": _exo(variant),
        "U2": linear_eq({"Z": sv}, noise=_noise(variant)),
        "X": linear_eq({"Z": a, "W": b}, noise=_noise(variant)),
        "Y": linear_eq({"X": c, "W": d, "U2": e}, noise=_noise(variant)),
        "NC2": linear_eq({"U2": f}, noise=_noise(variant, nc_noise)),
    }
    return _assemble("fig1b", nodes, {"z": "Z", "x": "X", "y": "Y"},
                     latents=("W", "U2"), candidates=("NC2",),
                     suspects=[("Z", "U2")] if sv != 0 else [])


@_register(
    "fig1c",
    "Latent driver of the IV may also hit the outcome directly; NC3 proxies "
    "it and is tested conditional on the IV.",
)
def _fig1c(suspect=True, variant="continuous", s=0.5, za=1.0, a=1.0, b=1.0,
           c=1.0, d=1.0, f=1.0, nc_noise=0.5):
    sv = s if suspect else 0
    nodes = {
        "W": _exo(variant),
        "U3": _exo(variant),
        "Z": linear_eq({"U3": za}, noise=_noise(variant)),
        "X": linear_eq({"Z": a, "W": b}, noise=_noise(variant)),
        "Y": linear_eq({"X": c, "W": d, "U3": sv}, noise=_noise(variant)),
        "NC3": linear_eq({"U3": f}, noise=_noise(variant, nc_noise)),
    }
    return _assemble("fig1c", nodes, {"z": "Z", "x": "X", "y": "Y"},
                     latents=("W", "U3"), candidates=("NC3",),
                     suspects=[("U3", "Y")] if sv != 0 else [])


@_register(
    "fig1d",
    "IV-caused latent variable may hit the outcome (exclusion threat); "
    "NC4 proxies it.",
)
def _fig1d(suspect=True, variant="continuous", s=0.5, za=1.0, a=1.0, b=1.0,
           c=1.0, d=1.0, f=1.0, nc_noise=0.5):
    sv = s if suspect else 0
    nodes = {
        "W": _exo(variant),
        "Z": _exo(variant),
        "U4": linear_eq({"Z": za}, noise=_noise(variant)),
        "X": linear_eq({"Z": a, "W": b}, noise=_noise(variant)),
        "Y": linear_eq({"X": c, "W": d, "U4": sv}, noise=_noise(variant)),
        "NC4": linear_eq({"U4": f}, noise=_noise(variant, nc_noise)),
    }
    return _assemble("fig1d", nodes, {"z": "Z", "x": "X", "y": "Y"},
                     latents=("W", "U4"), candidates=("NC4",),
                     suspects=[("U4", "Y")] if sv != 0 else [])


@_register(
    "fig2a",
    "Candidate NCI feeds the threat variable and is independent of the IV, "
    "so the unconditional NCI test applies.",
)
def _fig2a(suspect=True, variant="continuous", s=0.5, za=1.0, a=1.0, b=1.0,
           c=1.0, d=1.0, f=1.0):
    sv = s if suspect else 0
    nodes = {
        "W": _exo(variant),
        "Z": _exo(variant),
        "NC": _exo(variant),
        "U": linear_eq({"Z": za, "NC": f}, noise=_noise(variant)),
        "X": linear_eq({"Z": a, "W": b}, noise=_noise(variant)),
        "Y": linear_eq({"X": c, "W": d, "U": sv}, noise=_noise(variant)),
    }
    return _assemble("fig2a", nodes, {"z": "Z", "x": "X", "y": "Y"},
                     latents=("W", "U"), candidates=("NC",),
                     suspects=[("U", "Y")] if sv != 0 else [])


@_register(
    "fig2b",
    "Candidate NCI causally affects the IV; comparability with the threat "
    "variable arises through the collider at the conditioned IV.",
)
def _fig2b(suspect=True, variant="continuous", s=0.5, za=1.0, a=1.0, b=1.0,
           c=1.0, d=1.0, f=1.0):
    sv = s if suspect else 0
    nodes = {
        "W": _exo(variant),
        "U": _exo(variant),
        "NC": _exo(variant),
        "Z": linear_eq({"U": za, "NC": f}, noise=_noise(variant)),
        "X": linear_eq({"Z": a, "W": b}, noise=_noise(variant)),
        "Y": linear_eq({"X": c, "W": d, "U": sv}, noise=_noise(variant)),
    }
    return _assemble("fig2b", nodes, {"z": "Z", "x": "X", "y": "Y"},
                     latents=("W", "U"), candidates=("NC",),
                     suspects=[("U", "Y")] if sv != 0 else [])


# -- appendix counterexamples ---------------------------------------------


@_register(
    "d1",
    "NC proxies a second latent variable that is only non-causally associated "
    "with the outcome through the first; valid NCO with respect to the "
    "proxied variable only.",
)
def _d1(suspect=True, variant="continuous", s=0.5, g1=1.0, a=1.0, b=1.0,
        c=1.0, d=1.0, e=1.0, f=1.0, nc_noise=0.5):
    sv = s if suspect else 0
    nodes = {
        "U1": _exo(variant),
        "W": _exo(variant),
        "U2": linear_eq({"U1": g1}, noise=_noise(variant)),
        "NC": linear_eq({"U2": f}, noise=_noise(variant, nc_noise)),
        "Z": linear_eq({"U2": sv}, noise=_noise(variant)),
        "X": linear_eq({"Z": a, "W": b}, noise=_noise(variant)),
        "Y": linear_eq({"X": c, "W": d, "U1": e}, noise=_noise(variant)),
    }
    return _assemble("d1", nodes, {"z": "Z", "x": "X", "y": "Y"},
                     latents=("U1", "W", "U2"), candidates=("NC",),
                     suspects=[("U2", "Z")] if sv != 0 else [])


@_register(
    "d2",
    "Pooled population with opposing subgroup mechanisms: the IV shifts the "
    "latent variable in one group, the latent variable shifts the outcome in "
    "the other.  The pooled design is valid yet N correlates with the IV.",
    tags=("unfaithful",),
)
def _d2(suspect=True, variant="continuous", ga=1.0, gb=1.0, a=1.0, b=1.0,
        c=1.0, d=1.0, f=1.0, nc_noise=0.5):
    # Both subgroup mechanisms are solid edges in the pooled graph; there is
    # nothing to toggle, so `suspect` is accepted and ignored.
    nodes = {
        "M": Bernoulli(_HALF),
        "W": _exo(variant),
        "Z": _exo(variant),
        "U": Equation((Switch("M", 1, "Z", ga),), noise=_noise(variant)),
        "X": linear_eq({"Z": a, "W": b}, noise=_noise(variant)),
        "Y": Equation(
            (Linear("X", c), Linear("W", d), Switch("M", 0, "U", gb)),
            noise=_noise(variant),
        ),
        "N": linear_eq({"U": f}, noise=_noise(variant, nc_noise)),
    }
    return _assemble("d2", nodes, {"z": "Z", "x": "X", "y": "Y"},
                     latents=("M", "W", "U"), candidates=("N",),
                     tags=("unfaithful",))


@_register(
    "d3",
    "Two independent latent components: one drives the IV and the proxy but "
    "not the outcome, the other may drive the outcome but not the IV.  The "
    "stacked vector fails path indication while the design stays valid.",
    tags=("unfaithful",),
)
def _d3(suspect=True, variant="continuous", s=0.5, za=1.0, a=1.0, b=1.0,
        c=1.0, d=1.0, f=1.0, nc_noise=0.5):
    sv = s if suspect else 0
    nodes = {
        "W": _exo(variant),
        "U1": _exo(variant),
        "U2": _exo(variant),
        "Z": linear_eq({"U1": za}, noise=_noise(variant)),
        "N": linear_eq({"U1": f}, noise=_noise(variant, nc_noise)),
        "X": linear_eq({"Z": a, "W": b}, noise=_noise(variant)),
        "Y": linear_eq({"X": c, "W": d, "U2": sv}, noise=_noise(variant)),
    }
    return _assemble("d3", nodes, {"z": "Z", "x": "X", "y": "Y"},
                     latents=("W", "U1", "U2"), candidates=("N",),
                     suspects=[("U2", "Y")] if sv != 0 else [],
                     tags=("unfaithful",))


@_register(
    "d4",
    "Latent variable drives the IV and the treatment and may drive the "
    "outcome: not a valid API variable (its outcome link via the treatment "
    "exists even without the threat edge).",
)
def _d4(suspect=True, variant="continuous", s=0.5, za=1.0, g=1.0, a=1.0,
        b=1.0, c=1.0, d=1.0, f=1.0, nc_noise=0.5):
    sv = s if suspect else 0
    nodes = {
        "W": _exo(variant),
        "U": _exo(variant),
        "Z": linear_eq({"U": za}, noise=_noise(variant)),
        "X": linear_eq({"Z": a, "U": g, "W": b}, noise=_noise(variant)),
        "Y": linear_eq({"X": c, "W": d, "U": sv}, noise=_noise(variant)),
        "N": linear_eq({"U": f}, noise=_noise(variant, nc_noise)),
    }
    return _assemble("d4", nodes, {"z": "Z", "x": "X", "y": "Y"},
                     latents=("W", "U"), candidates=("N",),
                     suspects=[("U", "Y")] if sv != 0 else [])


@_register(
    "d4a",
    "Latent variable drives the treatment and the outcome and may drive the "
    "IV: a valid APO variable, and its proxy a valid NCO.",
)
def _d4a(suspect=True, variant="continuous", s=0.5, g=1.0, e=1.0, a=1.0,
         b=1.0, c=1.0, d=1.0, f=1.0, nc_noise=0.5):
    sv = s if suspect else 0
    nodes = {
        "W": _exo(variant),
        "U": _exo(variant),
        "Z": linear_eq({"U": sv}, noise=_noise(variant)),
        "X": linear_eq({"Z": a, "U": g, "W": b}, noise=_noise(variant)),
        "Y": linear_eq({"X": c, "W": d, "U": e}, noise=_noise(variant)),
        "NC": linear_eq({"U": f}, noise=_noise(variant, nc_noise)),
    }
    return _assemble("d4a", nodes, {"z": "Z", "x": "X", "y": "Y"},
                     latents=("W", "U"), candidates=("NC",),
                     suspects=[("U", "Z")] if sv != 0 else [])


@_register(
    "d5",
    "XOR construction: each NC is marginally independent of the IV while the "
    "pair is jointly dependent; the vector is not a valid NCO.",
    tags=("unfaithful",),
)
def _d5(suspect=True, variant="continuous", theta=0.5, p1=_HALF, p2=_HALF,
        pu=_HALF, z_noise=0.5):
    tv = theta if suspect else 0
    noise = Gaussian(0.0, z_noise) if variant == "continuous" else None
    nodes = {
        "U": Bernoulli(pu),
        "R1": Bernoulli(p1),
        "R2": Bernoulli(p2),
        "Z": Equation(
            tuple(t for t in (Xor("R1", "R2", 1), Linear("U", tv)) if t.coef != 0),
            noise=noise,
        ),
        "NC1": Equation((Xor("U", "R1", 1),)),
        "NC2": Equation((Xor("U", "R2", 1),)),
    }
    return _assemble("d5", nodes, {"z": "Z"},
                     latents=("U", "R1", "R2"), candidates=("NC1", "NC2"),
                     suspects=[("U", "Z")] if tv != 0 else [],
                     tags=("unfaithful",))


@_register(
    "d6",
    "Two independent threat variables, each with a possible IV link; the "
    "multi-threat qualification holds for each given the other.",
)
def _d6(suspect=True, variant="continuous", s1=0.5, s2=0.5, e1=1.0, e2=1.0,
        a=1.0, b=1.0, c=1.0, d=1.0):
    sv1 = s1 if suspect else 0
    sv2 = s2 if suspect else 0
    nodes = {
        "W": _exo(variant),
        "U": _exo(variant),
        "V": _exo(variant),
        "Z": linear_eq({"U": sv1, "V": sv2}, noise=_noise(variant)),
        "X": linear_eq({"Z": a, "W": b}, noise=_noise(variant)),
        "Y": linear_eq({"X": c, "W": d, "U": e1, "V": e2}, noise=_noise(variant)),
    }
    suspects = [p for p, v in ((("U", "Z"), sv1), (("V", "Z"), sv2)) if v != 0]
    return _assemble("d6", nodes, {"z": "Z", "x": "X", "y": "Y"},
                     latents=("W", "U", "V"), suspects=suspects)


@_register(
    "d7",
    "The variables available as proxies sit upstream/downstream of an "
    "intermediate driver of the IV: the direct-IV-link condition fails.",
)
def _d7(suspect=True, variant="continuous", s=0.5, g1=1.0, g2=1.0, e=1.0,
        a=1.0, b=1.0, c=1.0, d=1.0):
    sv = s if suspect else 0
    nodes = {
        "U1": _exo(variant),
        "W": _exo(variant),
        "V": linear_eq({"U1": g1}, noise=_noise(variant)),
        "U2": linear_eq({"V": g2}, noise=_noise(variant)),
        "Z": linear_eq({"V": sv}, noise=_noise(variant)),
        "X": linear_eq({"Z": a, "W": b}, noise=_noise(variant)),
        "Y": linear_eq({"X": c, "W": d, "V": e}, noise=_noise(variant)),
    }
    return _assemble("d7", nodes, {"z": "Z", "x": "X", "y": "Y"},
                     latents=("U1", "W", "U2", "V"),
                     suspects=[("V", "Z")] if sv != 0 else [])


@_register(
    "d8",
    "The IV may feed an observed variable that also receives the latent "
    "threat: conditioning on that collider opens an IV-threat association "
    "and path indication fails.",
)
def _d8(suspect=True, variant="continuous", s=0.5, g=1.0, e=1.0, a=1.0,
        b=1.0, c=1.0, d=1.0):
    sv = s if suspect else 0
    nodes = {
        "W": _exo(variant),
        "U": _exo(variant),
        "Z": _exo(variant),
        "V": linear_eq({"Z": sv, "U": g}, noise=_noise(variant)),
        "X": linear_eq({"Z": a, "W": b}, noise=_noise(variant)),
        "Y": linear_eq({"X": c, "W": d, "V": e}, noise=_noise(variant)),
    }
    return _assemble("d8", nodes, {"z": "Z", "x": "X", "y": "Y"},
                     latents=("W", "U", "V"),
                     suspects=[("Z", "V")] if sv != 0 else [])


@_register(
    "d9",
    "An observed variable collides influences of the IV side and the outcome "
    "itself; conditioning on it breaks the design (V-validity failure).",
)
def _d9(suspect=True, variant="continuous", za=1.0, g=1.0, h=1.0, a=1.0,
        b=1.0, c=1.0, d=1.0):
    nodes = {
        "W": _exo(variant),
        "U": _exo(variant),
        "Z": linear_eq({"U": za}, noise=_noise(variant)),
        "X": linear_eq({"Z": a, "W": b}, noise=_noise(variant)),
        "Y": linear_eq({"X": c, "W": d}, noise=_noise(variant)),
        "V": linear_eq({"U": g, "Y": h}, noise=_noise(variant)),
    }
    return _assemble("d9", nodes, {"z": "Z", "x": "X", "y": "Y"},
                     latents=("W", "U", "V"))


@_register(
    "d10",
    "Candidate NCO may itself affect the IV: the strict NCO assumption fails "
    "through the direct link, the generalized form still qualifies.",
)
def _d10(suspect=True, variant="continuous", s1=0.5, s2=0.5, e=1.0, f=1.0,
         a=1.0, b=1.0, c=1.0, d=1.0, nc_noise=0.5):
    sv1 = s1 if suspect else 0
    sv2 = s2 if suspect else 0
    nodes = {
        "W": _exo(variant),
        "U": _exo(variant),
        "NC": linear_eq({"U": f}, noise=_noise(variant, nc_noise)),
        "Z": linear_eq({"U": sv1, "NC": sv2}, noise=_noise(variant)),
        "X": linear_eq({"Z": a, "W": b}, noise=_noise(variant)),
        "Y": linear_eq({"X": c, "W": d, "U": e}, noise=_noise(variant)),
    }
    suspects = [p for p, v in ((("U", "Z"), sv1), (("NC", "Z"), sv2)) if v != 0]
    return _assemble("d10", nodes, {"z": "Z", "x": "X", "y": "Y"},
                     latents=("W", "U"), candidates=("NC",), suspects=suspects)


# -- functional-form scenarios (linear-vs-smooth separations) --------------


@_register(
    "csrf_interaction",
    "Valid design whose reduced form carries an IV-by-control interaction; "
    "the linear conditional NCI test over-rejects.",
)
def _csrf_interaction(suspect=True, variant="continuous", g=0.3, m=0.3,
                      a=1.0, b=0.5, c=1.0, nc_noise=0.5):
    if variant != "continuous":
        raise ScmError("csrf_interaction has no discrete variant")
    gv = g if suspect else 0
    terms_y = [Linear("X", c), Linear("C", 1.0)]
    if gv != 0:
        terms_y.append(Product("X", "C", gv))
    terms_nc = [Linear("U", 1.0)]
    if m != 0:
        terms_nc.append(Product("U", "C", m))
    nodes = {
        "C": Gaussian(0.0, 1.0),
        "W": Gaussian(0.0, 1.0),
        "U": Gaussian(0.0, 1.0),
        "Z": linear_eq({"U": 1.0}, noise=Gaussian(0.0, 1.0)),
        "X": linear_eq({"Z": a, "W": b}, noise=Gaussian(0.0, 0.5)),
        "Y": Equation(tuple(terms_y), noise=Gaussian(0.0, 0.5)),
        "NC": Equation(tuple(terms_nc), noise=Gaussian(0.0, nc_noise)),
    }
    return _assemble("csrf_interaction", nodes, {"z": "Z", "x": "X", "y": "Y"},
                     latents=("W", "U"), candidates=("NC",), controls=("C",))


@_register(
    "csrf_quadratic",
    "Valid design with a quadratic reduced form in the IV (skewed latent "
    "driver): the linear conditional NCI test over-rejects while a smooth "
    "GAM variant stays sized.",
)
def _csrf_quadratic(suspect=True, variant="continuous", q=0.7, a=1.0, b=0.5,
                    c=1.0, pu=0.3, nc_noise=0.3):
    if variant != "continuous":
        raise ScmError("csrf_quadratic has no discrete variant")
    qv = q if suspect else 0
    terms_y = [Linear("X", c), Linear("C", 1.0)]
    if qv != 0:
        terms_y.append(Square("X", qv))
    nodes = {
        "C": Gaussian(0.0, 1.0),
        "W": Gaussian(0.0, 1.0),
        "U": Bernoulli(pu),
        "Z": linear_eq({"U": 1.0}, noise=Gaussian(0.0, 1.0)),
        "X": linear_eq({"Z": a, "W": b}, noise=Gaussian(0.0, 0.5)),
        "Y": Equation(tuple(terms_y), noise=Gaussian(0.0, 0.5)),
        "NC": linear_eq({"U": 1.0}, noise=Gaussian(0.0, nc_noise)),
    }
    return _assemble("csrf_quadratic", nodes, {"z": "Z", "x": "X", "y": "Y"},
                     latents=("W", "U"), candidates=("NC",), controls=("C",))


@_register(
    "nco_quadratic",
    "Invalid design with a symmetric quadratic NC-IV association: invisible "
    "to the linear NCO test, detected by the smooth one.",
)
def _nco_quadratic(suspect=True, variant="continuous", s=0.5, a=1.0, c=1.0):
    if variant != "continuous":
        raise ScmError("nco_quadratic has no discrete variant")
    sv = s if suspect else 0
    terms_z = [Linear("C", 1.0)]
    if sv != 0:
        terms_z.append(Square("NC", sv))
    nodes = {
        "C": Gaussian(0.0, 1.0),
        "NC": Gaussian(0.0, 1.0),
        "Z": Equation(tuple(terms_z), noise=Gaussian(0.0, 1.0)),
        "X": linear_eq({"Z": a, "C": 1.0}, noise=Gaussian(0.0, 1.0)),
        "Y": linear_eq({"X": c, "C": 1.0}, noise=Gaussian(0.0, 1.0)),
    }
    return _assemble("nco_quadratic", nodes, {"z": "Z", "x": "X", "y": "Y"},
                     candidates=("NC",), controls=("C",),
                     suspects=[("NC", "Z")] if sv != 0 else [])


# -- declarative scenario configs -----------------------------------------

_TERM_KINDS = {
    "linear": (Linear, ("parent", "coef")),
    "xor": (Xor, ("a", "b", "coef")),
    "product": (Product, ("a", "b", "coef")),
    "square": (Square, ("parent", "coef")),
    "threshold": (Threshold, ("parent", "cut", "coef")),
    "switch": (Switch, ("gate", "value", "parent", "coef")),
}

_DIST_KINDS = {
    "bernoulli": (Bernoulli, ("p",)),
    "gaussian": (Gaussian, ("mean", "sd")),
    "uniform": (Uniform, ("low", "high")),
    "discrete": (Discrete, ("values", "probs")),
}


def _dist_from_config(cfg: dict):
    cfg = dict(cfg)
    kind = cfg.pop("dist", None)
    if kind not in _DIST_KINDS:
        raise ScmError(f"unknown distribution {kind!r}")
    cls, allowed = _DIST_KINDS[kind]
    unknown = set(cfg) - set(allowed)
    if unknown:
        raise ScmError(f"invalid {kind} parameter(s): {sorted(unknown)}")
    if kind == "discrete":
        cfg["values"] = tuple(cfg.get("values", ()))
        cfg["probs"] = tuple(cfg.get("probs", ()))
    return cls(**cfg)


def _term_from_config(cfg: dict):
    cfg = dict(cfg)
    kind = cfg.pop("kind", None)
    if kind not in _TERM_KINDS:
        raise ScmError(f"unknown term kind {kind!r}")
    cls, allowed = _TERM_KINDS[kind]
    unknown = set(cfg) - set(allowed)
    if unknown:
        raise ScmError(f"invalid {kind} term field(s): {sorted(unknown)}")
    return cls(**cfg)


def spec_from_config(cfg: dict):
    """Build (Dag, ScmSpec) from a declarative config tree."""
    cfg = dict(cfg)
    name = cfg.get("name", "custom")
    nodes = {}
    for node, defn in dict(cfg.get("nodes", {})).items():
        if "dist" in defn:
            nodes[node] = _dist_from_config(defn)
        else:
            terms = tuple(_term_from_config(t) for t in defn.get("terms", ()))
            noise = defn.get("noise")
            nodes[node] = Equation(
                terms,
                intercept=defn.get("intercept", 0),
                noise=_dist_from_config(noise) if noise else None,
            )
    return _assemble(
        name,
        nodes,
        dict(cfg.get("roles", {})),
        latents=tuple(cfg.get("latents", ())),
        candidates=tuple(cfg.get("candidates", ())),
        controls=tuple(cfg.get("controls", ())),
        suspects=[tuple(s) for s in cfg.get("suspect_edges", ())],
        tags=tuple(cfg.get("tags", ())),
    )


def _without_suspect_terms(cfg: dict) -> dict:
    """Copy of a scenario config with every suspect-edge mechanism removed.

    Dropping the whole term (not just an edge) keeps the graph and the
    model in lockstep, exactly as the built-in builders do when their
    suspect coefficient is zeroed.
    """
    severed = {tuple(s) for s in cfg.get("suspect_edges", ())}
    nodes = {}
    for node, defn in dict(cfg.get("nodes", {})).items():
        if "terms" in defn:
            kept = [
                t
                for t in defn["terms"]
                if not any(
                    (p, node) in severed for p in _term_from_config(t).parents()
                )
            ]
            defn = {**defn, "terms": kept}
        nodes[node] = defn
    return {**cfg, "nodes": nodes, "suspect_edges": ()}


def register_scenario_config(cfg: dict) -> str:
    """Register a user scenario from a config tree; returns its name."""
    name = cfg.get("name")
    if not name:
        raise ScmError("scenario config needs a name")
    if name in _BUILDERS or name in _USER:
        raise ScmError(f"scenario {name!r} already exists")

    def builder(suspect=True, variant="continuous"):
        if variant != "continuous":
            raise ScmError(f"user scenario {name!r} has a single variant")
        return spec_from_config(cfg if suspect else _without_suspect_terms(cfg))

    info = ScenarioInfo(name, cfg.get("description", "user scenario"), (), ())
    _USER[name] = (builder, info)
    return name


def clear_user_scenarios() -> None:
    _USER.clear()
