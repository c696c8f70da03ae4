"""Causal DAGs with suspect edges, graph surgery, and d-separation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

ROLES = ("iv", "treatment", "outcome", "control", "latent", "candidate", "other")
_SINGLETON_ROLES = ("iv", "treatment", "outcome")

MAX_SUSPECT_EDGES = 12


class GraphError(ValueError):
    """Malformed graph, graph text, or graph query."""


@dataclass(frozen=True)
class Edge:
    tail: str
    head: str
    suspect: bool = False

    def __str__(self) -> str:
        mark = " suspect" if self.suspect else ""
        return f"{self.tail} -> {self.head}{mark}"


def _as_name_set(x) -> frozenset:
    if x is None:
        return frozenset()
    if isinstance(x, str):
        return frozenset((x,))
    return frozenset(x)


class Dag:
    """Immutable directed acyclic graph with role-tagged nodes.

    ``nodes`` maps name -> role; ``edges`` is an ordered tuple of Edge.
    Suspect edges encode hypothesized threat links (dashed arrows); they are
    ordinary edges for d-separation, and qualification checks enumerate
    their presence/absence.
    """

    def __init__(self, nodes, edges=()):
        if isinstance(nodes, dict):
            items = list(nodes.items())
        else:
            items = [(n, "other") if isinstance(n, str) else tuple(n) for n in nodes]
        names = [n for n, _ in items]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise GraphError(f"duplicate node name(s): {', '.join(dupes)}")
        for name, role in items:
            if role not in ROLES:
                raise GraphError(f"unknown role {role!r} for node {name!r}")
            if not name or any(ch.isspace() for ch in name):
                raise GraphError(f"invalid node name {name!r}")
        self._roles = dict(items)
        for role in _SINGLETON_ROLES:
            tagged = [n for n, r in items if r == role]
            if len(tagged) > 1:
                raise GraphError(f"more than one node tagged {role}: {', '.join(tagged)}")

        norm = []
        seen = set()
        for e in edges:
            e = e if isinstance(e, Edge) else Edge(*e)
            if e.tail not in self._roles or e.head not in self._roles:
                missing = e.tail if e.tail not in self._roles else e.head
                raise GraphError(f"dangling edge endpoint {missing!r} in {e.tail} -> {e.head}")
            if e.tail == e.head:
                raise GraphError(f"self-loop on {e.tail!r}")
            if (e.tail, e.head) in seen:
                raise GraphError(f"duplicate edge {e.tail} -> {e.head}")
            seen.add((e.tail, e.head))
            norm.append(e)
        self._edges = tuple(norm)

        self._parents = {n: [] for n in self._roles}
        self._children = {n: [] for n in self._roles}
        for e in self._edges:
            self._parents[e.head].append(e.tail)
            self._children[e.tail].append(e.head)

        self._topo_check()

    def _topo_check(self) -> None:
        indeg = {n: len(ps) for n, ps in self._parents.items()}
        queue = [n for n, d in indeg.items() if d == 0]
        visited = 0
        while queue:
            n = queue.pop()
            visited += 1
            for c in self._children[n]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        if visited != len(self._roles):
            cyclic = sorted(n for n, d in indeg.items() if d > 0)
            raise GraphError(f"cycle detected among: {', '.join(cyclic)}")

    # -- accessors ---------------------------------------------------------

    @property
    def nodes(self) -> tuple[str, ...]:
        return tuple(self._roles)

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self._edges

    @property
    def suspect_edges(self) -> tuple[Edge, ...]:
        return tuple(e for e in self._edges if e.suspect)

    def role(self, name: str) -> str:
        self._require(name)
        return self._roles[name]

    def roles(self) -> dict[str, str]:
        return dict(self._roles)

    def with_role(self, role: str) -> tuple[str, ...]:
        return tuple(n for n, r in self._roles.items() if r == role)

    def _unique_role(self, role: str) -> str | None:
        tagged = self.with_role(role)
        return tagged[0] if tagged else None

    @property
    def iv(self) -> str | None:
        return self._unique_role("iv")

    @property
    def treatment(self) -> str | None:
        return self._unique_role("treatment")

    @property
    def outcome(self) -> str | None:
        return self._unique_role("outcome")

    @property
    def controls(self) -> tuple[str, ...]:
        return self.with_role("control")

    def parents(self, name: str) -> tuple[str, ...]:
        self._require(name)
        return tuple(self._parents[name])

    def children(self, name: str) -> tuple[str, ...]:
        self._require(name)
        return tuple(self._children[name])

    def descendants(self, name: str) -> frozenset:
        """Strict descendants of ``name`` (not including the node itself)."""
        self._require(name)
        out, stack = set(), list(self._children[name])
        while stack:
            n = stack.pop()
            if n not in out:
                out.add(n)
                stack.extend(self._children[n])
        return frozenset(out)

    def _require(self, name: str) -> None:
        if name not in self._roles:
            raise GraphError(f"unknown node {name!r}")

    def __contains__(self, name: str) -> bool:
        return name in self._roles

    def __repr__(self) -> str:
        return f"Dag({len(self._roles)} nodes, {len(self._edges)} edges)"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Dag)
            and self._roles == other._roles
            and self._edges == other._edges
        )

    def __hash__(self) -> int:
        return hash((tuple(self._roles.items()), self._edges))

    # -- surgery -----------------------------------------------------------

    def without_edges(self, drop: Iterable[Edge]) -> "Dag":
        dropset = {(e.tail, e.head) for e in drop}
        kept = [e for e in self._edges if (e.tail, e.head) not in dropset]
        return Dag(self._roles, kept)

    def resolve_suspects(self, present: Iterable[Edge]) -> "Dag":
        """Keep all solid edges plus the given subset of suspect edges."""
        keep = {(e.tail, e.head) for e in present}
        kept = [e for e in self._edges if not e.suspect or (e.tail, e.head) in keep]
        return Dag(self._roles, kept)

    def suspect_subsets(self) -> Iterator[tuple[Edge, ...]]:
        """All subsets of suspect edges, from empty to full, in stable order."""
        sus = self.suspect_edges
        if len(sus) > MAX_SUSPECT_EDGES:
            raise GraphError(
                f"{len(sus)} suspect edges exceeds the enumeration cap of {MAX_SUSPECT_EDGES}"
            )
        for mask in range(1 << len(sus)):
            yield tuple(e for i, e in enumerate(sus) if mask >> i & 1)


def remove_incoming(g: Dag, node) -> Dag:
    """The graph with all arrows entering ``node`` (or each of a set) removed."""
    targets = _as_name_set(node)
    for t in targets:
        g._require(t)
    kept = [e for e in g.edges if e.head not in targets]
    return Dag(g.roles(), kept)


# -- d-separation ----------------------------------------------------------


def _check_query(g: Dag, a, b, cond):
    a, b, cond = _as_name_set(a), _as_name_set(b), _as_name_set(cond)
    for n in a | b | cond:
        g._require(n)
    if not a or not b:
        raise GraphError("a and b must be nonempty")
    if a & b or a & cond or b & cond:
        overlap = sorted((a & b) | (a & cond) | (b & cond))
        raise GraphError(f"node sets overlap: {', '.join(overlap)}")
    return a, b, cond


def d_separated(g: Dag, a, b, cond=()) -> bool:
    """True iff every trail between ``a`` and ``b`` is blocked by ``cond``.

    Chains and forks are blocked when their middle node is conditioned on;
    colliders are blocked unless the collider or one of its descendants is
    conditioned on.  Uses the linear-time reachable-by-active-trail search;
    the exhaustive trail enumeration lives in the test suite as an oracle.
    """
    a, b, cond = _check_query(g, a, b, cond)

    # Nodes having a conditioned descendant (or being conditioned themselves):
    # exactly the nodes at which a collider is passable.
    collider_open = set(cond)
    stack = list(cond)
    while stack:
        n = stack.pop()
        for p in g._parents[n]:
            if p not in collider_open:
                collider_open.add(p)
                stack.append(p)

    # Ball-passing search over (node, arrived-via-edge-into-node?) states.
    # Direction False ("from below"/tail side) behaves like leaving a source.
    start = [(n, False) for n in a]
    seen = set(start)
    stack = list(start)
    while stack:
        n, via_incoming = stack.pop()
        if n in b:
            return False
        moves = []
        if via_incoming:
            # arrived through an edge pointing into n
            if n not in cond:
                moves += [(c, True) for c in g._children[n]]  # chain
            if n in collider_open:
                moves += [(p, False) for p in g._parents[n]]  # collider
        else:
            # arrived through an edge pointing out of n (or n is a source)
            if n not in cond:
                moves += [(c, True) for c in g._children[n]]  # fork/source
                moves += [(p, False) for p in g._parents[n]]  # chain reversed
        for mv in moves:
            if mv not in seen:
                seen.add(mv)
                stack.append(mv)
    return True


def find_open_trail(g: Dag, a, b, cond=()) -> tuple[str, ...] | None:
    """One active trail between ``a`` and ``b`` given ``cond``, or None.

    Used to attach a human-readable witness to failed separation claims;
    d_separated itself never enumerates trails.
    """
    a, b, cond = _check_query(g, a, b, cond)

    def passable(mid: str, entered_in: bool, leaving_in: bool) -> bool:
        if entered_in and leaving_in:  # -> mid <- : collider
            return mid in cond or bool(g.descendants(mid) & cond)
        return mid not in cond

    for s in sorted(a):
        # stack entries: (path, arrived-via-edge-into-last?)
        stack: list[tuple[tuple[str, ...], bool]] = [((s,), False)]
        while stack:
            path, entered_in = stack.pop()
            last = path[-1]
            steps = [(c, True) for c in g._children[last]]
            steps += [(p, False) for p in g._parents[last]]
            for nxt, step_in in sorted(steps, reverse=True):
                if nxt in path:
                    continue
                if len(path) > 1 and not passable(last, entered_in, not step_in):
                    continue
                if nxt in b:
                    return path + (nxt,)
                stack.append((path + (nxt,), step_in))
    return None


# -- graph DSL -------------------------------------------------------------


def parse_graph(text: str) -> Dag:
    """Parse the line-based graph DSL.

    ``node <name> [role=<role>]`` declares a node; ``edge <a> -> <b> [suspect]``
    declares an edge (endpoints are auto-declared with role ``other`` if not
    yet seen); ``#`` starts a comment.
    """
    nodes: dict[str, str] = {}
    edges: list[Edge] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        if kind == "node":
            if len(parts) < 2 or len(parts) > 3:
                raise GraphError(f"line {lineno}: malformed node line {raw!r}")
            name, role = parts[1], "other"
            if len(parts) == 3:
                if not parts[2].startswith("role="):
                    raise GraphError(f"line {lineno}: expected role=<role>, got {parts[2]!r}")
                role = parts[2][len("role="):]
                if role not in ROLES:
                    raise GraphError(f"line {lineno}: unknown role {role!r}")
            if name in nodes:
                raise GraphError(f"line {lineno}: duplicate node {name!r}")
            nodes[name] = role
        elif kind == "edge":
            ok = len(parts) in (4, 5) and parts[2] == "->"
            if ok and len(parts) == 5 and parts[4] != "suspect":
                ok = False
            if not ok:
                raise GraphError(f"line {lineno}: malformed edge line {raw!r}")
            tail, head = parts[1], parts[3]
            nodes.setdefault(tail, "other")
            nodes.setdefault(head, "other")
            edges.append(Edge(tail, head, suspect=len(parts) == 5))
        else:
            raise GraphError(f"line {lineno}: unknown directive {kind!r}")
    return Dag(nodes, edges)
