"""Causal DAGs with latent nodes, d-separation, and the back-door criterion."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable


class BackdoorViolation(ValueError):
    """Raised when an adjustment set fails the back-door criterion."""


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph; latent nodes are unobserved and may not be adjusted for."""

    nodes: frozenset[str]
    edges: frozenset[tuple[str, str]]
    latent: frozenset[str] = field(default=frozenset())
    treatment: str | None = None
    outcome: str | None = None

    def __post_init__(self):
        nodes = frozenset(self.nodes) | {a for e in self.edges for a in e} | frozenset(self.latent)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", frozenset(self.edges))
        object.__setattr__(self, "latent", frozenset(self.latent))
        for name in (self.treatment, self.outcome):
            if name is not None and name not in nodes:
                raise ValueError(f"unknown node {name!r}")
        if self.treatment is not None and self.treatment == self.outcome:
            raise ValueError("treatment and outcome must differ")
        if any(a == b for a, b in self.edges):
            raise ValueError("self-loops are not allowed")
        if self._has_cycle():
            raise ValueError("graph contains a cycle")

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[str, str]], latent=(), treatment=None, outcome=None, nodes=()):
        return cls(frozenset(nodes), frozenset(edges), frozenset(latent), treatment, outcome)

    @property
    def observed(self) -> frozenset[str]:
        return self.nodes - self.latent

    def children(self, v: str) -> set[str]:
        return {b for a, b in self.edges if a == v}

    def parents(self, v: str) -> set[str]:
        return {a for a, b in self.edges if b == v}

    def descendants(self, v: str) -> set[str]:
        seen: set[str] = set()
        todo = [v]
        while todo:
            for c in self.children(todo.pop()):
                if c not in seen:
                    seen.add(c)
                    todo.append(c)
        return seen

    def ancestors(self, vs: Iterable[str]) -> set[str]:
        """``vs`` together with all their ancestors."""
        seen = set(vs)
        todo = list(seen)
        while todo:
            for p in self.parents(todo.pop()):
                if p not in seen:
                    seen.add(p)
                    todo.append(p)
        return seen

    def without_outgoing(self, v: str) -> "Dag":
        return Dag(self.nodes, frozenset(e for e in self.edges if e[0] != v), self.latent, self.treatment, self.outcome)

    def _has_cycle(self) -> bool:
        indeg = {v: 0 for v in self.nodes}
        for _, b in self.edges:
            indeg[b] += 1
        queue = deque(v for v, k in indeg.items() if k == 0)
        seen = 0
        while queue:
            v = queue.popleft()
            seen += 1
            for c in self.children(v):
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        return seen != len(self.nodes)


def parse_dag(text: str) -> Dag:
    """Parse ``A -> B`` edges plus ``latent L``, ``treatment X`` and ``outcome Y`` lines.

    Blank lines and ``#`` comments are ignored.
    """
    edges, latent, nodes = set(), set(), set()
    treatment = outcome = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" in line:
            a, b = (s.strip() for s in line.split("->", 1))
            if not a or not b or "->" in b:
                raise ValueError(f"line {lineno}: malformed edge {raw!r}")
            edges.add((a, b))
            continue
        key, _, rest = line.partition(" ")
        rest = rest.strip()
        if not rest:
            raise ValueError(f"line {lineno}: missing node name in {raw!r}")
        if key == "latent":
            latent.add(rest)
        elif key == "treatment":
            treatment = rest
        elif key == "outcome":
            outcome = rest
        elif key == "node":
            nodes.add(rest)
        else:
            raise ValueError(f"line {lineno}: unrecognized statement {raw!r}")
    return Dag(frozenset(nodes), frozenset(edges), frozenset(latent), treatment, outcome)


def load_dag(path) -> Dag:
    return parse_dag(Path(path).read_text())


def d_separated(g: Dag, x: str, y: str, z: Iterable[str]) -> bool:
    """True when every path between ``x`` and ``y`` is blocked by ``z``.

    Reachability search over (node, direction) states: a chain or fork node
    passes only when unobserved, a collider passes only when it or one of its
    descendants is in ``z``.
    """
    z = set(z)
    if x in z or y in z:
        return True
    anc_z = g.ancestors(z)
    # state (v, up): up means v was entered from one of its children
    visited: set[tuple[str, bool]] = set()
    todo = [(x, True)]
    while todo:
        v, up = todo.pop()
        if (v, up) in visited:
            continue
        visited.add((v, up))
        if v == y:
            return False
        if up:
            # arrived from a child (or start): v is not a collider on this path
            if v not in z:
                todo.extend((p, True) for p in g.parents(v))
                todo.extend((c, False) for c in g.children(v))
        else:
            # arrived from a parent
            if v not in z:
                todo.extend((c, False) for c in g.children(v))
            if v in anc_z:
                todo.extend((p, True) for p in g.parents(v))
    return True


def backdoor_violation(g: Dag, z: Iterable[str], treatment: str | None = None, outcome: str | None = None) -> str | None:
    """Reason ``z`` fails the back-door criterion, or ``None`` when it satisfies it."""
    x = treatment or g.treatment
    y = outcome or g.outcome
    if x is None or y is None:
        raise ValueError("treatment and outcome must be designated")
    z = set(z)
    unknown = z - g.nodes
    if unknown:
        raise ValueError(f"unknown nodes in adjustment set: {sorted(unknown)}")
    hidden = z & g.latent
    if hidden:
        raise ValueError(f"latent nodes cannot be adjusted for: {sorted(hidden)}")
    desc = z & g.descendants(x)
    if desc:
        return f"adjustment set contains descendants of {x}: {sorted(desc)}"
    if not d_separated(g.without_outgoing(x), x, y, z):
        return f"adjustment set leaves a back-door path from {x} to {y} open"
    return None


def is_backdoor_set(g: Dag, z: Iterable[str], treatment: str | None = None, outcome: str | None = None) -> bool:
    return backdoor_violation(g, z, treatment, outcome) is None
