"""Builders for the bundled families of tree groups.

Four constructions cover the corpus: rooted copies of a finite permutation
group acting only at the root, diagonal embeddings that repeat one element
in every subtree, the two combined (a rooted top group over diagonals of
another group's generators), and level quotients of the full recursive
wreath group over a top group. A GroupSpec packages one group: its
machine-backed generators when they are the same at every level, or a
recipe that produces the right generator list per level when they are not.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import NotTransitive, ResourceLimit, ValidationError
from .permgroup import MAX_CHAIN_POINTS, Permutation, build_chain, orbits
from .tree import level_vertices
from .treeauto import (
    IDENTITY_STATE,
    Element,
    Machine,
    State,
    merge_machines,
    normalize,
)

CONSTRUCTION_KINDS = ("plain", "rooted", "diagonal", "GK", "wreath_full")


@dataclass(frozen=True, eq=False)
class Construction:
    """Tag and parameters describing how a GroupSpec's generators arise."""

    kind: str
    h_generators: tuple[Permutation, ...] = ()
    inner: "GroupSpec | None" = None

    def __post_init__(self):
        if self.kind not in CONSTRUCTION_KINDS:
            raise ValidationError(
                f"unknown construction {self.kind!r}; expected one of "
                f"{CONSTRUCTION_KINDS}")


@dataclass(frozen=True, eq=False)
class GroupSpec:
    """A named group of tree automorphisms plus the recipe that built it."""

    name: str
    m: int
    top_generators: tuple[Permutation, ...]
    machine: Machine | None
    generators: tuple[Element, ...]
    construction: Construction

    def __post_init__(self):
        for g in self.top_generators:
            if g.degree != self.m:
                raise ValidationError(
                    f"top generator degree {g.degree} != m = {self.m}")
        for e in self.generators:
            if self.machine is None or e.machine is not self.machine:
                raise ValidationError(
                    "spec generators must all live on the spec machine")
        if self.construction.kind == "rooted":
            for e in self.generators:
                for name, _ in e.word:
                    st = self.machine.state(name)
                    if any(s != IDENTITY_STATE for s in st.sections):
                        raise ValidationError(
                            f"rooted generator state {name!r} has non-identity sections")
        if self.construction.kind == "GK":
            _require_transitive(self.construction.h_generators, self.m)

    @property
    def level_dependent(self) -> bool:
        c = self.construction
        if c.kind == "wreath_full":
            return True
        if c.kind in ("GK", "diagonal") and c.inner is not None:
            return c.inner.level_dependent
        return False

    def generators_for_level(self, n: int) -> list[Element]:
        """Generators whose level-n images generate this group's quotient."""
        if n < 0:
            raise ValidationError(f"level must be nonnegative, got {n}")
        if not self.level_dependent:
            return list(self.generators)
        c = self.construction
        if c.kind == "wreath_full":
            return wreath_full_generators(c.h_generators, n)
        if c.kind == "diagonal":
            inner = c.inner.generators_for_level(n - 1) if n >= 1 else []
            return [diagonal(k) for k in inner]
        # GK over a level-dependent K
        inner = c.inner.generators_for_level(n - 1) if n >= 1 else []
        return rooted_generators(c.h_generators) + [diagonal(k) for k in inner]

    def content_key(self) -> str:
        """Hex digest of the spec's content, ignoring its display name;
        used as the cache key."""
        return hashlib.sha256(repr(self._content()).encode()).hexdigest()

    def _content(self) -> tuple:
        mac = self.machine
        return (
            self.m,
            self.construction.kind,
            tuple(sorted(g.images.tobytes() for g in self.top_generators)),
            mac.structural_key() if mac is not None else None,
            tuple(e.word for e in self.generators),
            tuple(sorted(g.images.tobytes()
                         for g in self.construction.h_generators)),
            self.construction.inner._content()
            if self.construction.inner is not None else None,
        )

    def __repr__(self) -> str:
        return (f"<GroupSpec {self.name!r}: m={self.m}, "
                f"{self.construction.kind}, {len(self.generators)} generators>")


def _require_transitive(h_generators: Sequence[Permutation], m: int) -> None:
    parts = orbits(m, list(h_generators))
    if len(parts) != 1:
        raise NotTransitive(
            f"top group has {len(parts)} orbits on {m} points; need 1")


def combine_elements(elements: Iterable[Element]) -> tuple[Machine | None, tuple[Element, ...]]:
    """Rebase elements from assorted machines onto one merged machine."""
    items = list(elements)
    if not items:
        return None, ()
    mac = items[0].machine
    out = [items[0]]
    for e in items[1:]:
        merged, rename = merge_machines(mac, e.machine)
        if merged is not mac:
            out = [Element(merged, x.word) for x in out]
            mac = merged
        out.append(Element(mac, tuple((rename.get(nm, nm), ex)
                                      for nm, ex in e.word)))
    return mac, tuple(out)


def rooted_generators(h_generators: Sequence[Permutation]) -> list[Element]:
    """One element per generator, acting at the root and nowhere else."""
    tops = [g for g in h_generators if not g.is_identity()]
    if not tops:
        return []
    m = tops[0].degree
    states = {f"h{i + 1}": State(g, (IDENTITY_STATE,) * m)
              for i, g in enumerate(tops)}
    mac = Machine(m, tops, states)
    return [mac.element(name) for name in (f"h{i + 1}" for i in range(len(tops)))]


def diagonal(k: Element) -> Element:
    """Element acting as k inside every level-1 subtree, trivial at the root."""
    nk = normalize(k)
    mac = nk.machine
    (name, _),  = nk.word
    if name == IDENTITY_STATE:
        return mac.identity()
    dname = f"d({name})"
    suffix = 2
    while dname in mac.states:
        dname = f"d({name})#{suffix}"
        suffix += 1
    states = dict(mac.states)
    states[dname] = State(Permutation.identity(mac.m), (name,) * mac.m)
    return Element(Machine(mac.m, mac.top_generators, states), ((dname, 1),))


def build_GK(h_generators: Sequence[Permutation], k_spec: GroupSpec,
             name: str | None = None) -> GroupSpec:
    """Group generated by a rooted transitive top group and the diagonals
    of another group's generators."""
    if not h_generators:
        raise NotTransitive("empty top group cannot act transitively")
    m = h_generators[0].degree
    if m != k_spec.m:
        raise ValidationError(
            f"top group degree {m} != inner spec arity {k_spec.m}")
    _require_transitive(h_generators, m)
    label = name if name is not None else f"gk-{k_spec.name}"
    cons = Construction("GK", h_generators=tuple(h_generators), inner=k_spec)
    tops = list(h_generators) + list(k_spec.top_generators)
    if k_spec.level_dependent:
        return GroupSpec(label, m, tuple(_dedupe_perms(tops)), None, (), cons)
    gens = rooted_generators(h_generators) + [diagonal(k) for k in k_spec.generators]
    mac, combined = combine_elements(gens)
    return GroupSpec(label, m, mac.top_generators, mac, combined, cons)


def diagonal_spec(k_spec: GroupSpec, name: str | None = None) -> GroupSpec:
    """Spec for the group of diagonals of another group's generators."""
    label = name if name is not None else f"diag-{k_spec.name}"
    cons = Construction("diagonal", inner=k_spec)
    if k_spec.level_dependent:
        return GroupSpec(label, k_spec.m, k_spec.top_generators, None, (), cons)
    gens = [diagonal(k) for k in k_spec.generators]
    mac, combined = combine_elements(gens)
    tops = (mac.top_generators if mac is not None
            else tuple(_dedupe_perms(k_spec.top_generators)))
    return GroupSpec(label, k_spec.m, tops, mac, combined, cons)


def wreath_full_generators(h_generators: Sequence[Permutation],
                           n: int) -> list[Element]:
    """Generators of the level-n quotient of the full recursive wreath group:
    a copy of each top generator at every vertex above level n."""
    tops = [g for g in h_generators if not g.is_identity()]
    if not tops:
        return []
    m = tops[0].degree
    if m ** max(n, 0) > MAX_CHAIN_POINTS:
        raise ResourceLimit(
            f"level {n} needs {m ** n} leaves, over the cap of {MAX_CHAIN_POINTS}",
            budget=MAX_CHAIN_POINTS)
    if n <= 0:
        return []
    idt = (IDENTITY_STATE,) * m
    states: dict[str, State] = {}
    order: list[str] = []
    for level in range(n):
        for v in level_vertices(m, level):
            tail = "".join(str(x) for x in v.word)
            for i, g in enumerate(tops):
                base = f"h{i + 1}"
                nm = base if not tail else f"{base}@{tail}"
                if level == 0:
                    states[nm] = State(g, idt)
                else:
                    first = v.word[0]
                    rest = tail[1:]
                    child = base if not rest else f"{base}@{rest}"
                    secs = [IDENTITY_STATE] * m
                    secs[first - 1] = child
                    states[nm] = State(Permutation.identity(m), tuple(secs))
                order.append(nm)
    mac = Machine(m, tops, states)
    return [mac.element(nm) for nm in order]


def _dedupe_perms(perms: Iterable[Permutation]) -> list[Permutation]:
    seen = set()
    out = []
    for g in perms:
        key = g.images.tobytes()
        if key not in seen:
            seen.add(key)
            out.append(g)
    return out


def _plain(name: str, mac: Machine, gen_names: Sequence[str]) -> GroupSpec:
    gens = tuple(mac.element(nm) for nm in gen_names)
    return GroupSpec(name, mac.m, mac.top_generators, mac, gens,
                     Construction("plain"))


def _rooted_spec(name: str, h_generators: Sequence[Permutation]) -> GroupSpec:
    gens = rooted_generators(h_generators)
    mac, combined = combine_elements(gens)
    m = h_generators[0].degree
    tops = tuple(_dedupe_perms(h_generators))
    return GroupSpec(name, m, tops, mac, combined,
                     Construction("rooted", h_generators=tuple(h_generators)))


def _wreath_spec(name: str, h_generators: Sequence[Permutation]) -> GroupSpec:
    m = h_generators[0].degree
    return GroupSpec(name, m, tuple(_dedupe_perms(h_generators)), None, (),
                     Construction("wreath_full",
                                  h_generators=tuple(h_generators)))


def fixtures() -> dict[str, GroupSpec]:
    """Bundled corpus of group specs, keyed by name."""
    s2 = Permutation.from_cycles("(1 2)", 2)
    c3 = Permutation.from_cycles("(1 2 3)", 3)
    t3 = Permutation.from_cycles("(1 2)", 3)

    odometer = _plain("odometer",
                      Machine(2, [s2], {"a": State(s2, ("1", "a"))}), ["a"])
    odometer3 = _plain("odometer3",
                       Machine(3, [c3], {"a": State(c3, ("1", "1", "a"))}),
                       ["a"])
    idt2 = Permutation.identity(2)
    grigorchuk = _plain("grigorchuk", Machine(2, [s2], {
        "a": State(s2, ("1", "1")),
        "b": State(idt2, ("a", "c")),
        "c": State(idt2, ("a", "d")),
        "d": State(idt2, ("1", "b")),
    }), ["a", "b", "c", "d"])

    trivial = GroupSpec("trivial", 2, (), None, (), Construction("plain"))
    cyclic = _rooted_spec("cyclic", [s2])
    intransitive = _rooted_spec("intransitive", [t3])

    w2 = _wreath_spec("w2", [s2])
    w3c = _wreath_spec("w3c", [c3])
    w3s = _wreath_spec("w3s", [t3, c3])

    out = [
        trivial, cyclic, intransitive,
        odometer, odometer3, grigorchuk,
        w2, w3c, w3s,
        build_GK([s2], trivial, name="gk-trivial"),
        build_GK([s2], odometer),
        build_GK([c3], odometer3),
        build_GK([s2], grigorchuk),
        build_GK([s2], w2),
        build_GK([c3], w3c),
        build_GK([t3, c3], w3s),
    ]
    return {spec.name: spec for spec in out}
