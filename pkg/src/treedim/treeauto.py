"""Tree automorphisms described by finite-state recursion machines.

A machine names finitely many states. Each state acts on a vertex's m
subtrees by a root permutation and delegates to one named state per
subtree, so a state describes an automorphism of the whole infinite tree.
Group elements are kept as lazy words of (state, exponent) letters:
products and inverses are O(1) word edits, and all real computation
happens in ``evaluate`` (the induced permutation of the m^n level-n
leaves), ``section`` (the restriction to a subtree, pushed through the
word letter by letter), and ``normalize`` (which materializes the finitely
many distinct section words of an element as states of a fresh machine).

The implicit state "1" is the identity automorphism; every machine
resolves it without declaring it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegreeMismatch, ResourceLimit, StateExplosion, ValidationError
from .permgroup import MAX_CHAIN_POINTS, Permutation, build_chain, compose
from .tree import Vertex, parse_vertex

IDENTITY_STATE = "1"
DEFAULT_STATE_BUDGET = 10 ** 5

Letter = tuple[str, int]
Word = tuple[Letter, ...]


@dataclass(frozen=True)
class State:
    """One machine state: a root action on children plus m delegate states."""

    root: Permutation
    sections: tuple[str, ...]


def _as_word(word: Iterable[Letter] | str) -> Word:
    if isinstance(word, str):
        return ((word, 1),)
    out = []
    for name, exp in word:
        if exp not in (1, -1):
            raise ValidationError(f"letter exponent must be +-1, got {exp}")
        out.append((str(name), exp))
    return tuple(out)


def _reduce(word: Iterable[Letter]) -> Word:
    """Drop identity letters and cancel adjacent inverse pairs."""
    out: list[Letter] = []
    for name, exp in word:
        if name == IDENTITY_STATE:
            continue
        if out and out[-1][0] == name and out[-1][1] == -exp:
            out.pop()
        else:
            out.append((name, exp))
    return tuple(out)


def word_text(word: Word) -> str:
    if not word:
        return IDENTITY_STATE
    return "*".join(n if e == 1 else f"{n}^-1" for n, e in word)


class Machine:
    """Validated, immutable container of recursion states over one tree arity.

    ``top_generators`` generate the permitted group of root actions; every
    state's root permutation must sift into it.
    """

    __slots__ = ("m", "top_generators", "states", "_top_chain",
                 "_imgs", "_invs", "_secs", "_key")

    def __init__(self, m: int,
                 top_generators: Sequence[Permutation],
                 states: Mapping[str, State]):
        if m < 2:
            raise ValidationError(f"tree arity must be at least 2, got {m}")
        tops = list(top_generators)
        for g in tops:
            if g.degree != m:
                raise DegreeMismatch(
                    f"top generator degree {g.degree} does not match arity {m}")
        self.m = m
        self.top_generators = tuple(tops)
        self._top_chain = build_chain(m, tops)
        clean: dict[str, State] = {}
        for name, st in states.items():
            if not isinstance(name, str) or not name:
                raise ValidationError(f"state name must be a nonempty string, got {name!r}")
            if name == IDENTITY_STATE:
                if not (st.root.is_identity()
                        and all(s == IDENTITY_STATE for s in st.sections)):
                    raise ValidationError(
                        'state name "1" is reserved for the identity')
                continue
            if st.root.degree != m:
                raise DegreeMismatch(
                    f"state {name!r} root degree {st.root.degree} != arity {m}")
            if len(st.sections) != m:
                raise ValidationError(
                    f"state {name!r} needs {m} sections, got {len(st.sections)}")
            if not self._top_chain.membership(st.root):
                raise ValidationError(
                    f"state {name!r} root {st.root} lies outside the declared top group")
            clean[name] = State(st.root, tuple(st.sections))
        for name, st in clean.items():
            for s in st.sections:
                if s != IDENTITY_STATE and s not in clean:
                    raise ValidationError(
                        f"state {name!r} references undeclared section {s!r}")
        self.states = clean
        self._imgs = {n: st.root.images.tolist() for n, st in clean.items()}
        self._invs = {n: st.root.inverse().images.tolist() for n, st in clean.items()}
        self._secs = {n: st.sections for n, st in clean.items()}
        idt = tuple(range(m))
        self._imgs[IDENTITY_STATE] = list(idt)
        self._invs[IDENTITY_STATE] = list(idt)
        self._secs[IDENTITY_STATE] = (IDENTITY_STATE,) * m
        self._key = None

    def __setattr__(self, name, value):
        if name in self.__slots__ and hasattr(self, "_key") and name != "_key":
            raise AttributeError("Machine is immutable")
        object.__setattr__(self, name, value)

    def state(self, name: str) -> State:
        if name == IDENTITY_STATE:
            return State(Permutation.identity(self.m), (IDENTITY_STATE,) * self.m)
        try:
            return self.states[name]
        except KeyError:
            raise ValidationError(f"unknown state {name!r}") from None

    def state_names(self) -> list[str]:
        return sorted(self.states)

    def element(self, word: Iterable[Letter] | str) -> "Element":
        """Element from a state name or an iterable of (state, +-1) letters."""
        w = _as_word(word)
        for name, _ in w:
            if name != IDENTITY_STATE and name not in self.states:
                raise ValidationError(f"unknown state {name!r}")
        return Element(self, w)

    def identity(self) -> "Element":
        return Element(self, ())

    def structural_key(self) -> tuple:
        if self._key is None:
            tops = tuple(sorted(g.images.tobytes() for g in self.top_generators))
            body = tuple(sorted(
                (n, st.root.images.tobytes(), st.sections)
                for n, st in self.states.items()))
            self._key = (self.m, tops, body)
        return self._key

    def __repr__(self) -> str:
        return f"<Machine arity {self.m}, {len(self.states)} states>"


def merge_machines(a: Machine, b: Machine) -> tuple[Machine, dict[str, str]]:
    """Disjoint union of two machines over the same arity.

    Returns the union and the rename map applied to b's states; colliding
    names from b get a deterministic "#k" suffix. Identical machines merge
    to the first operand with an empty rename map.
    """
    if a.m != b.m:
        raise DegreeMismatch(a.m, b.m, what="machine")
    if a is b or a.structural_key() == b.structural_key():
        return a, {}
    rename: dict[str, str] = {}
    used = set(a.states)
    for name in sorted(b.states):
        new = name
        k = 2
        while new in used:
            new = f"{name}#{k}"
            k += 1
        used.add(new)
        if new != name:
            rename[name] = new
    states = dict(a.states)
    for name, st in b.states.items():
        secs = tuple(rename.get(s, s) for s in st.sections)
        states[rename.get(name, name)] = State(st.root, secs)
    seen = {g.images.tobytes() for g in a.top_generators}
    tops = list(a.top_generators)
    for g in b.top_generators:
        if g.images.tobytes() not in seen:
            seen.add(g.images.tobytes())
            tops.append(g)
    return Machine(a.m, tops, states), rename


class Element:
    """A tree automorphism given as a word over one machine's states."""

    __slots__ = ("machine", "word")

    def __init__(self, machine: Machine, word: Iterable[Letter] | str = ()):
        object.__setattr__(self, "machine", machine)
        object.__setattr__(self, "word", _as_word(word))

    def __setattr__(self, name, value):
        raise AttributeError("Element is immutable")

    def section(self, v: Vertex | str) -> "Element":
        return section(self, v)

    def evaluate(self, n: int, leaf_cap: int = MAX_CHAIN_POINTS) -> Permutation:
        return evaluate(self, n, leaf_cap)

    def inverse(self) -> "Element":
        return inverse(self)

    def __mul__(self, other: "Element") -> "Element":
        return multiply(self, other)

    def __pow__(self, k: int) -> "Element":
        if k == 0:
            return Element(self.machine, ())
        base = self if k > 0 else inverse(self)
        out = base
        for _ in range(abs(k) - 1):
            out = multiply(out, base)
        return out

    def is_identity_word(self) -> bool:
        """True when the reduced word is empty; a formal, not group, test."""
        return not _reduce(self.word)

    def __repr__(self) -> str:
        return f"<element {word_text(self.word)} on the {self.machine.m}-ary tree>"


def multiply(e: Element, f: Element) -> Element:
    """Product acting as e first, then f; machines merge on demand."""
    if e.machine is f.machine:
        return Element(e.machine, _reduce(e.word + f.word))
    mac, rename = merge_machines(e.machine, f.machine)
    fw = tuple((rename.get(n, n), x) for n, x in f.word)
    return Element(mac, _reduce(e.word + fw))


def inverse(e: Element) -> Element:
    return Element(e.machine, _reduce((n, -x) for n, x in reversed(e.word)))


def _section_word(mac: Machine, word: Word, child: int) -> Word:
    """Restrict a word to one subtree, tracking the moving child index."""
    out: list[Letter] = []
    cur = child
    for name, exp in word:
        if exp == 1:
            out.append((mac._secs[name][cur], 1))
            cur = mac._imgs[name][cur]
        else:
            cur = mac._invs[name][cur]
            out.append((mac._secs[name][cur], -1))
    return _reduce(out)


def section(e: Element, v: Vertex | str) -> Element:
    """Restriction of e to the subtree rooted at v, as an element of the
    same machine."""
    mac = e.machine
    if isinstance(v, str):
        v = parse_vertex(v, mac.m)
    if v.m != mac.m:
        raise DegreeMismatch(mac.m, v.m, what="vertex")
    word = _reduce(e.word)
    for letter in v.word:
        word = _section_word(mac, word, letter - 1)
    return Element(mac, word)


def _eval_state(mac: Machine, name: str, n: int, memo: dict) -> np.ndarray:
    if name == IDENTITY_STATE or n == 0:
        return np.arange(mac.m ** n, dtype=np.int64)
    key = (name, n)
    hit = memo.get(key)
    if hit is not None:
        return hit
    m = mac.m
    width = m ** (n - 1)
    out = np.empty(m ** n, dtype=np.int64)
    imgs = mac._imgs[name]
    secs = mac._secs[name]
    for c in range(m):
        sub = _eval_state(mac, secs[c], n - 1, memo)
        out[c * width:(c + 1) * width] = imgs[c] * width + sub
    memo[key] = out
    return out


def evaluate(e: Element, n: int, leaf_cap: int = MAX_CHAIN_POINTS) -> Permutation:
    """Permutation of the m^n level-n leaf indices induced by e."""
    if n < 0:
        raise ValidationError(f"level must be nonnegative, got {n}")
    mac = e.machine
    degree = mac.m ** n
    if degree > leaf_cap:
        raise ResourceLimit(
            f"level {n} needs {degree} leaves, over the cap of {leaf_cap}",
            budget=leaf_cap)
    memo: dict = {}
    acc = np.arange(degree, dtype=np.int64)
    for name, exp in e.word:
        arr = _eval_state(mac, name, n, memo)
        if exp == -1:
            inv = np.empty(degree, dtype=np.int64)
            inv[arr] = np.arange(degree, dtype=np.int64)
            arr = inv
        acc = arr[acc]
    return Permutation(acc)


def normalize(e: Element, state_budget: int = DEFAULT_STATE_BUDGET) -> Element:
    """Rebuild e as a single state of a fresh machine.

    States of the result are the distinct reduced section words of e,
    discovered breadth-first and named by their word text (with a "#k"
    suffix on the rare name collision). Raises StateExplosion when more
    than ``state_budget`` states appear, which signals that e does not
    look finite-state within budget.
    """
    mac = e.machine
    start = _reduce(e.word)
    names: dict[Word, str] = {(): IDENTITY_STATE}
    used = {IDENTITY_STATE}
    order: list[Word] = []
    queue: deque[Word] = deque()

    def claim(word: Word) -> str:
        got = names.get(word)
        if got is not None:
            return got
        if len(order) >= state_budget:
            raise StateExplosion(
                f"element needs more than {state_budget} states",
                budget=state_budget)
        name = word_text(word)
        k = 2
        while name in used:
            name = f"{word_text(word)}#{k}"
            k += 1
        used.add(name)
        names[word] = name
        order.append(word)
        queue.append(word)
        return name

    claim(start)
    states: dict[str, State] = {}
    while queue:
        word = queue.popleft()
        root = Permutation.identity(mac.m)
        for nm, exp in word:
            r = mac.state(nm).root
            root = compose(root, r.inverse() if exp == -1 else r)
        secs = tuple(claim(_section_word(mac, word, c)) for c in range(mac.m))
        states[names[word]] = State(root, secs)
    out = Machine(mac.m, mac.top_generators, states)
    return Element(out, ((names[start], 1),))


@dataclass
class SelfSimilarityReport:
    """Outcome of checking that generator sections stay inside the group.

    A clean pass at finite depth is necessary but not sufficient for the
    generated group to be closed under taking sections; ``note`` records
    this so downstream reports stay honest.
    """

    depth: int
    checked: int
    failures: list[tuple[str, str]] = field(default_factory=list)
    note: str = ("a pass at finite depth is necessary, not sufficient, "
                 "for closure under sections")

    @property
    def passed(self) -> bool:
        return not self.failures


def self_similarity_check(generators: Sequence[Element], n: int,
                          leaf_cap: int = MAX_CHAIN_POINTS) -> SelfSimilarityReport:
    """Test every generator section at vertices of level <= n for membership
    in the level quotient of the generated group."""
    if not generators:
        return SelfSimilarityReport(depth=n, checked=0)
    mac = generators[0].machine
    gens = []
    for g in generators:
        if g.machine is not mac:
            merged, rename = merge_machines(mac, g.machine)
            mac = merged
            gens = [Element(mac, h.word) for h in gens]
            g = Element(mac, tuple((rename.get(nm, nm), x) for nm, x in g.word))
        gens.append(g)
    chains = {
        k: build_chain(mac.m ** k, [evaluate(g, k, leaf_cap) for g in gens])
        for k in range(1, n + 1)
    }
    report = SelfSimilarityReport(depth=n, checked=0)

    def walk(g: Element, label: str, v: Vertex, sec: Element) -> None:
        remaining = n - v.level
        if remaining > 0:
            perm = evaluate(sec, remaining, leaf_cap)
            if not chains[remaining].membership(perm):
                report.failures.append((label, str(v)))
        report.checked += 1
        if v.level == n:
            return
        for letter in range(1, mac.m + 1):
            word = _section_word(mac, sec.word, letter - 1)
            walk(g, label, v.child(letter), Element(mac, word))

    for g in gens:
        walk(g, word_text(g.word), Vertex(mac.m), g)
    return report
