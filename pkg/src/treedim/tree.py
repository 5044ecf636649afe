"""Vertices of the m-regular rooted tree and their leaf-block arithmetic.

A vertex is a word over the alphabet {1..m}; the root is the empty word.  The
children of a vertex are ordered by letter, and the m^n vertices at depth n are
ordered lexicographically.  That order is what numbers the leaves 0..m^n-1 when
a depth-n quotient acts as a permutation group: the leaf x1...xn gets index
sum (xi - 1) * m^(n-i), most significant letter first.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import LevelMismatch, ResourceLimit, ValidationError

# Ceiling on how many vertices a single enumeration may produce.
DEFAULT_VERTEX_CAP = 2**20


@dataclass(frozen=True)
class Vertex:
    """A vertex of the m-regular rooted tree, stored as its letter word."""

    m: int
    word: tuple[int, ...] = ()

    def __post_init__(self):
        if self.m < 2:
            raise ValidationError(f"tree arity must be at least 2, got {self.m}")
        for letter in self.word:
            if not 1 <= letter <= self.m:
                raise ValidationError(
                    f"letter {letter} outside alphabet 1..{self.m}"
                )

    @property
    def level(self) -> int:
        return len(self.word)

    def child(self, letter: int) -> "Vertex":
        if not 1 <= letter <= self.m:
            raise ValidationError(f"letter {letter} outside alphabet 1..{self.m}")
        return Vertex(self.m, self.word + (letter,))

    def parent(self) -> "Vertex":
        if not self.word:
            raise LevelMismatch("the root has no parent")
        return Vertex(self.m, self.word[:-1])

    def concat(self, other: "Vertex") -> "Vertex":
        if other.m != self.m:
            raise ValidationError("cannot concatenate vertices of different arity")
        return Vertex(self.m, self.word + other.word)

    def __str__(self) -> str:
        if not self.word:
            return "()"
        if self.m <= 9:
            return "".join(str(x) for x in self.word)
        return ".".join(str(x) for x in self.word)


def parse_vertex(text: str, m: int) -> Vertex:
    """Parse a vertex string: "()" for the root, digits for m <= 9, else
    dot-separated letters ("3.11.2")."""
    text = text.strip()
    if text in ("", "()"):
        return Vertex(m)
    try:
        if "." in text:
            letters = tuple(int(part) for part in text.split("."))
        else:
            letters = tuple(int(ch) for ch in text)
    except ValueError:
        raise ValidationError(f"cannot parse vertex {text!r}") from None
    return Vertex(m, letters)


def vertex_index(v: Vertex) -> int:
    """Position of v among the depth-l(v) vertices in lexicographic order."""
    index = 0
    for letter in v.word:
        index = index * v.m + (letter - 1)
    return index


def vertex_at(m: int, level: int, index: int) -> Vertex:
    """Inverse of vertex_index at a given level."""
    if not 0 <= index < m**level:
        raise LevelMismatch(f"index {index} out of range at level {level}")
    letters = []
    for _ in range(level):
        letters.append(index % m + 1)
        index //= m
    return Vertex(m, tuple(reversed(letters)))


def leaf_block(v: Vertex, n: int) -> range:
    """Indices of the depth-n leaves below v, as a contiguous range.

    The block of v = x1...xl is [index(v) * m^(n-l), (index(v)+1) * m^(n-l)).
    """
    if v.level > n:
        raise LevelMismatch(
            f"vertex at level {v.level} has no descendants at level {n}"
        )
    width = v.m ** (n - v.level)
    start = vertex_index(v) * width
    return range(start, start + width)


def level_vertices(m: int, n: int, cap: int = DEFAULT_VERTEX_CAP) -> list[Vertex]:
    """All depth-n vertices in lexicographic (= index) order."""
    count = m**n
    if count > cap:
        raise ResourceLimit(
            f"level {n} of the {m}-regular tree has {count} vertices, cap is {cap}",
            budget=cap,
        )
    return [vertex_at(m, n, i) for i in range(count)]
