"""Exact permutation-group computations on explicit points.

Permutations are stored as numpy image arrays (point i maps to images[i]) and
composed left to right: compose(p, q) applies p first.  Groups are handled
through deterministic stabilizer chains: same input, same chain, bit for bit.
No randomized completion is used, so orders are exact integers and every
membership answer is a proof (the sift either reaches the identity or exhibits
a residue outside the chain).

The chain builder has one structural trick.  When the degree is m^n and every
generator preserves the nested blocks of size m, m^2, ..., the group acts on
the vertices of the m-regular tree of depth n.  The chain then uses the tree
vertices, parents before children, as its base.  Once a parent is stabilized
the orbit of a child has size at most m, which keeps transversals small even
for groups of order far beyond 2^1000.  For arbitrary generators the base is
just the moved points in increasing order; both cases run through the same
code because a flat domain is the depth-1 tower.
"""

from __future__ import annotations

import itertools
import math
import re
from bisect import bisect_left, insort

import numpy as np

from .errors import DegreeMismatch, NotSubgroup, ResourceLimit

_DTYPE = np.int32

# Ceiling on chain degree; quotients beyond this are refused upstream.
MAX_CHAIN_POINTS = 2**14

# Safety valve for pathological chain constructions.
DEFAULT_PAIR_BUDGET = 10**8

# Node budget for centralizer propagation and pointwise stabilizer rebuilds.
DEFAULT_NODE_BUDGET = 10**7

_CYCLE_RE = re.compile(r"\(([^()]*)\)")


class Permutation:
    """An element of Sym({0..degree-1}) as an immutable image array."""

    __slots__ = ("images", "_hash")

    def __init__(self, images):
        arr = np.asarray(images, dtype=_DTYPE)
        if arr.ndim != 1:
            raise ValueError("permutation images must be a flat sequence")
        n = arr.shape[0]
        if n and (arr.min() < 0 or arr.max() >= n or
                  np.bincount(arr, minlength=n).max() > 1):
            raise ValueError("images are not a bijection of 0..degree-1")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "images", arr)
        object.__setattr__(self, "_hash", hash(arr.tobytes()))

    def __setattr__(self, name, value):
        raise AttributeError("Permutation is immutable")

    @classmethod
    def identity(cls, degree: int) -> "Permutation":
        return cls(np.arange(degree, dtype=_DTYPE))

    @classmethod
    def from_cycles(cls, text: str, degree: int) -> "Permutation":
        """Parse 1-based cycle notation, e.g. "(1 2)(3 4)" or "()".

        Cycles are applied left to right; for the usual disjoint cycles the
        order does not matter.
        """
        text = text.strip()
        if text in ("", "()"):
            return cls.identity(degree)
        leftover = _CYCLE_RE.sub("", text).strip()
        if leftover:
            raise ValueError(f"not cycle notation: {text!r}")
        images = np.arange(degree, dtype=_DTYPE)
        for match in _CYCLE_RE.finditer(text):
            parts = match.group(1).replace(",", " ").split()
            if not parts:
                continue
            try:
                cyc = [int(p) - 1 for p in parts]
            except ValueError:
                raise ValueError(f"bad cycle entry in {match.group(0)}") from None
            if any(not 0 <= x < degree for x in cyc):
                raise ValueError(f"cycle {match.group(0)} exceeds degree {degree}")
            if len(set(cyc)) != len(cyc):
                raise ValueError(f"repeated point in cycle {match.group(0)}")
            step = np.arange(degree, dtype=_DTYPE)
            for i, x in enumerate(cyc):
                step[x] = cyc[(i + 1) % len(cyc)]
            images = step[images]
        return cls(images)

    @property
    def degree(self) -> int:
        return int(self.images.shape[0])

    def apply(self, point: int) -> int:
        return int(self.images[point])

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.images, np.arange(self.degree, dtype=_DTYPE)))

    def min_moved(self) -> int | None:
        diff = np.flatnonzero(self.images != np.arange(self.degree, dtype=_DTYPE))
        return int(diff[0]) if diff.size else None

    def inverse(self) -> "Permutation":
        inv = np.empty(self.degree, dtype=_DTYPE)
        inv[self.images] = np.arange(self.degree, dtype=_DTYPE)
        return Permutation(inv)

    def __mul__(self, other: "Permutation") -> "Permutation":
        return compose(self, other)

    def __pow__(self, k: int) -> "Permutation":
        if k == 0:
            return Permutation.identity(self.degree)
        base = self if k > 0 else self.inverse()
        out = base
        for _ in range(abs(k) - 1):
            out = compose(out, base)
        return out

    def __eq__(self, other) -> bool:
        return (isinstance(other, Permutation)
                and np.array_equal(self.images, other.images))

    def __hash__(self) -> int:
        return self._hash

    def to_cycles(self) -> str:
        """1-based disjoint cycle notation; "()" for the identity."""
        seen = [False] * self.degree
        out = []
        for start in range(self.degree):
            if seen[start] or self.images[start] == start:
                seen[start] = True
                continue
            cyc = [start]
            seen[start] = True
            x = int(self.images[start])
            while x != start:
                cyc.append(x)
                seen[x] = True
                x = int(self.images[x])
            out.append("(" + " ".join(str(v + 1) for v in cyc) + ")")
        return "".join(out) if out else "()"

    def __repr__(self) -> str:
        return f"Permutation({self.to_cycles()}, degree={self.degree})"


def compose(p: Permutation, q: Permutation) -> Permutation:
    """Product applying p first, then q: x -> q(p(x))."""
    if p.degree != q.degree:
        raise DegreeMismatch(p.degree, q.degree)
    return Permutation(q.images[p.images])


def inverse(p: Permutation) -> Permutation:
    return p.inverse()


def conjugate(x: Permutation, g: Permutation) -> Permutation:
    """g^-1 x g under left-to-right composition."""
    return Permutation(g.images[x.images[g.inverse().images]])


def commutator(a: Permutation, b: Permutation) -> Permutation:
    """a^-1 b^-1 a b."""
    ai, bi = a.inverse().images, b.inverse().images
    return Permutation(b.images[a.images[bi[ai]]])


def _big_log2(n: int) -> float:
    bl = n.bit_length()
    if bl <= 53:
        return math.log2(n)
    shift = bl - 53
    return math.log2(n >> shift) + shift


def big_log(n: int, base: float) -> float:
    """log of a (possibly huge) positive integer in the given base."""
    if n <= 0:
        raise ValueError("log of non-positive integer")
    return _big_log2(n) / math.log2(base)


def exact_power_exponent(n: int, m: int) -> int | None:
    """e with n == m^e, or None if n is not an exact power of m."""
    if n < 1 or m < 2:
        return None
    e = 0
    while n % m == 0:
        n //= m
        e += 1
    return e if n == 1 else None


class _Tower:
    """Vertex bookkeeping for the m-regular depth-n block tower on a degree.

    Vertices of levels 1..n get consecutive ids, level by level; the leaves
    are the last m^n ids.  A flat domain is the (m=degree, n=1) tower.  An
    optional split vertex reorders the base: every vertex outside its subtree
    comes first, so the tail of the chain is exactly the pointwise stabilizer
    of the complement of that leaf block.
    """

    def __init__(self, m: int, n: int, degree: int, split: tuple[int, int] | None = None):
        self.m = m
        self.n = n
        self.degree = degree
        self.widths = [m ** (n - j) for j in range(n + 1)]
        self.counts = [m ** j for j in range(n + 1)]
        self.offsets = [0] * (n + 2)
        acc = 0
        for j in range(1, n + 1):
            self.offsets[j] = acc
            acc += self.counts[j]
        self.offsets[n + 1] = acc
        self.size = acc
        self.level_of = np.empty(self.size, dtype=np.int8)
        for j in range(1, n + 1):
            self.level_of[self.offsets[j]:self.offsets[j] + self.counts[j]] = j
        self.split = split  # (level, index) of the split vertex
        self._aranges = {j: np.arange(self.counts[j], dtype=_DTYPE) for j in range(1, n + 1)}
        self._segments = []  # (level, indices or None, start_rank)
        if split is None:
            for j in range(1, n + 1):
                self._segments.append((j, None, self.offsets[j]))
            self._rank_of = None  # identity
        else:
            sl, si = split
            rank = 0
            ranks = np.empty(self.size, dtype=_DTYPE)
            outside, inside = [], []
            for j in range(1, n + 1):
                idxs = np.arange(self.counts[j], dtype=_DTYPE)
                if j < sl:
                    outside.append((j, idxs))
                else:
                    shift = j - sl
                    mask = (idxs // (m ** shift)) == si
                    outside.append((j, idxs[~mask]))
                    inside.append((j, idxs[mask]))
            for j, idxs in outside + inside:
                self._segments.append((j, idxs, rank))
                ranks[self.offsets[j] + idxs] = np.arange(rank, rank + len(idxs), dtype=_DTYPE)
                rank += len(idxs)
            self._rank_of = ranks
        self._vid_of_rank = None
        if self._rank_of is not None:
            vids = np.empty(self.size, dtype=_DTYPE)
            vids[self._rank_of] = np.arange(self.size, dtype=_DTYPE)
            self._vid_of_rank = vids

    @property
    def flat(self) -> bool:
        return self.n == 1

    def rank_of(self, vid: int) -> int:
        return vid if self._rank_of is None else int(self._rank_of[vid])

    def vid_of(self, rank: int) -> int:
        return rank if self._vid_of_rank is None else int(self._vid_of_rank[rank])

    def vertex_apply(self, arr: np.ndarray, vid: int) -> int:
        j = int(self.level_of[vid])
        w = self.widths[j]
        v = vid - self.offsets[j]
        return self.offsets[j] + int(arr[v * w]) // w

    def parent_vid(self, vid: int) -> int:
        """Parent vertex id, or -1 for the (virtual) root."""
        j = int(self.level_of[vid])
        if j == 1:
            return -1
        v = vid - self.offsets[j]
        return self.offsets[j - 1] + v // self.m

    def ancestors(self, vid: int) -> list[int]:
        """Proper ancestors of a vertex, nearest first, excluding the root."""
        out = []
        p = self.parent_vid(vid)
        while p != -1:
            out.append(p)
            p = self.parent_vid(p)
        return out

    def min_moved_rank(self, arr: np.ndarray) -> int | None:
        """Rank of the first moved vertex in base order, None for identity."""
        for j, idxs, start in self._segments:
            w = self.widths[j]
            firsts = arr[::w] // w
            if idxs is None:
                neq = firsts != self._aranges[j]
                if neq.any():
                    return start + int(np.argmax(neq))
            else:
                sub = firsts[idxs]
                neq = sub != idxs
                if neq.any():
                    return start + int(np.argmax(neq))
        return None

    def support_root(self, arr: np.ndarray) -> int | None:
        """Deepest vertex whose leaf block contains all moved leaves.

        Returns -1 when the support spans several level-1 blocks and None for
        the identity.
        """
        moved = np.flatnonzero(arr != np.arange(self.degree, dtype=_DTYPE))
        if not moved.size:
            return None
        lo, hi = int(moved[0]), int(moved[-1])
        for j in range(self.n - 1, 0, -1):
            w = self.widths[j]
            if lo // w == hi // w:
                return self.offsets[j] + lo // w
        return -1

    def preserves_blocks(self, arr: np.ndarray) -> bool:
        for j in range(1, self.n):
            w = self.widths[j]
            blocks = (arr // w).reshape(-1, w)
            if not np.all(blocks == blocks[:, :1]):
                return False
        return True


def _detect_tower(degree: int, arrs: list[np.ndarray]) -> _Tower:
    """Finest block tower preserved by all generators; flat if none."""
    if degree >= 4:
        for n in range(degree.bit_length() - 1, 1, -1):
            m = round(degree ** (1.0 / n))
            for cand in (m - 1, m, m + 1):
                if cand >= 2 and cand**n == degree:
                    tower = _Tower(cand, n, degree)
                    if all(tower.preserves_blocks(a) for a in arrs):
                        return tower
                    break
    return _Tower(degree, 1, degree)


class _Level:
    __slots__ = ("rank", "vid", "edge", "orbit_list", "U", "UI", "done_pairs",
                 "bfs_done", "src_keys", "src_read", "cols", "cols_set")

    def __init__(self, rank: int, vid: int, tower: _Tower):
        self.rank = rank
        self.vid = vid
        self.edge: dict[int, tuple[int, int, int] | None] = {vid: None}
        self.orbit_list: list[int] = [vid]
        # materialized coset representative u (base -> point) and its inverse
        self.U: dict[int, np.ndarray] = {}
        self.UI: dict[int, np.ndarray] = {}
        self.done_pairs: dict[int, int] = {}
        self.bfs_done: dict[int, int] = {}
        parent = tower.parent_vid(vid)
        keys: list[tuple] = [("c", parent)]
        if parent != -1:
            for anc in tower.ancestors(parent):
                keys.append(("b", anc))
            keys.append(("b", -1))
        self.src_keys = keys
        self.src_read: dict[tuple, int] = {}
        self.cols: list[int] = []
        self.cols_set: set[int] = set()


class StabilizerChain:
    """Deterministic stabilizer chain (base, orbits, transversals) of a group.

    Build through build_chain.  The base is a sequence of tree vertices when
    the generators preserve a block tower (leaves are the last m^n vertex
    ids), plain points otherwise; either way `order` is the exact group order
    and `membership` is decisive.
    """

    def __init__(self, degree: int, tower: _Tower, prefix: list[int] | None = None,
                 pair_budget: int = DEFAULT_PAIR_BUDGET):
        self.degree = degree
        self._tower = tower
        self._gens: list[np.ndarray] = []
        self._invs: list[np.ndarray] = []
        self._attach_rank: list[int] = []
        self._levels: list[_Level] = []
        self._points: list[int] = []
        self._prefix_len = 0
        self._bucket: dict[int, list[int]] = {}
        self._cum: dict[int, list[int]] = {}
        self._member_digests: set = set()
        self._pair_budget = pair_budget
        self._pairs_done = 0
        self._id_arr = np.arange(degree, dtype=_DTYPE)
        # per-level gather tables for the sift: first leaf, block width and
        # block index of each suffix level's base vertex, rebuilt on insert
        self._lvl_tables: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
        rng = np.random.Generator(np.random.PCG64(0x5EED_0F_7D1E))
        self._w1 = rng.integers(1, 2**63, size=degree, dtype=np.uint64) | 1
        self._w2 = rng.integers(1, 2**63, size=degree, dtype=np.uint64) | 1
        self.generators: list[Permutation] = []
        if prefix:
            for i, pt in enumerate(prefix):
                vid = self._leaf_vid(pt)
                lvl = _Level(i, vid, tower)
                self._levels.append(lvl)
                self._points.append(i)
            self._prefix_len = len(prefix)

    # -- basic geometry -------------------------------------------------

    def _leaf_vid(self, point: int) -> int:
        return self._tower.offsets[self._tower.n] + point

    def _suffix_rank(self, arr: np.ndarray) -> int | None:
        r = self._tower.min_moved_rank(arr)
        if r is None:
            return None
        return r + self._prefix_len

    def _digest(self, arr: np.ndarray):
        a = arr.astype(np.uint64)
        return (int((a * self._w1).sum(dtype=np.uint64)),
                int((a * self._w2).sum(dtype=np.uint64)))

    # -- chain structure ------------------------------------------------

    @property
    def base(self) -> list[int]:
        """Base vertices (tower mode) or points (flat mode), chain order."""
        return [lvl.vid for lvl in self._levels]

    @property
    def order(self) -> int:
        out = 1
        for lvl in self._levels:
            out *= len(lvl.orbit_list)
        return out

    @property
    def tower_shape(self) -> tuple[int, int]:
        return (self._tower.m, self._tower.n)

    def strong_generators(self) -> list[Permutation]:
        if not self._levels:
            # trivial group; a subchain may still share ancestor slots
            return []
        start = self._levels[0].rank
        return [Permutation(self._gens[s]) for s in range(len(self._gens))
                if self._attach_rank[s] >= start]

    def transversal(self, level_index: int) -> dict[int, Permutation]:
        """Coset representatives u with u(base vertex) = orbit vertex."""
        lvl = self._levels[level_index]
        return {vid: Permutation(self._transversal_arr(lvl, vid))
                for vid in lvl.orbit_list}

    def level_points(self) -> list[int]:
        return [lvl.vid for lvl in self._levels]

    def orbit_sizes(self) -> list[int]:
        return [len(lvl.orbit_list) for lvl in self._levels]

    def vertex_level_stabilizer(self, k: int) -> "StabilizerChain":
        """Subchain fixing every tree vertex of level <= k.

        Valid on plain tower chains only (no base prefix, no split): there
        the base lists vertices level by level, so cutting the chain at the
        first level-(k+1) vertex leaves exactly the level-k stabilizer.
        """
        if self._prefix_len:
            raise ValueError("level stabilizer needs the tower base, not a prefix")
        tw = self._tower
        if tw.split is not None:
            raise ValueError("level stabilizer is not defined on split chains")
        if not 0 <= k <= tw.n:
            raise ValueError(f"vertex level {k} outside 0..{tw.n}")
        return self._subchain(bisect_left(self._points, tw.offsets[k + 1]))

    # -- sifting ----------------------------------------------------------

    def _apply_inv_path(self, arr: np.ndarray, lvl: _Level, vid: int) -> np.ndarray:
        if vid == lvl.vid:
            return arr
        return lvl.UI[vid][arr]

    def _level_tables(self):
        if self._lvl_tables is None:
            tower = self._tower
            fl = np.empty(len(self._levels), dtype=np.int64)
            w = np.empty(len(self._levels), dtype=np.int64)
            vidx = np.empty(len(self._levels), dtype=np.int64)
            for i, lvl in enumerate(self._levels):
                j = int(tower.level_of[lvl.vid])
                vidx[i] = lvl.vid - tower.offsets[j]
                w[i] = tower.widths[j]
                fl[i] = vidx[i] * w[i]
            self._lvl_tables = (fl, w, vidx)
        return self._lvl_tables

    def _sift_arr(self, arr: np.ndarray, start_idx: int = 0) -> np.ndarray | None:
        """Sift from the given level index.

        Callers with start_idx > 0 must pass an element already fixing every
        base vertex of the earlier levels; Schreier pairs of a level do.
        """
        r = arr
        idx = start_idx
        for idx in range(start_idx, self._prefix_len):
            lvl = self._levels[idx]
            a = self._tower.vertex_apply(r, lvl.vid)
            if a == lvl.vid:
                continue
            if a not in lvl.edge:
                return r
            r = self._apply_inv_path(r, lvl, a)
        idx = max(start_idx, self._prefix_len)
        fl, w, vidx = self._level_tables()
        while True:
            moved = r[fl[idx:]] // w[idx:] != vidx[idx:]
            offs = np.flatnonzero(moved)
            if not offs.size:
                break
            k = idx + int(offs[0])
            lvl = self._levels[k]
            a = self._tower.vertex_apply(r, lvl.vid)
            if a not in lvl.edge:
                return r
            r = self._apply_inv_path(r, lvl, a)
            idx = k
        if np.array_equal(r, self._id_arr):
            return None
        return r

    def membership(self, p: Permutation) -> bool:
        # no block-structure pre-check: the sift only reports membership on an
        # exact identity residue, so it is already correct for wild input
        if p.degree != self.degree:
            raise DegreeMismatch(self.degree, p.degree)
        return self._sift_arr(np.asarray(p.images, dtype=_DTYPE)) is None

    # -- construction -----------------------------------------------------

    def _register_slot(self, slot: int) -> None:
        w = self._tower.support_root(self._gens[slot])
        if w is None:
            return
        self._bucket.setdefault(w, []).append(slot)
        u = w
        while u != -1:
            self._cum.setdefault(u, []).append(slot)
            u = self._tower.parent_vid(u)
        self._cum.setdefault(-1, []).append(slot)

    def _attach(self, arr: np.ndarray) -> int:
        """Store a new strong generator, creating its level if needed.

        Returns the rank of the level it landed on.
        """
        for idx in range(self._prefix_len):
            lvl = self._levels[idx]
            if self._tower.vertex_apply(arr, lvl.vid) != lvl.vid:
                rank = lvl.rank
                break
        else:
            rank = self._suffix_rank(arr)
            if rank is None:
                raise AssertionError("attaching the identity")
            idx = bisect_left(self._points, rank, self._prefix_len)
            if idx == len(self._points) or self._points[idx] != rank:
                vid = self._tower.vid_of(rank - self._prefix_len)
                self._levels.insert(idx, _Level(rank, vid, self._tower))
                self._points.insert(idx, rank)
                self._lvl_tables = None
        slot = len(self._gens)
        inv = np.empty(self.degree, dtype=_DTYPE)
        inv[arr] = self._id_arr
        self._gens.append(arr)
        self._invs.append(inv)
        self._attach_rank.append(rank)
        self._member_digests.add(self._digest(arr))
        self._register_slot(slot)
        # grow this level's orbit right away so the next sift composes
        # through instead of attaching a sibling copy of the same coset
        lvl = self._levels[idx]
        self._refresh_cols(lvl)
        self._close_orbit(lvl)
        return rank

    def _refresh_cols(self, lvl: _Level) -> None:
        for key in lvl.src_keys:
            seq = (self._cum if key[0] == "c" else self._bucket).get(key[1])
            if not seq:
                continue
            start = lvl.src_read.get(key, 0)
            if start == len(seq):
                continue
            for slot in seq[start:]:
                if self._attach_rank[slot] >= lvl.rank and slot not in lvl.cols_set:
                    insort(lvl.cols, slot)
                    lvl.cols_set.add(slot)
            lvl.src_read[key] = len(seq)

    def _close_orbit(self, lvl: _Level) -> None:
        while True:
            grew = False
            for slot in lvl.cols:
                done = lvl.bfs_done.get(slot, 0)
                lst = lvl.orbit_list
                while done < len(lst):
                    p = lst[done]
                    done += 1
                    for pol, arr in ((1, self._gens[slot]), (-1, self._invs[slot])):
                        q = self._tower.vertex_apply(arr, p)
                        if q not in lvl.edge:
                            lvl.edge[q] = (slot, pol, p)
                            u_p = self._id_arr if p == lvl.vid else lvl.U[p]
                            ui_p = self._id_arr if p == lvl.vid else lvl.UI[p]
                            inv = self._invs[slot] if pol == 1 else self._gens[slot]
                            lvl.U[q] = arr[u_p]
                            lvl.UI[q] = ui_p[inv]
                            lst.append(q)
                            grew = True
                lvl.bfs_done[slot] = done
            if not grew:
                return

    def _transversal_arr(self, lvl: _Level, vid: int) -> np.ndarray:
        return self._id_arr if vid == lvl.vid else lvl.U[vid]

    def _schreier_pair(self, lvl: _Level, a: int, slot: int) -> int | None:
        """Process one Schreier generator; returns attach rank or None."""
        self._pairs_done += 1
        if self._pairs_done > self._pair_budget:
            raise ResourceLimit(
                f"stabilizer chain construction exceeded {self._pair_budget} "
                "Schreier pairs", budget=self._pair_budget)
        g = self._gens[slot]
        if a == lvl.vid and self._attach_rank[slot] > lvl.rank:
            return None  # u_a is the identity and g fixes a: the pair is g itself
        b = self._tower.vertex_apply(g, a)
        z = g if a == lvl.vid else g[lvl.U[a]]
        if b != lvl.vid:
            z = lvl.UI[b][z]
        if np.array_equal(z, self._id_arr) or np.array_equal(z, g):
            return None
        dig = self._digest(z)
        if dig in self._member_digests:
            return None
        # every Schreier pair is a product of stored generators, hence in the
        # group; recording it only short-circuits repeats
        self._member_digests.add(dig)
        # z is built from elements fixing every base vertex ranked below this
        # level, so the sift may start here
        start = bisect_left(self._points, lvl.rank)
        res = self._sift_arr(z, start)
        if res is None:
            return None
        return self._attach(np.ascontiguousarray(res))

    def _work_level(self, lvl: _Level) -> int | None:
        deepest = None
        while True:
            progressed = False
            self._refresh_cols(lvl)
            self._close_orbit(lvl)
            for slot in list(lvl.cols):
                done = lvl.done_pairs.get(slot, 0)
                norb = len(lvl.orbit_list)
                if done >= norb:
                    continue
                progressed = True
                for oi in range(done, norb):
                    t = self._schreier_pair(lvl, lvl.orbit_list[oi], slot)
                    if t is not None and (deepest is None or t > deepest):
                        deepest = t
                lvl.done_pairs[slot] = norb
            if not progressed:
                return deepest

    def _complete(self) -> None:
        if not self._levels:
            return
        cur = self._levels[-1].rank
        while True:
            idx = bisect_left(self._points, cur)
            lvl = self._levels[idx]
            deepest = self._work_level(lvl)
            if deepest is not None and deepest > cur:
                cur = deepest
                continue
            if idx == 0:
                if self._points[0] != cur:
                    cur = self._points[0]
                    continue
                return
            if self._points[idx] != cur:  # levels inserted below us
                cur = self._points[idx]
                continue
            cur = self._points[idx - 1]

    def _insert_perm_arr(self, arr: np.ndarray) -> bool:
        res = self._sift_arr(arr)
        if res is None:
            return False
        self._attach(np.ascontiguousarray(res))
        return True

    def add_generator(self, p: Permutation) -> bool:
        """Extend the group by one element; True if the group grew."""
        if p.degree != self.degree:
            raise DegreeMismatch(self.degree, p.degree)
        if not self._tower.flat and not self._tower.preserves_blocks(p.images):
            # the new element breaks the block tower this chain's base was
            # built on; rebuild on a tower all elements respect
            if self._prefix_len:
                raise ValueError("element moves a stabilized prefix point")
            before = self.order
            gens = self.generators + [p]
            rebuilt = build_chain(self.degree, self.strong_generators() + [p],
                                  pair_budget=self._pair_budget)
            self.__dict__.update(rebuilt.__dict__)
            self.generators = gens
            return self.order != before
        grew = self._insert_perm_arr(np.asarray(p.images, dtype=_DTYPE))
        if grew:
            self.generators.append(p)
            self._complete()
        return grew

    # -- serialization ----------------------------------------------------

    def to_payload(self) -> tuple[dict, np.ndarray]:
        """JSON-compatible metadata plus the stacked generator arrays."""
        meta = {
            "degree": self.degree,
            "tower": [self._tower.m, self._tower.n],
            "order": str(self.order),
            "prefix_len": self._prefix_len,
            "attach_rank": list(self._attach_rank),
            "levels": [
                {
                    "rank": lvl.rank,
                    "vid": lvl.vid,
                    "orbit": [
                        [v] if lvl.edge[v] is None else [v, *lvl.edge[v]]
                        for v in lvl.orbit_list
                    ],
                }
                for lvl in self._levels
            ],
            "gen_count": len(self._gens),
        }
        stack = (np.stack(self._gens) if self._gens
                 else np.empty((0, self.degree), dtype=_DTYPE))
        return meta, stack

    @classmethod
    def from_payload(cls, meta: dict, stack: np.ndarray) -> "StabilizerChain":
        degree = meta["degree"]
        m, n = meta["tower"]
        if meta["prefix_len"]:
            raise ValueError("prefix chains are not cached")
        chain = cls(degree, _Tower(m, n, degree))
        for i in range(meta["gen_count"]):
            arr = np.ascontiguousarray(stack[i], dtype=_DTYPE)
            inv = np.empty(degree, dtype=_DTYPE)
            inv[arr] = chain._id_arr
            chain._gens.append(arr)
            chain._invs.append(inv)
            chain._attach_rank.append(meta["attach_rank"][i])
            chain._member_digests.add(chain._digest(arr))
            chain._register_slot(i)
        for entry in meta["levels"]:
            lvl = _Level(entry["rank"], entry["vid"], chain._tower)
            lvl.edge.clear()
            lvl.orbit_list = []
            for row in entry["orbit"]:
                if len(row) == 1:
                    lvl.edge[row[0]] = None
                else:
                    v, slot, pol, parent = row
                    lvl.edge[v] = (slot, pol, parent)
                    step = chain._gens[slot] if pol == 1 else chain._invs[slot]
                    sinv = chain._invs[slot] if pol == 1 else chain._gens[slot]
                    u_p = chain._id_arr if parent == lvl.vid else lvl.U[parent]
                    ui_p = chain._id_arr if parent == lvl.vid else lvl.UI[parent]
                    lvl.U[v] = step[u_p]
                    lvl.UI[v] = ui_p[sinv]
                lvl.orbit_list.append(row[0])
            chain._levels.append(lvl)
            chain._points.append(entry["rank"])
        # mark all pair work as done; the payload stores a completed chain
        for lvl in chain._levels:
            chain._refresh_cols(lvl)
            for slot in lvl.cols:
                lvl.done_pairs[slot] = len(lvl.orbit_list)
                lvl.bfs_done[slot] = len(lvl.orbit_list)
        if str(chain.order) != meta["order"]:
            raise ValueError("stored chain fails its own order check")
        chain.generators = chain.strong_generators()
        return chain

    # -- derived data -------------------------------------------------------

    def _subchain(self, start_idx: int) -> "StabilizerChain":
        """Chain for the group of levels[start_idx:], sharing generator storage."""
        sub = StabilizerChain(self.degree, self._tower,
                              pair_budget=self._pair_budget)
        sub._gens = self._gens
        sub._invs = self._invs
        sub._attach_rank = self._attach_rank
        sub._bucket = self._bucket
        sub._cum = self._cum
        sub._member_digests = self._member_digests
        sub._levels = self._levels[start_idx:]
        sub._points = self._points[start_idx:]
        start = sub._levels[0].rank if sub._levels else (
            self._points[-1] + 1 if self._points else 0)
        sub.generators = [Permutation(self._gens[s]) for s in range(len(self._gens))
                          if self._attach_rank[s] >= start]
        return sub


def build_chain(degree: int, generators: list[Permutation],
                base_prefix: list[int] | None = None,
                pair_budget: int = DEFAULT_PAIR_BUDGET) -> StabilizerChain:
    """Deterministic stabilizer chain for the group the generators produce.

    With base_prefix the listed points are stabilized first, in the given
    order, and the block tower is not used; the tail of the chain is then the
    pointwise stabilizer of the prefix.
    """
    if degree < 1:
        raise ValueError("degree must be positive")
    if degree > MAX_CHAIN_POINTS:
        raise ResourceLimit(
            f"chain on {degree} points exceeds the cap of {MAX_CHAIN_POINTS}",
            budget=MAX_CHAIN_POINTS)
    arrs = []
    for g in generators:
        if g.degree != degree:
            raise DegreeMismatch(degree, g.degree)
        arrs.append(np.asarray(g.images, dtype=_DTYPE))
    if base_prefix is not None:
        bad = [p for p in base_prefix if not 0 <= p < degree]
        if bad:
            raise ValueError(f"base prefix points {bad} outside 0..{degree - 1}")
        tower = _Tower(degree, 1, degree)
        chain = StabilizerChain(degree, tower, prefix=list(base_prefix),
                                pair_budget=pair_budget)
    else:
        tower = _detect_tower(degree, arrs)
        chain = StabilizerChain(degree, tower, pair_budget=pair_budget)
    chain.generators = [g for g in generators if not g.is_identity()]
    for arr in arrs:
        if not np.array_equal(arr, chain._id_arr):
            chain._insert_perm_arr(arr)
    chain._complete()
    return chain


def build_split_chain(degree: int, generators: list[Permutation],
                      block_start: int, block_width: int,
                      pair_budget: int = DEFAULT_PAIR_BUDGET) -> tuple[StabilizerChain, StabilizerChain]:
    """Chain whose base stabilizes everything outside one leaf block first.

    Returns (full chain, subchain fixing the complement of the block).  The
    generators must preserve a block tower in which [block_start,
    block_start + block_width) is a block; otherwise ValueError.
    """
    arrs = [np.asarray(g.images, dtype=_DTYPE) for g in generators]
    tower = _detect_tower(degree, arrs)
    if tower.flat and degree != block_width:
        raise ValueError("generators preserve no block tower")
    if block_width == degree:
        chain = build_chain(degree, generators, pair_budget=pair_budget)
        return chain, chain
    level = tower.n - exact_power_exponent(block_width, tower.m)
    if block_start % block_width:
        raise ValueError("block is not aligned")
    split = (level, block_start // block_width)
    stower = _Tower(tower.m, tower.n, degree, split=split)
    chain = StabilizerChain(degree, stower, pair_budget=pair_budget)
    chain.generators = [g for g in generators if not g.is_identity()]
    for arr in arrs:
        if not np.array_equal(arr, chain._id_arr):
            chain._insert_perm_arr(arr)
    chain._complete()
    # ranks of the split subtree start where the outside segments end
    inside_start = stower.rank_of(stower.offsets[level] + split[1])
    idx = bisect_left(chain._points, inside_start)
    return chain, chain._subchain(idx)


def orbits(degree: int, generators: list[Permutation],
           points: list[int] | None = None) -> list[list[int]]:
    """Orbits on 0..degree-1 (or on the given points), each sorted, listed by
    smallest element."""
    for g in generators:
        if g.degree != degree:
            raise DegreeMismatch(degree, g.degree)
    arrs = [np.asarray(g.images) for g in generators]
    todo = sorted(set(range(degree) if points is None else points))
    seen = set()
    out = []
    for start in todo:
        if start in seen:
            continue
        orb = [start]
        seen.add(start)
        k = 0
        while k < len(orb):
            x = orb[k]
            k += 1
            for arr in arrs:
                y = int(arr[x])
                if y not in seen:
                    seen.add(y)
                    orb.append(y)
        out.append(sorted(orb))
    return out


def log_order(chain: StabilizerChain, base: int) -> tuple[float, int | None]:
    """(float log, exact exponent when the order is a power of the base)."""
    n = chain.order
    return big_log(n, base), exact_power_exponent(n, base)


def is_normal(ambient: StabilizerChain, sub: StabilizerChain) -> bool:
    """Whether the group of `sub` is normal in the group of `ambient`."""
    if ambient.degree != sub.degree:
        raise DegreeMismatch(ambient.degree, sub.degree)
    sub_gens = sub.generators or sub.strong_generators()
    for x in sub_gens:
        if not ambient.membership(x):
            raise NotSubgroup(f"{x!r} is outside the ambient group")
    for g in ambient.generators or ambient.strong_generators():
        for x in sub_gens:
            if not sub.membership(conjugate(x, g)):
                return False
    return True


def derived_subgroup(chain: StabilizerChain,
                     pair_budget: int = DEFAULT_PAIR_BUDGET) -> StabilizerChain:
    """Chain of the derived subgroup (normal closure of generator commutators)."""
    gens = [g for g in (chain.generators or chain.strong_generators())
            if not g.is_identity()]
    degree = chain.degree
    id_arr = np.arange(degree, dtype=_DTYPE)
    arrs = [np.asarray(g.images, dtype=_DTYPE) for g in gens]
    invs = []
    spans = []
    for a in arrs:
        inv = np.empty(degree, dtype=_DTYPE)
        inv[a] = id_arr
        invs.append(inv)
        moved = np.flatnonzero(a != id_arr)
        spans.append((int(moved[0]), int(moved[-1])))
    derived = build_chain(degree, [], pair_budget=pair_budget)
    for i in range(len(arrs)):
        lo_i, hi_i = spans[i]
        for j in range(i + 1, len(arrs)):
            lo_j, hi_j = spans[j]
            if hi_i < lo_j or hi_j < lo_i:
                continue  # disjoint supports commute
            c = arrs[j][arrs[i][invs[j][invs[i]]]]
            if derived._sift_arr(c) is not None:
                derived.add_generator(Permutation(c))
    # close under conjugation by the ambient generators; seeding with the
    # strong generators keeps the queue near the chain length instead of the
    # commutator count, and conjugation by a generator whose support interval
    # is disjoint fixes the element, so those pairs are skipped outright
    queue = [np.asarray(x.images, dtype=_DTYPE)
             for x in derived.strong_generators()]
    qspans = []
    for x in queue:
        moved = np.flatnonzero(x != id_arr)
        qspans.append((int(moved[0]), int(moved[-1])))
    qi = 0
    while qi < len(queue):
        x = queue[qi]
        lo_x, hi_x = qspans[qi]
        qi += 1
        for (lo_g, hi_g), a, inv in zip(spans, arrs, invs):
            if hi_x < lo_g or hi_g < lo_x:
                continue
            y = a[x[inv]]
            if derived._sift_arr(y) is not None:
                derived.add_generator(Permutation(y))
                queue.append(y)
                moved = np.flatnonzero(y != id_arr)
                qspans.append((int(moved[0]), int(moved[-1])))
    return derived


def center(chain: StabilizerChain,
           node_budget: int = DEFAULT_NODE_BUDGET) -> StabilizerChain:
    """Chain of the center.

    A central element commutes with every generator, so on each orbit it is a
    G-equivariant self-map, pinned down by the image of one point.  Candidate
    images (limited to points fixed by every generator fixing the orbit
    representative) are expanded in bulk along a spanning tree of the orbit
    and checked against every generator; combinations across orbits are then
    filtered through chain membership.
    """
    degree = chain.degree
    gens = [g for g in (chain.generators or chain.strong_generators())
            if not g.is_identity()]
    if not gens:
        return build_chain(degree, [])
    arrs = []
    seen_keys = set()
    for g in gens:
        key = g.images.tobytes()
        if key not in seen_keys:
            seen_keys.add(key)
            arrs.append(np.asarray(g.images, dtype=_DTYPE))
    nodes = 0

    def spend(k: int) -> None:
        nonlocal nodes
        nodes += k
        if nodes > node_budget:
            raise ResourceLimit(
                f"center search exceeded {node_budget} nodes",
                budget=node_budget)

    seen_pts = np.zeros(degree, dtype=bool)
    parent = np.zeros(degree, dtype=np.int64)
    via = np.zeros(degree, dtype=np.int64)
    per_orbit: list[tuple[np.ndarray, list[np.ndarray]]] = []
    for start in range(degree):
        if seen_pts[start]:
            continue
        # spanning tree of the orbit, parents before children
        seen_pts[start] = True
        parts = [np.array([start], dtype=np.int64)]
        frontier = parts[0]
        while frontier.size:
            grown = []
            for gi, arr in enumerate(arrs):
                spend(frontier.size)
                img = arr[frontier]
                fresh = ~seen_pts[img]
                if not fresh.any():
                    continue
                pts, first = np.unique(img[fresh], return_index=True)
                pts = pts.astype(np.int64)
                seen_pts[pts] = True
                parent[pts] = frontier[fresh][first]
                via[pts] = gi
                grown.append(pts)
            frontier = (np.concatenate(grown) if grown
                        else np.empty(0, dtype=np.int64))
            parts.append(frontier)
        orb = np.concatenate(parts[:-1])
        # a candidate image of the representative must be fixed by all
        # generators fixing the representative
        cand = orb.copy()
        for arr in arrs:
            if int(arr[start]) == start:
                spend(cand.size)
                cand = cand[arr[cand] == cand]
        cand.sort()
        rows: list[np.ndarray] = []
        chunk = max(1, (1 << 22) // degree)
        for c0 in range(0, cand.size, chunk):
            sel = cand[c0:c0 + chunk].astype(_DTYPE)
            fmap = np.empty((sel.size, degree), dtype=_DTYPE)
            fmap[:, start] = sel
            spend(sel.size * max(orb.size - 1, 0))
            for x in orb[1:]:
                fmap[:, x] = arrs[int(via[x])][fmap[:, int(parent[x])]]
            alive = np.ones(sel.size, dtype=bool)
            for arr in arrs:
                spend(int(alive.sum()) * orb.size)
                sub = fmap[:, orb]
                eq = (fmap[:, arr[orb]] == arr[sub]).all(axis=1)
                alive &= eq
                if not alive.any():
                    break
            for i in np.flatnonzero(alive):
                rows.append(fmap[i, orb].copy())
        per_orbit.append((orb, rows))

    combos = 1
    for _, rows in per_orbit:
        combos *= max(len(rows), 1)
        if combos > node_budget:
            raise ResourceLimit(
                f"center search exceeded {node_budget} nodes",
                budget=node_budget)
    spend(combos)
    members = []
    identity = np.arange(degree, dtype=_DTYPE)
    for choice in itertools.product(*(range(len(rows)) for _, rows in per_orbit)):
        acc = identity.copy()
        for (orb, rows), ri in zip(per_orbit, choice):
            acc[orb] = rows[ri]
        p = Permutation(acc)
        if not p.is_identity() and chain.membership(p):
            members.append(p)
    return build_chain(degree, members)


def pointwise_stabilizer(chain: StabilizerChain, points: list[int],
                         pair_budget: int = DEFAULT_PAIR_BUDGET) -> StabilizerChain:
    """Chain of the subgroup fixing every listed point.

    When the complement of the points is a single aligned block of the
    chain's tower the rebuild keeps the tree base (fast); otherwise the
    listed points are stabilized first in a flat rebuild.
    """
    degree = chain.degree
    pts = sorted(set(points))
    if any(not 0 <= p < degree for p in pts):
        raise ValueError("stabilizer points outside the domain")
    gens = chain.strong_generators()
    if not pts:
        return build_chain(degree, chain.generators or gens,
                           pair_budget=pair_budget)
    comp = sorted(set(range(degree)) - set(pts))
    if comp:
        lo, hi = comp[0], comp[-1]
        width = hi - lo + 1
        contiguous = len(comp) == width
        m = chain.tower_shape[0]
        aligned = (contiguous and exact_power_exponent(width, m) is not None
                   and lo % width == 0 and not chain._tower.flat)
        if aligned:
            _, sub = build_split_chain(degree, gens, lo, width,
                                       pair_budget=pair_budget)
            return sub
    pre = build_chain(degree, gens, base_prefix=pts, pair_budget=pair_budget)
    return pre._subchain(len(pts))
