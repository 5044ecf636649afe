"""Finite-level reports on tree groups: dimension, abelianization, rigidity.

Every question here is asked of the congruence quotients: the group a spec
generates is truncated to its action on the depth-n leaves and measured
there with exact integer orders.  The reports stay finite on purpose - a
sequence of levels with explicit values, never a claimed limit.  Convergence
flags are windowed heuristics and say so.

Logarithm bases are part of each field's contract: dimension ratios and
orbit bounds are reported in base m (the tree arity), while the generic
abelianization bound |G:G'| <= 2^(#X - 1) is a base-2 statement and its
slack is reported in base 2.  Exact rational companions accompany floats
whenever both orders involved are powers of one small base.

Quotient chains are cached in memory per process and, optionally, in a
content-addressed on-disk store keyed by the spec's content key and the
level; stored orders are decimal strings.  Levels are independent work
units: the sequence scans fan out over a thread pool and reports are sorted
by level, so results do not depend on scheduling.
"""

from __future__ import annotations

import json
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from filelock import FileLock

from .constructions import GroupSpec, build_GK
from .errors import ResourceLimit, ValidationError
from .permgroup import (
    MAX_CHAIN_POINTS,
    Permutation,
    StabilizerChain,
    big_log,
    build_chain,
    center,
    commutator,
    conjugate,
    derived_subgroup,
    exact_power_exponent,
    orbits,
    pointwise_stabilizer,
)
from .tree import Vertex, leaf_block, level_vertices, parse_vertex
from .treeauto import evaluate

DEFAULT_WINDOW = 3
DEFAULT_TOLERANCE = 0.02

_POOL_WORKERS = min(8, os.cpu_count() or 1)

# -- quotient cache ---------------------------------------------------------

_CACHE_LOCK = threading.Lock()
_CHAIN_CACHE: dict[tuple[str, int, str], StabilizerChain] = {}


def clear_quotient_cache() -> None:
    """Drop every chain cached in this process."""
    with _CACHE_LOCK:
        _CHAIN_CACHE.clear()


class QuotientStore:
    """Content-addressed on-disk cache of stabilizer chains.

    One .npz file per (spec content key, level, kind), written atomically
    under a per-key advisory lock, so concurrent processes sharing the
    directory get single-writer-per-key semantics.  Loaded chains are
    rebuilt through the payload validator, which recomputes and checks the
    stored decimal order.
    """

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.npz"

    def load(self, key: str) -> StabilizerChain | None:
        path = self._path(key)
        if not path.exists():
            return None
        with np.load(path) as data:
            meta = json.loads(str(data["meta"]))
            stack = np.array(data["stack"])
        return StabilizerChain.from_payload(meta, stack)

    def save(self, key: str, chain: StabilizerChain) -> None:
        path = self._path(key)
        with FileLock(str(path) + ".lock"):
            if path.exists():
                return
            meta, stack = chain.to_payload()
            tmp = path.with_name(path.name + f".tmp{os.getpid()}")
            with open(tmp, "wb") as fh:
                np.savez_compressed(fh, meta=json.dumps(meta), stack=stack)
            os.replace(tmp, path)


def _cached_chain(spec: GroupSpec, n: int, kind: str,
                  store: QuotientStore | None, compute) -> StabilizerChain:
    key = (spec.content_key(), n, kind)
    with _CACHE_LOCK:
        hit = _CHAIN_CACHE.get(key)
    if hit is not None:
        return hit
    chain = store.load(f"{key[0]}-{kind}-n{n:02d}") if store else None
    if chain is None:
        chain = compute()
        if store is not None:
            store.save(f"{key[0]}-{kind}-n{n:02d}", chain)
    with _CACHE_LOCK:
        return _CHAIN_CACHE.setdefault(key, chain)


def quotient(spec: GroupSpec, n: int,
             store: QuotientStore | None = None) -> StabilizerChain:
    """Chain of the spec's action on the m^n leaves at depth n.

    Cached per (spec content key, n); treat the returned chain as read-only.
    """
    if n < 0:
        raise ValidationError(f"level must be nonnegative, got {n}")
    if spec.m ** n > MAX_CHAIN_POINTS:
        raise ResourceLimit(
            f"level {n} of the {spec.m}-adic tree has {spec.m ** n} leaves, "
            f"over the chain cap of {MAX_CHAIN_POINTS}",
            budget=MAX_CHAIN_POINTS)

    def compute() -> StabilizerChain:
        if n == 0:
            return build_chain(1, [])
        gens = [evaluate(g, n) for g in spec.generators_for_level(n)]
        return build_chain(spec.m ** n, gens)

    return _cached_chain(spec, n, "pi", store, compute)


def derived_quotient(spec: GroupSpec, n: int,
                     store: QuotientStore | None = None) -> StabilizerChain:
    """Chain of the derived subgroup of the level-n quotient."""
    return _cached_chain(spec, n, "der", store,
                         lambda: derived_subgroup(quotient(spec, n, store)))


# -- shared numeric helpers -------------------------------------------------

def envelope_order(spec: GroupSpec, n: int) -> int:
    """Order of the level-n quotient of the enveloping wreath tower.

    The group on the top m points is H = <top generators>; its depth-n
    tower has |H| independent copies at each of the (m^n - 1)/(m - 1)
    vertices above the leaves.
    """
    if n <= 0:
        return 1
    h = build_chain(spec.m, list(spec.top_generators)).order
    return h ** ((spec.m ** n - 1) // (spec.m - 1))


def _log_ratio(num_order: int, den_order: int) -> tuple[float, Fraction | None]:
    """log(num)/log(den), with an exact value when both orders are powers of
    one base <= 64.  Equal orders (including the degenerate 1/1) give 1."""
    if num_order == den_order:
        return 1.0, Fraction(1)
    if num_order == 1:
        return 0.0, Fraction(0)
    val = big_log(num_order, 2) / big_log(den_order, 2)
    for b in range(2, 65):
        en = exact_power_exponent(num_order, b)
        if en is None:
            continue
        ed = exact_power_exponent(den_order, b)
        if ed:
            return val, Fraction(en, ed)
    return val, None


def _rooted_leaf_perm(top: Permutation, m: int, n: int) -> Permutation:
    """Leaf action at depth n of the vertex permutation applied at the root."""
    w = m ** (n - 1)
    arr = np.asarray(top.images, dtype=np.int64)
    return Permutation(np.repeat(arr * w, w) + np.tile(np.arange(w), m))


def _diag_leaf_perm(q: Permutation, m: int, n: int) -> Permutation:
    """Leaf action at depth n of the element applying q below every child."""
    w = m ** (n - 1)
    if q.degree != w:
        raise ValidationError(
            f"diagonal lift needs degree {w}, got {q.degree}")
    arr = np.asarray(q.images, dtype=np.int64)
    return Permutation(np.repeat(np.arange(m) * w, w) + np.tile(arr, m))


def restrict_generators(generators: list[Permutation],
                        points: list[int]) -> list[Permutation]:
    """Action of the generators on an invariant point set, relabeled to
    0..len(points)-1 in ascending point order."""
    if not generators:
        return []
    degree = generators[0].degree
    pts = np.array(sorted(set(points)), dtype=np.int64)
    if pts.size and (pts[0] < 0 or pts[-1] >= degree):
        raise ValidationError("restriction points outside the domain")
    relabel = np.full(degree, -1, dtype=np.int64)
    relabel[pts] = np.arange(pts.size)
    out = []
    for g in generators:
        img = np.asarray(g.images)[pts]
        if (relabel[img] < 0).any():
            raise ValidationError(
                "point set is not invariant under the generators")
        out.append(Permutation(relabel[img]))
    return out


def _level_map(fn, levels: list[int]) -> list:
    """fn over levels on a small thread pool; results in level order."""
    if len(levels) <= 1:
        return [fn(n) for n in levels]
    with ThreadPoolExecutor(max_workers=min(_POOL_WORKERS, len(levels))) as pool:
        futures = {n: pool.submit(fn, n) for n in levels}
        return [futures[n].result() for n in levels]


# -- dimension sequences ----------------------------------------------------

@dataclass(frozen=True)
class DimensionLevel:
    """One row of a dimension sequence, with exact orders kept alongside."""

    level: int
    order: int
    envelope: int
    logm_index: float
    logm_index_exact: int | None
    logm_wreath: float
    logm_wreath_exact: int | None
    ratio: float
    ratio_exact: Fraction | None


@dataclass(frozen=True)
class DimensionSequence:
    name: str
    m: int
    levels: tuple[DimensionLevel, ...]
    window: int
    tolerance: float
    max_oscillation: float | None
    strong_looking: bool


def dimension_sequence(spec: GroupSpec, N: int,
                       window: int = DEFAULT_WINDOW,
                       tolerance: float = DEFAULT_TOLERANCE,
                       store: QuotientStore | None = None) -> DimensionSequence:
    """Level-by-level density of the group inside its wreath envelope.

    Each row compares log_m of the two congruence-quotient orders; the ratio
    of a group equal to its envelope is 1.  The strong-looking flag is a
    heuristic: the largest step between consecutive ratios over the last
    `window` levels is below `tolerance`.  It never asserts a limit.
    """
    if N < 1:
        raise ValidationError(f"need at least one level, got {N}")
    if window < 2:
        raise ValidationError(f"oscillation window needs >= 2 levels, got {window}")
    m = spec.m
    h_order = build_chain(m, list(spec.top_generators)).order

    def row(n: int) -> DimensionLevel:
        order = quotient(spec, n, store).order
        env = h_order ** ((m ** n - 1) // (m - 1))
        ratio, ratio_exact = _log_ratio(order, env)
        return DimensionLevel(
            level=n,
            order=order,
            envelope=env,
            logm_index=big_log(order, m) if order > 1 else 0.0,
            logm_index_exact=exact_power_exponent(order, m),
            logm_wreath=big_log(env, m) if env > 1 else 0.0,
            logm_wreath_exact=exact_power_exponent(env, m),
            ratio=ratio,
            ratio_exact=ratio_exact,
        )

    rows = _level_map(row, list(range(1, N + 1)))
    tail = [r.ratio for r in rows[-window:]]
    osc = (max(abs(b - a) for a, b in zip(tail, tail[1:]))
           if len(tail) >= 2 else None)
    return DimensionSequence(
        name=spec.name, m=m, levels=tuple(rows), window=window,
        tolerance=tolerance, max_oscillation=osc,
        strong_looking=osc is not None and osc < tolerance)


# -- abelianization ---------------------------------------------------------

@dataclass(frozen=True)
class AbelianizationIndex:
    """|G_n : G_n'| with its base-m log and the base-2 generic bound slack."""

    level: int
    index: int
    logm_index: float
    logm_index_exact: int | None
    log2_slack: float
    easy_bound_ok: bool


def abelianization_index(spec: GroupSpec, n: int,
                         store: QuotientStore | None = None) -> AbelianizationIndex:
    """Index of the derived subgroup in the level-n quotient.

    The easy bound |G:G'| <= 2^(#X - 1) is checked by exact integer
    comparison; the reported slack is (m^n - 1) - log2(index).
    """
    whole = quotient(spec, n, store).order
    der = derived_quotient(spec, n, store).order
    index, rem = divmod(whole, der)
    if rem:
        raise AssertionError("derived subgroup order does not divide the group order")
    points = spec.m ** n
    return AbelianizationIndex(
        level=n,
        index=index,
        logm_index=big_log(index, spec.m) if index > 1 else 0.0,
        logm_index_exact=exact_power_exponent(index, spec.m),
        log2_slack=float(points - 1) - (big_log(index, 2) if index > 1 else 0.0),
        easy_bound_ok=index <= 1 << (points - 1),
    )


# -- orbit statistics -------------------------------------------------------

@dataclass(frozen=True)
class OrbitStats:
    """Level-n orbit classification against the level-(n-k) ancestors.

    An ancestor orbit is fully branching when its leaf extensions split
    into exactly m^k level-n orbits; descendants of fully branching
    ancestors form A_n and the rest is the complement B_n.  Ancestors
    branching strictly between m^k/2 and m^k (possible outside 2-group
    tops) are recorded in `gaps` rather than reclassified.  The bound
    fields evaluate log_m|G_n:G_n'| / m^n <= m^(-k) + #B_n / m^n with the
    comparison done on exact integers.
    """

    level: int
    k: int
    orbit_count: int
    a_count: int
    b_count: int
    predecessor_count: int
    logm_abelian: float
    logm_abelian_exact: int | None
    value: float
    value_exact: Fraction | None
    bound: float
    bound_exact: Fraction
    bound_ok: bool
    counting_ok: bool
    gaps: tuple[tuple[int, int], ...]
    a_orbit_reps: tuple[int, ...]
    b_orbit_reps: tuple[int, ...]
    predecessor_reps: tuple[int, ...]


def orbit_counts(spec: GroupSpec, N: int,
                 leaf_cap: int = MAX_CHAIN_POINTS) -> list[int]:
    """Number of leaf orbits at each level 1..N (no chains are built)."""
    out = []
    for n in range(1, N + 1):
        gens = [evaluate(g, n, leaf_cap=leaf_cap)
                for g in spec.generators_for_level(n)]
        out.append(len(orbits(spec.m ** n, gens)))
    return out


def orbit_stats(spec: GroupSpec, n: int, k: int,
                store: QuotientStore | None = None) -> OrbitStats:
    """Classify level-n orbits by the branching of their level-(n-k) ancestors."""
    if k < 1:
        raise ValidationError(f"branching window must be >= 1, got {k}")
    if n < k:
        raise ValidationError(f"need n >= k, got n={n}, k={k}")
    m = spec.m
    degree = m ** n
    gens_n = [evaluate(g, n) for g in spec.generators_for_level(n)]
    orbs_n = orbits(degree, gens_n)
    if n == k:
        orbs_anc = [[0]]
    else:
        gens_anc = [evaluate(g, n - k) for g in spec.generators_for_level(n - k)]
        orbs_anc = orbits(m ** (n - k), gens_anc)
    anc_id = np.empty(m ** (n - k), dtype=np.int64)
    for oid, orb in enumerate(orbs_anc):
        anc_id[orb] = oid
    full = m ** k
    branching = [0] * len(orbs_anc)
    orbit_anc = []
    for orb in orbs_n:
        oid = int(anc_id[orb[0] // full])
        orbit_anc.append(oid)
        branching[oid] += 1
    full_anc = {oid for oid, cnt in enumerate(branching) if cnt == full}
    a_reps, b_reps = [], []
    for orb, oid in zip(orbs_n, orbit_anc):
        (a_reps if oid in full_anc else b_reps).append(orb[0])
    gaps = tuple((orbs_anc[oid][0], cnt) for oid, cnt in enumerate(branching)
                 if 2 * cnt > full and cnt < full)
    abel = abelianization_index(spec, n, store)
    b_count = len(b_reps)
    bound_exact = Fraction(1, full) + Fraction(b_count, degree)
    return OrbitStats(
        level=n,
        k=k,
        orbit_count=len(orbs_n),
        a_count=len(a_reps),
        b_count=b_count,
        predecessor_count=len(full_anc),
        logm_abelian=abel.logm_index,
        logm_abelian_exact=abel.logm_index_exact,
        value=abel.logm_index / degree,
        value_exact=(Fraction(abel.logm_index_exact, degree)
                     if abel.logm_index_exact is not None else None),
        bound=float(bound_exact),
        bound_exact=bound_exact,
        bound_ok=abel.index <= m ** (m ** (n - k) + b_count),
        counting_ok=len(a_reps) + 2 * b_count <= full * len(orbs_anc),
        gaps=gaps,
        a_orbit_reps=tuple(a_reps),
        b_orbit_reps=tuple(b_reps),
        predecessor_reps=tuple(sorted(orbs_anc[oid][0] for oid in full_anc)),
    )


# -- rigid stabilizers ------------------------------------------------------

@dataclass(frozen=True)
class RigidReport:
    """Exact order data for rigid vertex stabilizers inside a quotient.

    A single-vertex report (from local_rigid) carries that vertex and a
    one-entry order table.  A level report (from rigid_level) sets vertex
    to None, lists every level-k vertex, checks that the group generated
    by all of them has order equal to the product of the local orders
    (disjoint supports), and carries the log-ratio against the whole
    quotient.
    """

    vertex: str | None
    outer_level: int
    inner_level: int
    order: int
    vertex_orders: tuple[tuple[str, int], ...]
    product_ok: bool
    ratio: float | None = None
    ratio_exact: Fraction | None = None


def _local_rigid_chain(spec: GroupSpec, v: Vertex, n: int,
                       store: QuotientStore | None) -> StabilizerChain:
    chain = quotient(spec, n, store)
    blk = leaf_block(v, n)
    outside = list(range(0, blk.start)) + list(range(blk.stop, spec.m ** n))
    return pointwise_stabilizer(chain, outside)


def local_rigid(spec: GroupSpec, v: Vertex | str, n: int,
                store: QuotientStore | None = None) -> RigidReport:
    """Elements of the level-n quotient fixing every leaf outside v's block.

    This is the level-n truncation of the rigid stabilizer at v: anything
    fixing all other leaves fixes the rest of the tree pointwise, so the
    order equals the kernel order of the restriction away from v.
    """
    if isinstance(v, str):
        v = parse_vertex(v, spec.m)
    if v.m != spec.m:
        raise ValidationError(f"vertex arity {v.m} != spec arity {spec.m}")
    if v.level > n:
        raise ValidationError(f"vertex level {v.level} exceeds quotient level {n}")
    sub = _local_rigid_chain(spec, v, n, store)
    return RigidReport(
        vertex=str(v),
        outer_level=v.level,
        inner_level=n,
        order=sub.order,
        vertex_orders=((str(v), sub.order),),
        product_ok=True,
    )


def rigid_level(spec: GroupSpec, k: int, n: int,
                store: QuotientStore | None = None) -> RigidReport:
    """Group generated by all local rigid stabilizers at level k, order-checked
    against the product of the local orders and sized against the quotient."""
    if not 0 <= k <= n:
        raise ValidationError(f"need 0 <= k <= n, got k={k}, n={n}")
    whole = quotient(spec, n, store)
    orders: list[tuple[str, int]] = []
    gens: list[Permutation] = []
    product = 1
    for v in level_vertices(spec.m, k):
        sub = _local_rigid_chain(spec, v, n, store)
        orders.append((str(v), sub.order))
        product *= sub.order
        gens.extend(sub.strong_generators())
    group = build_chain(spec.m ** n, gens)
    ratio, ratio_exact = _log_ratio(group.order, whole.order)
    return RigidReport(
        vertex=None,
        outer_level=k,
        inner_level=n,
        order=group.order,
        vertex_orders=tuple(orders),
        product_ok=group.order == product,
        ratio=ratio,
        ratio_exact=ratio_exact,
    )


# -- construction verifier --------------------------------------------------

@dataclass(frozen=True)
class GKCheck:
    level: int
    name: str
    ok: bool
    witness: str | None = None


@dataclass(frozen=True)
class GKReport:
    name: str
    m: int
    max_level: int
    checks: tuple[GKCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    def failures(self) -> list[GKCheck]:
        return [c for c in self.checks if not c.ok]


def _chain_equals(a: StabilizerChain, b: StabilizerChain) -> str | None:
    """None when both chains carry the same group, else a witness string."""
    if a.order != b.order:
        return f"orders differ: {a.order} vs {b.order}"
    for p in a.strong_generators():
        if not b.membership(p):
            return f"element {p.to_cycles()} missing from the right-hand group"
    for p in b.strong_generators():
        if not a.membership(p):
            return f"element {p.to_cycles()} missing from the left-hand group"
    return None


def verify_GK(h_generators: list[Permutation], k_spec: GroupSpec, N: int,
              store: QuotientStore | None = None,
              name: str | None = None) -> GKReport:
    """Finite-level audit of the rooted-times-diagonal construction.

    For each n = 2..N the level-n quotient is checked for: (a) transitivity
    on every level <= n; (b) the rooted part being normal and commuting with
    the diagonal part; (c) the order product |H| * |K at n-1|; (d) trivial
    local rigid stabilizers at level 1; (e) the center being exactly
    Z(H) x diag(Z(K at n-1)); (f) the first-level stabilizer being exactly
    the diagonal copy of K at n-1, with the rooted part as the complement.
    Each failed check carries a witness.
    """
    spec = build_GK(h_generators, k_spec, name=name)
    m = spec.m
    h_chain = build_chain(m, list(h_generators))
    h_center = center(h_chain)
    checks: list[GKCheck] = []
    for n in range(2, N + 1):
        chain_n = quotient(spec, n, store)
        k_prev = quotient(k_spec, n - 1, store)
        rooted = [_rooted_leaf_perm(g, m, n) for g in h_generators
                  if not g.is_identity()]
        diag = [_diag_leaf_perm(evaluate(g, n - 1), m, n)
                for g in k_spec.generators_for_level(n - 1)]

        trans = level_transitivity(spec, n)
        bad = next((j + 1 for j, t in enumerate(trans) if not t), None)
        checks.append(GKCheck(n, "level_transitivity", bad is None,
                              None if bad is None else f"level {bad} splits"))

        witness = None
        rooted_chain = build_chain(m ** n, rooted)
        for g in chain_n.generators:
            for r in rooted:
                if not rooted_chain.membership(conjugate(r, g)):
                    witness = (f"conjugate of {r.to_cycles()} by "
                               f"{g.to_cycles()} leaves the rooted part")
                    break
            if witness:
                break
        if witness is None:
            for r in rooted:
                for d in diag:
                    if not commutator(r, d).is_identity():
                        witness = (f"{r.to_cycles()} and {d.to_cycles()} "
                                   "do not commute")
                        break
                if witness:
                    break
        checks.append(GKCheck(n, "rooted_normal_commuting", witness is None,
                              witness))

        expected = h_chain.order * k_prev.order
        checks.append(GKCheck(
            n, "order_product", chain_n.order == expected,
            None if chain_n.order == expected else
            f"|quotient| = {chain_n.order}, |H|*|K quotient| = {expected}"))

        witness = None
        for v in level_vertices(m, 1):
            got = local_rigid(spec, v, n, store).order
            if got != 1:
                witness = f"rigid stabilizer at {v} has order {got}"
                break
        checks.append(GKCheck(n, "rigid_trivial", witness is None, witness))

        z_left = center(chain_n)
        rhs_gens = [_rooted_leaf_perm(z, m, n)
                    for z in h_center.strong_generators()]
        rhs_gens += [_diag_leaf_perm(z, m, n)
                     for z in center(k_prev).strong_generators()]
        z_right = build_chain(m ** n, rhs_gens)
        witness = _chain_equals(z_left, z_right)
        checks.append(GKCheck(n, "center_product", witness is None, witness))

        witness = None
        st1 = chain_n.vertex_level_stabilizer(1)
        if st1.order != k_prev.order:
            witness = (f"first-level stabilizer order {st1.order} != "
                       f"|K quotient| {k_prev.order}")
        if witness is None and chain_n.order != h_chain.order * st1.order:
            witness = "rooted complement does not account for the full order"
        if witness is None:
            w = m ** (n - 1)
            offsets = np.repeat(np.arange(m, dtype=np.int64) * w, w)
            for s in st1.strong_generators():
                blocks = (np.asarray(s.images) - offsets).reshape(m, w)
                if (blocks != blocks[0]).any():
                    witness = (f"stabilizer element {s.to_cycles()} is not "
                               "diagonal across the subtrees")
                    break
                if not k_prev.membership(Permutation(blocks[0])):
                    witness = ("stabilizer section "
                               f"{Permutation(blocks[0]).to_cycles()} "
                               "falls outside the K quotient")
                    break
        if witness is None:
            for d in diag:
                if not st1.membership(d):
                    witness = (f"diagonal generator {d.to_cycles()} missing "
                               "from the first-level stabilizer")
                    break
        checks.append(GKCheck(n, "branch_factorization", witness is None,
                              witness))
    return GKReport(name=spec.name, m=m, max_level=N, checks=tuple(checks))


# -- perfectness scan -------------------------------------------------------

@dataclass(frozen=True)
class PerfectnessRow:
    level: int
    index: int
    value: float
    value_exact: Fraction | None
    bound: float
    bound_exact: Fraction
    bound_ok: bool
    b_count: int


@dataclass(frozen=True)
class PerfectnessScan:
    name: str
    m: int
    k: int
    rows: tuple[PerfectnessRow, ...]
    all_bounded: bool
    decreasing_from: int

    @property
    def passed(self) -> bool:
        return self.all_bounded


def perfectness_scan(spec: GroupSpec, N: int, k: int,
                     store: QuotientStore | None = None) -> PerfectnessScan:
    """log_m|G_n:G_n'| / m^n against the orbit bound, for n = k..N.

    `decreasing_from` is the first level of the longest non-increasing tail
    of the value sequence (the level after the last strict increase).
    """
    if not 1 <= k <= N:
        raise ValidationError(f"need 1 <= k <= N, got k={k}, N={N}")

    def row(n: int) -> PerfectnessRow:
        st = orbit_stats(spec, n, k, store)
        return PerfectnessRow(
            level=n, index=_abel_index(spec, n, store), value=st.value,
            value_exact=st.value_exact, bound=st.bound,
            bound_exact=st.bound_exact, bound_ok=st.bound_ok,
            b_count=st.b_count)

    rows = _level_map(row, list(range(k, N + 1)))
    start = rows[0].level
    for prev, cur in zip(rows, rows[1:]):
        a = prev.value_exact if (prev.value_exact is not None
                                 and cur.value_exact is not None) else prev.value
        b = cur.value_exact if (prev.value_exact is not None
                                and cur.value_exact is not None) else cur.value
        if b > a:
            start = cur.level
    return PerfectnessScan(
        name=spec.name, m=spec.m, k=k, rows=tuple(rows),
        all_bounded=all(r.bound_ok for r in rows),
        decreasing_from=start)


def _abel_index(spec: GroupSpec, n: int, store: QuotientStore | None) -> int:
    return abelianization_index(spec, n, store).index


# -- transitivity and index consistency --------------------------------------

def level_transitivity(spec: GroupSpec, n: int) -> tuple[bool, ...]:
    """Whether the spec acts with a single orbit at each level 1..n."""
    if n < 0:
        raise ValidationError(f"level must be nonnegative, got {n}")
    out = []
    for j in range(1, n + 1):
        gens = [evaluate(g, j) for g in spec.generators_for_level(j)]
        out.append(len(orbits(spec.m ** j, gens)) == 1)
    return tuple(out)


def stabilizer_index(spec: GroupSpec, k: int, n: int,
                     store: QuotientStore | None = None) -> tuple[int, int, int]:
    """(|level-n quotient|, |level-k quotient|, |stabilizer of level k|).

    The first order always equals the product of the other two: stabilizing
    the level-k vertices is the kernel of the projection between quotients.
    """
    if not 0 <= k <= n:
        raise ValidationError(f"need 0 <= k <= n, got k={k}, n={n}")
    chain_n = quotient(spec, n, store)
    return (chain_n.order, quotient(spec, k, store).order,
            chain_n.vertex_level_stabilizer(k).order)
