"""Level-quotient reports: dimensions, abelianizations, orbit splits,
rigid stabilizers, and the rooted-over-diagonal verifier."""
from fractions import Fraction

import pytest

from treedim import (
    Permutation, build_chain, center, derived_subgroup, orbits,
    quotient, derived_quotient, envelope_order, clear_quotient_cache,
    dimension_sequence, abelianization_index, orbit_counts, orbit_stats,
    perfectness_scan, local_rigid, rigid_level, verify_GK,
    level_transitivity, stabilizer_index, restrict_generators,
    evaluate, fixtures, parse_vertex,
    ValidationError,
)
from conftest import brute_closure, brute_center, brute_derived

FX = fixtures()
C3 = Permutation.from_cycles("(1 2 3)", 3)


def level_perms(spec, n):
    return [evaluate(g, n) for g in spec.generators_for_level(n)]


# -- quotients ---------------------------------------------------------------

def test_quotient_orders():
    for n in range(0, 5):
        assert quotient(FX["trivial"], n).order == 1
    assert quotient(FX["odometer"], 4).order == 16
    assert quotient(FX["grigorchuk"], 3).order == 128


def test_quotient_matches_brute_closure():
    assert quotient(FX["grigorchuk"], 2).order == \
        len(brute_closure(4, level_perms(FX["grigorchuk"], 2)))
    assert quotient(FX["odometer"], 3).order == \
        len(brute_closure(8, level_perms(FX["odometer"], 3)))
    assert quotient(FX["w3s"], 1).order == \
        len(brute_closure(3, level_perms(FX["w3s"], 1)))


def test_derived_quotient():
    # the level-3 odometer quotient is cyclic, so its derived group dies
    assert derived_quotient(FX["odometer"], 3).order == 1
    got = derived_quotient(FX["grigorchuk"], 2).order
    assert got == len(brute_derived(4, level_perms(FX["grigorchuk"], 2)))
    assert got == 2


def test_envelope_order():
    assert envelope_order(FX["odometer"], 3) == 128
    assert envelope_order(FX["w3c"], 2) == 81
    assert envelope_order(FX["w3s"], 2) == 1296
    assert envelope_order(FX["odometer"], 0) == 1


def test_quotient_cache_soundness():
    before = quotient(FX["grigorchuk"], 4).order
    clear_quotient_cache()
    assert quotient(FX["grigorchuk"], 4).order == before


# -- dimension sequences ------------------------------------------------------

def test_dimension_wreath_is_its_own_envelope():
    for name, N in [("w2", 4), ("w3c", 3), ("w3s", 2)]:
        ds = dimension_sequence(FX[name], N)
        assert [r.ratio for r in ds.levels] == [1.0] * N
        assert all(r.ratio_exact == 1 for r in ds.levels)
        assert all(r.order == r.envelope for r in ds.levels)


def test_dimension_odometer():
    ds = dimension_sequence(FX["odometer"], 8)
    for r in ds.levels:
        n = r.level
        assert r.order == 2 ** n
        assert r.logm_index_exact == n
        assert r.logm_wreath_exact == 2 ** n - 1
        assert r.ratio_exact == Fraction(n, 2 ** n - 1)
        assert r.ratio == pytest.approx(n / (2 ** n - 1))


def test_dimension_gk_w2():
    ds = dimension_sequence(FX["gk-w2"], 8)
    want = ["1", "2/3", "4/7", "8/15", "16/31", "32/63", "64/127", "128/255"]
    assert [str(r.ratio_exact) for r in ds.levels] == want


def test_dimension_oscillation():
    ds = dimension_sequence(FX["odometer"], 10)
    ratios = [Fraction(n, 2 ** n - 1) for n in range(1, 11)]
    tail = [float(x) for x in ratios[-3:]]
    want = max(abs(b - a) for a, b in zip(tail, tail[1:]))
    assert ds.max_oscillation == pytest.approx(want)
    assert ds.window == 3
    assert ds.strong_looking == (ds.max_oscillation < ds.tolerance)


def test_dimension_validation():
    with pytest.raises(ValidationError):
        dimension_sequence(FX["odometer"], 0)
    with pytest.raises(ValidationError):
        dimension_sequence(FX["odometer"], 4, window=1)


def test_dimension_determinism():
    a = dimension_sequence(FX["grigorchuk"], 5)
    b = dimension_sequence(FX["grigorchuk"], 5)
    assert a.levels == b.levels
    assert a.max_oscillation == b.max_oscillation


# -- abelianization -----------------------------------------------------------

def test_abelianization_trivial():
    row = abelianization_index(FX["trivial"], 3)
    assert row.index == 1
    assert row.logm_index == 0.0
    assert row.logm_index_exact == 0
    assert row.log2_slack == 7.0
    assert row.easy_bound_ok


def test_abelianization_odometer():
    # the whole quotient is abelian, so the index equals the order
    for n in range(1, 7):
        row = abelianization_index(FX["odometer"], n)
        assert row.index == 2 ** n
        assert row.logm_index_exact == n


def test_abelianization_w2():
    row = abelianization_index(FX["w2"], 3)
    assert row.index == 8
    assert row.logm_index_exact == 3


def test_abelianization_irrational_log():
    row = abelianization_index(FX["intransitive"], 2)
    assert row.index == 2
    assert row.logm_index_exact is None
    assert row.logm_index == pytest.approx(0.6309297535714573)
    assert row.log2_slack == 7.0
    assert row.easy_bound_ok


def test_abelianization_matches_brute():
    perms = level_perms(FX["grigorchuk"], 2)
    whole = len(brute_closure(4, perms))
    der = len(brute_derived(4, perms))
    row = abelianization_index(FX["grigorchuk"], 2)
    assert row.index == whole // der == 4


# -- orbit statistics ---------------------------------------------------------

def test_orbit_stats_trivial():
    st = orbit_stats(FX["trivial"], 3, 2)
    assert st.orbit_count == 8
    assert st.a_count == 8
    assert st.b_count == 0
    assert st.predecessor_count == 2
    assert st.counting_ok and st.bound_ok
    assert st.gaps == ()
    assert st.value == 0.0
    assert st.value_exact == 0


def test_orbit_stats_odometer():
    for n in range(1, 6):
        st = orbit_stats(FX["odometer"], n, 1)
        assert (st.orbit_count, st.a_count, st.b_count) == (1, 0, 1)
        assert st.bound_exact == Fraction(1, 2) + Fraction(1, 2 ** n)
        assert st.bound_ok and st.counting_ok
        assert st.gaps == ()


def test_orbit_stats_intransitive_gaps():
    # a lone ancestor branching strictly between m^k/2 and m^k breaks the
    # counting inequality and is reported as a gap witness
    for n, k, gap in [(1, 1, (0, 2)), (2, 2, (0, 6)), (3, 3, (0, 18))]:
        st = orbit_stats(FX["intransitive"], n, k)
        assert not st.counting_ok
        assert st.gaps == (gap,)
        assert st.a_count == 0
    st = orbit_stats(FX["intransitive"], 2, 1)
    assert (st.a_count, st.b_count) == (6, 0)
    assert st.counting_ok
    assert st.gaps == ()


def test_orbit_stats_grig():
    st = orbit_stats(FX["grigorchuk"], 6, 2)
    assert st.orbit_count == 1
    assert st.value_exact == Fraction(3, 64)
    assert st.bound_exact == Fraction(17, 64)
    assert st.bound_ok


def test_orbit_stats_reps_consistent():
    st = orbit_stats(FX["intransitive"], 2, 1)
    assert len(st.a_orbit_reps) == st.a_count
    assert len(st.b_orbit_reps) == st.b_count
    assert len(st.predecessor_reps) == st.predecessor_count


def test_orbit_stats_validation():
    with pytest.raises(ValidationError):
        orbit_stats(FX["odometer"], 3, 0)
    with pytest.raises(ValidationError):
        orbit_stats(FX["odometer"], 2, 3)


def test_orbit_stats_bound_fails_at_small_levels():
    # the per-level bound 1/m^k + #B_n/m^n genuinely fails for k = 3 just
    # above the root: a transitive group keeps one big B orbit while the
    # abelianization still has full rank there
    st = orbit_stats(FX["w2"], 3, 3)
    assert not st.bound_ok
    assert st.value_exact == Fraction(3, 8)
    assert st.bound_exact == Fraction(1, 4)
    st = orbit_stats(FX["w2"], 4, 3)
    assert not st.bound_ok
    st = orbit_stats(FX["w2"], 5, 3)
    assert st.bound_ok
    assert st.value_exact == st.bound_exact == Fraction(5, 32)
    st = orbit_stats(FX["grigorchuk"], 3, 3)
    assert not st.bound_ok
    st = orbit_stats(FX["grigorchuk"], 4, 3)
    assert st.bound_ok
    assert st.value_exact == st.bound_exact == Fraction(3, 16)


# -- perfectness scan ----------------------------------------------------------

def test_perfectness_w2_k1():
    sc = perfectness_scan(FX["w2"], 8, 1)
    assert [r.value_exact for r in sc.rows] == \
        [Fraction(n, 2 ** n) for n in range(1, 9)]
    assert sc.all_bounded and sc.passed
    assert sc.decreasing_from == 1


def test_perfectness_grig_k2():
    sc = perfectness_scan(FX["grigorchuk"], 7, 2)
    want = ["1/2", "3/8", "3/16", "3/32", "3/64", "3/128"]
    assert [str(r.value_exact) for r in sc.rows] == want
    assert sc.all_bounded


def test_perfectness_odometer():
    sc = perfectness_scan(FX["odometer"], 8, 1)
    assert [r.value_exact for r in sc.rows] == \
        [Fraction(n, 2 ** n) for n in range(1, 9)]
    assert sc.all_bounded


def test_perfectness_trivial():
    sc = perfectness_scan(FX["trivial"], 6, 1)
    assert all(r.value_exact == 0 for r in sc.rows)
    assert all(r.index == 1 for r in sc.rows)
    assert sc.all_bounded


def test_perfectness_k3_small_levels():
    sc = perfectness_scan(FX["w2"], 6, 3)
    assert not sc.all_bounded and not sc.passed
    assert [r.level for r in sc.rows if not r.bound_ok] == [3, 4]
    assert sc.decreasing_from == 3
    sc = perfectness_scan(FX["grigorchuk"], 6, 3)
    assert [r.level for r in sc.rows if not r.bound_ok] == [3]


def test_perfectness_validation():
    with pytest.raises(ValidationError):
        perfectness_scan(FX["w2"], 6, 0)
    with pytest.raises(ValidationError):
        perfectness_scan(FX["w2"], 3, 4)


# -- rigid stabilizers ----------------------------------------------------------

def test_local_rigid_trivial_group():
    for v in ("1", "11"):
        assert local_rigid(FX["trivial"], v, 3).order == 1


def test_local_rigid_w2():
    # fixing everything outside one subtree leaves the full sibling tower
    for n in range(2, 6):
        rep = local_rigid(FX["w2"], "1", n)
        assert rep.order == 2 ** (2 ** (n - 1) - 1)
        assert rep.vertex == "1"
        assert rep.outer_level == 1
        assert rep.inner_level == n
        assert rep.vertex_orders == (("1", rep.order),)


def test_local_rigid_gk_trivial_at_level_one():
    for name in ("gk-w2", "gk-grigorchuk"):
        for n in range(2, 6):
            for v in ("1", "2"):
                assert local_rigid(FX[name], v, n).order == 1


def test_local_rigid_validation():
    with pytest.raises(ValidationError):
        local_rigid(FX["w2"], "111", 2)
    with pytest.raises(ValidationError):
        local_rigid(FX["w2"], parse_vertex("1", 3), 3)


def test_rigid_level_w2():
    rep = rigid_level(FX["w2"], 1, 3)
    assert rep.order == 64
    assert rep.vertex_orders == (("1", 8), ("2", 8))
    assert rep.product_ok
    assert rep.ratio_exact == Fraction(6, 7)


def test_rigid_level_root():
    rep = rigid_level(FX["odometer"], 0, 3)
    assert rep.order == quotient(FX["odometer"], 3).order
    assert rep.ratio == 1.0
    assert rep.product_ok


def test_rigid_level_gk_zero():
    rep = rigid_level(FX["gk-w2"], 1, 4)
    assert rep.order == 1
    assert rep.ratio == 0.0
    assert rep.ratio_exact == 0
    assert rep.product_ok


def test_rigid_level_product_all_fixtures():
    for name, spec in FX.items():
        n = 3 if spec.m == 2 else 2
        assert rigid_level(spec, 1, n).product_ok, name


def test_rigid_level_validation():
    with pytest.raises(ValidationError):
        rigid_level(FX["w2"], 4, 3)


# -- transitivity and index consistency -----------------------------------------

def test_level_transitivity():
    assert level_transitivity(FX["cyclic"], 3) == (True, False, False)
    assert level_transitivity(FX["trivial"], 3) == (False, False, False)
    assert level_transitivity(FX["odometer"], 6) == (True,) * 6
    assert level_transitivity(FX["w2"], 5) == (True,) * 5
    assert level_transitivity(FX["intransitive"], 2) == (False, False)


def test_stabilizer_index_consistency():
    m2 = ["trivial", "cyclic", "odometer", "grigorchuk", "w2",
          "gk-w2", "gk-grigorchuk"]
    for name in m2:
        for k, n in [(1, 3), (2, 4), (1, 5)]:
            whole, lower, stab = stabilizer_index(FX[name], k, n)
            assert whole == lower * stab, (name, k, n)
    for name in ["odometer3", "intransitive", "w3c"]:
        for k, n in [(1, 3), (2, 3)]:
            whole, lower, stab = stabilizer_index(FX[name], k, n)
            assert whole == lower * stab, (name, k, n)


def test_restrict_generators():
    assert restrict_generators([], [0, 1]) == []
    (h,) = level_perms(FX["cyclic"], 2)
    (r,) = restrict_generators([h], [0, 2])
    assert r.images.tolist() == [1, 0]
    with pytest.raises(ValidationError):
        restrict_generators([h], [0, 1])
    with pytest.raises(ValidationError):
        restrict_generators([h], [0, 9])


def test_invariant_decomposition():
    # the abelianization index is at most the product over the orbit
    # restrictions of their abelianization indices
    for name, n in [("intransitive", 2), ("cyclic", 2), ("grigorchuk", 2)]:
        perms = level_perms(FX[name], n)
        degree = FX[name].m ** n
        whole = abelianization_index(FX[name], n).index
        prod = 1
        for orb in orbits(degree, perms):
            sub = restrict_generators(perms, orb)
            ch = build_chain(len(orb), sub)
            prod *= ch.order // derived_subgroup(ch).order
        assert whole <= prod, name


def test_a_orbit_identification():
    # over a fully branching ancestor, the level-n action restricted to its
    # orbits is the ancestor action read through a bijection, so both sides
    # have the same abelianization index
    cases = [("cyclic", 2, 1), ("cyclic", 3, 1), ("intransitive", 2, 1),
             ("intransitive", 3, 2), ("gk-trivial", 3, 1)]
    for name, n, k in cases:
        spec = FX[name]
        st = orbit_stats(spec, n, k)
        if st.a_count == 0:
            continue
        m = spec.m
        gens_n = level_perms(spec, n)
        gens_anc = level_perms(spec, n - k)
        a_reps = set(st.a_orbit_reps)
        up = sorted(p for orb in orbits(m ** n, gens_n)
                    if orb[0] in a_reps for p in orb)
        pred_reps = set(st.predecessor_reps)
        down = sorted(p for orb in orbits(m ** (n - k), gens_anc)
                      if orb[0] in pred_reps for p in orb)
        assert len(up) == m ** k * len(down), name

        def abel(perms, pts):
            sub = restrict_generators(perms, pts)
            ch = build_chain(len(pts), sub)
            return ch.order // derived_subgroup(ch).order

        assert abel(gens_n, up) == abel(gens_anc, down), name


def test_orbit_counts_monotone_density():
    for name, spec in FX.items():
        N = 6 if spec.m == 2 else 4
        counts = orbit_counts(spec, N)
        dens = [Fraction(c, spec.m ** (i + 1)) for i, c in enumerate(counts)]
        assert all(a >= b for a, b in zip(dens, dens[1:])), name
        assert all(a <= b for a, b in zip(counts, counts[1:])), name


def test_orbit_counts_match_stats():
    counts = orbit_counts(FX["intransitive"], 3)
    assert counts == [2, 6, 18]
    assert counts[1] == orbit_stats(FX["intransitive"], 2, 1).orbit_count


# -- construction verifier -------------------------------------------------------

def test_verify_gk_trivial_k():
    s2 = Permutation.from_cycles("(1 2)", 2)
    rep = verify_GK([s2], FX["trivial"], 4)
    assert not rep.passed
    bad = rep.failures()
    assert [(c.level, c.name) for c in bad] == \
        [(n, "level_transitivity") for n in (2, 3, 4)]
    assert all(c.witness == "level 2 splits" for c in bad)


def test_verify_gk_w2():
    s2 = Permutation.from_cycles("(1 2)", 2)
    rep = verify_GK([s2], FX["w2"], 4)
    assert rep.passed
    assert len(rep.checks) == 18
    assert {c.name for c in rep.checks} == {
        "level_transitivity", "rooted_normal_commuting", "order_product",
        "rigid_trivial", "center_product", "branch_factorization"}
    assert rep.name == "gk-w2"
    assert rep.max_level == 4


def test_verify_gk_odometer3():
    rep = verify_GK([C3], FX["odometer3"], 4)
    assert rep.passed
    # both factors are abelian and commute, so the center is everything
    perms = level_perms(FX["gk-odometer3"], 2)
    assert len(brute_center(9, perms)) == 9


def test_gk_w2_center():
    ch = quotient(FX["gk-w2"], 2)
    z = center(ch)
    assert z.order == 4
    assert z.membership(Permutation([2, 3, 0, 1]))


def test_verify_gk_determinism():
    s2 = Permutation.from_cycles("(1 2)", 2)
    a = verify_GK([s2], FX["odometer"], 3)
    b = verify_GK([s2], FX["odometer"], 3)
    assert a.checks == b.checks
    assert a.passed and b.passed
