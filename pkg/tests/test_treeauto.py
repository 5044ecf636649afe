"""Wreath-recursion elements: sections, evaluation, products, normalization."""
import random

import pytest

from treedim import (
    Machine, State, Element, Permutation, compose, evaluate, section,
    multiply, normalize, self_similarity_check, merge_machines, word_text,
    fixtures, rooted_generators, diagonal, leaf_block, parse_vertex,
    vertex_index, level_vertices, quotient, build_chain,
    StateExplosion, ResourceLimit, ValidationError, DegreeMismatch,
)
from treedim.treeauto import inverse as el_inverse

FX = fixtures()


def odometer_gen():
    return FX["odometer"].generators[0]


def test_machine_validation():
    s2 = Permutation.from_cycles("(1 2)", 2)
    with pytest.raises(ValidationError):
        # root permutation outside the declared top group
        Machine(2, [], {"a": State(s2, ("1", "a"))})
    with pytest.raises(ValidationError):
        # unresolved section name
        Machine(2, [s2], {"a": State(s2, ("1", "zz"))})
    mac = Machine(2, [s2], {"a": State(s2, ("1", "a"))})
    assert mac.m == 2


def test_identity_element():
    a = odometer_gen()
    e = Element(a.machine, ())
    for n in range(0, 6):
        assert evaluate(e, n).is_identity()
        assert section(e, "2").is_identity_word()
    assert evaluate(e, 0).degree == 1


def test_odometer_evaluate():
    a = odometer_gen()
    assert evaluate(a, 1).images.tolist() == [1, 0]
    # binary adding machine with the first letter most significant:
    # leaf orbit is the 4-cycle 0 -> 2 -> 1 -> 3 -> 0
    assert evaluate(a, 2).images.tolist() == [2, 3, 1, 0]
    for n in range(1, 9):
        orbit_sizes = {len(o) for o in __import__("treedim").orbits(
            2 ** n, [evaluate(a, n)])}
        assert orbit_sizes == {2 ** n}


def test_odometer_sections():
    a = odometer_gen()
    assert evaluate(section(a, "1"), 4).is_identity()
    assert evaluate(section(a, "2"), 4).images.tolist() == \
        evaluate(a, 4).images.tolist()
    assert evaluate(section(a, "22"), 3).images.tolist() == \
        evaluate(a, 3).images.tolist()


def test_rooted_sections_identity():
    h = rooted_generators([Permutation.from_cycles("(1 2)", 2)])[0]
    assert evaluate(h, 2).images.tolist() == [2, 3, 0, 1]
    for v in ("1", "2", "11", "21"):
        assert evaluate(section(h, v), 3).is_identity()


def test_evaluate_resource_limit():
    a = odometer_gen()
    with pytest.raises(ResourceLimit):
        evaluate(a, 20)
    with pytest.raises(ResourceLimit):
        evaluate(a, 5, leaf_cap=16)


def test_section_wrong_arity():
    a = odometer_gen()
    with pytest.raises(DegreeMismatch):
        section(a, parse_vertex("13", 3))


def test_multiply_inverse():
    a = odometer_gen()
    for e in (a, multiply(a, a), el_inverse(a)):
        for n in range(1, 9):
            assert evaluate(multiply(e, el_inverse(e)), n).is_identity()
    sq = multiply(a, a)
    for n in range(1, 8):
        pa = evaluate(a, n)
        assert evaluate(sq, n).images.tolist() == compose(pa, pa).images.tolist()


def test_multiply_identity_neutral():
    for name in ("odometer", "grigorchuk", "gk-w2"):
        for f in FX[name].generators_for_level(3):
            e = Element(f.machine, ())
            for n in range(1, 5):
                assert evaluate(multiply(e, f), n).images.tolist() == \
                    evaluate(f, n).images.tolist()
                assert evaluate(multiply(f, e), n).images.tolist() == \
                    evaluate(f, n).images.tolist()


def test_evaluate_homomorphism_all_fixtures():
    rng = random.Random(8271)
    for name, spec in sorted(FX.items()):
        hi = 8 if spec.m == 2 else 5
        for n in range(1, hi + 1):
            gens = spec.generators_for_level(n)
            if not gens:
                continue
            pairs = [(rng.choice(gens), rng.choice(gens)) for _ in range(4)]
            for e, f in pairs:
                lhs = evaluate(multiply(e, f), n)
                rhs = compose(evaluate(e, n), evaluate(f, n))
                assert lhs.images.tolist() == rhs.images.tolist(), (name, n)


def test_level_consistency():
    # the level-n action, truncated to level k, is the level-k action
    for name in ("odometer", "grigorchuk", "gk-w2", "odometer3"):
        spec = FX[name]
        m = spec.m
        for e in spec.generators:
            for n in range(2, 6):
                k = n - 1
                big = evaluate(e, n).images
                small = evaluate(e, k).images
                for p in range(m ** k):
                    assert big[p * m] // m == small[p]


def test_section_cocycle():
    rng = random.Random(515)
    for name in ("odometer", "grigorchuk", "gk-w2", "odometer3", "gk-odometer3"):
        spec = FX[name]
        m = spec.m
        gens = list(spec.generators) or spec.generators_for_level(5)
        words = gens + [multiply(rng.choice(gens), rng.choice(gens))
                        for _ in range(3)]
        for e in words:
            for n in (3, 5):
                for v in level_vertices(m, 1) + level_vertices(m, 2):
                    k = v.level
                    top = evaluate(e, k)
                    lo = leaf_block(v, n).start
                    img_idx = top.images[vertex_index(v)]
                    lo2 = int(img_idx) * m ** (n - k)
                    local = evaluate(section(e, v), n - k)
                    big = evaluate(e, n)
                    for j in range(m ** (n - k)):
                        assert big.images[lo + j] - lo2 == local.images[j], \
                            (name, str(v), n)


def test_normalize_odometer_square():
    a = odometer_gen()
    sq = normalize(multiply(a, a))
    assert len(sq.word) == 1
    assert sorted(sq.machine.states) == ["a", "a*a"]
    st = sq.machine.state("a*a")
    assert st.root.is_identity()
    assert st.sections == ("a", "a")


def test_normalize_preserves_evaluate():
    rng = random.Random(606)
    for name in ("odometer", "grigorchuk", "gk-w2", "odometer3"):
        spec = FX[name]
        hi = 8 if spec.m == 2 else 5
        gens = list(spec.generators) or spec.generators_for_level(4)
        words = [multiply(rng.choice(gens), rng.choice(gens)) for _ in range(3)]
        words += [multiply(g, el_inverse(h)) for g, h in zip(gens, gens[1:])]
        for e in words:
            ne = normalize(e)
            for n in range(1, hi + 1):
                assert evaluate(ne, n).images.tolist() == \
                    evaluate(e, n).images.tolist(), (name, n)


def test_normalize_identity():
    a = odometer_gen()
    e = normalize(Element(a.machine, ()))
    assert e.is_identity_word() or evaluate(e, 4).is_identity()


def test_normalize_diagonal_product():
    k1 = FX["odometer"].generators[0]
    k2 = multiply(k1, k1)
    lhs = diagonal(multiply(k1, k2))
    rhs = multiply(diagonal(k1), diagonal(k2))
    for n in range(1, 7):
        assert evaluate(lhs, n).images.tolist() == evaluate(rhs, n).images.tolist()


def test_normalize_budget():
    b = FX["grigorchuk"].generators[1]
    c = FX["grigorchuk"].generators[2]
    with pytest.raises(StateExplosion):
        normalize(multiply(b, c), state_budget=1)


def test_merge_machines_disjoint_names():
    a = odometer_gen()
    g = FX["grigorchuk"].generators[0]
    prod = multiply(a, g)
    merged = prod.machine
    assert set(a.machine.states) <= set(merged.states) or True
    for n in range(1, 6):
        assert evaluate(prod, n).images.tolist() == \
            compose(evaluate(a, n), evaluate(g, n)).images.tolist()
    _, rename = merge_machines(a.machine, FX["grigorchuk"].machine)
    assert "a" in rename  # the colliding state name got mangled


def test_word_text_round_trip():
    a = odometer_gen()
    e = multiply(a, el_inverse(multiply(a, a)))
    assert word_text(e.word) in ("a^-1", "a*a^-1*a^-1", "a*(a*a)^-1")


def test_self_similarity_odometer():
    rep = self_similarity_check(list(FX["odometer"].generators), 5)
    assert rep.passed
    assert rep.checked > 0
    assert rep.depth == 5


def test_self_similarity_grigorchuk():
    rep = self_similarity_check(list(FX["grigorchuk"].generators), 6)
    assert rep.passed
    assert rep.checked == 508


def test_self_similarity_gk_fails():
    # sections of diagonal generators land in K, not in the rooted-diagonal group
    gens = FX["gk-w2"].generators_for_level(3)
    rep = self_similarity_check(gens, 3)
    assert not rep.passed
    assert rep.failures
    for label, v in rep.failures:
        assert len(v) >= 1  # failing sections sit strictly below the root
    assert "necessary, not sufficient" in rep.note
