"""Builders: rooted groups, diagonals, rooted-over-diagonal combinations,
full wreath towers, and the bundled fixture corpus."""
import pytest

from treedim import (
    Construction, GroupSpec, Machine, Permutation, State,
    build_GK, combine_elements, diagonal, diagonal_spec, evaluate, fixtures,
    multiply, quotient, rooted_generators, section, wreath_full_generators,
    NotTransitive, ResourceLimit, ValidationError,
)
from conftest import brute_closure

FX = fixtures()
S2 = Permutation.from_cycles("(1 2)", 2)
C3 = Permutation.from_cycles("(1 2 3)", 3)
T3 = Permutation.from_cycles("(1 2)", 3)


def test_rooted_generators_drop_identities():
    assert rooted_generators([Permutation.identity(2)]) == []
    assert rooted_generators([]) == []


def test_rooted_generator_action():
    (h,) = rooted_generators([S2])
    # swaps the two level-1 subtrees wholesale
    assert evaluate(h, 1).images.tolist() == [1, 0]
    assert evaluate(h, 2).images.tolist() == [2, 3, 0, 1]
    assert evaluate(section(h, "1"), 3).is_identity()
    assert evaluate(section(h, "2"), 3).is_identity()


def test_rooted_order_constant_in_depth():
    gens = rooted_generators([T3, C3])
    assert len(gens) == 2
    for n in (1, 2, 3):
        perms = [evaluate(g, n) for g in gens]
        assert len(brute_closure(3 ** n, perms)) == 6


def test_diagonal_of_identity():
    a = FX["odometer"].generators[0]
    d = diagonal(multiply(a, a.inverse()))
    assert d.is_identity_word()


def test_diagonal_action():
    (h,) = rooted_generators([S2])
    d = diagonal(h)
    # the swap happens inside each subtree, not across them
    assert evaluate(d, 2).images.tolist() == [1, 0, 3, 2]
    a = FX["odometer"].generators[0]
    da = diagonal(a)
    assert evaluate(da, 3).images.tolist() == [2, 3, 1, 0, 6, 7, 5, 4]


def test_diagonal_sections_are_the_element():
    a = FX["odometer"].generators[0]
    da = diagonal(a)
    assert evaluate(da, 1).is_identity()
    for i in ("1", "2"):
        assert evaluate(section(da, i), 4).images.tolist() == \
            evaluate(a, 4).images.tolist()


def test_diagonal_multiplicative():
    g = FX["grigorchuk"].generators
    for x, y in [(g[0], g[1]), (g[1], g[2]), (g[3], g[0])]:
        lhs = diagonal(multiply(x, y))
        rhs = multiply(diagonal(x), diagonal(y))
        assert evaluate(lhs, 4).images.tolist() == \
            evaluate(rhs, 4).images.tolist()


def test_combine_elements_empty():
    assert combine_elements([]) == (None, ())


def test_combine_elements_rebases_across_machines():
    a = FX["odometer"].generators[0]
    b = FX["grigorchuk"].generators[1]
    mac, (ra, rb) = combine_elements([a, b])
    assert ra.machine is mac and rb.machine is mac
    assert evaluate(ra, 4).images.tolist() == evaluate(a, 4).images.tolist()
    assert evaluate(rb, 4).images.tolist() == evaluate(b, 4).images.tolist()


def test_build_gk_requires_transitive_top():
    with pytest.raises(NotTransitive):
        build_GK([], FX["trivial"])
    with pytest.raises(NotTransitive):
        build_GK([T3], FX["odometer3"])


def test_build_gk_degree_mismatch():
    with pytest.raises(ValidationError):
        build_GK([S2], FX["odometer3"])


def test_build_gk_names():
    assert build_GK([S2], FX["odometer"]).name == "gk-odometer"
    assert build_GK([S2], FX["odometer"], name="x").name == "x"


def test_gk_trivial_orders():
    # with a trivial inner group only the rooted copy of H remains
    spec = FX["gk-trivial"]
    for n in range(1, 6):
        assert quotient(spec, n).order == 2


def test_gk_w2_orders():
    spec = FX["gk-w2"]
    want = [2, 4, 16, 256, 65536]
    assert [quotient(spec, n).order for n in range(1, 6)] == want


def test_gk_order_law():
    for gname, kname, h in [("gk-odometer", "odometer", 2),
                            ("gk-grigorchuk", "grigorchuk", 2),
                            ("gk-odometer3", "odometer3", 3)]:
        for n in range(2, 6):
            assert quotient(FX[gname], n).order == \
                h * quotient(FX[kname], n - 1).order


def test_gk_rooted_commutes_with_diagonals():
    for name in ("gk-grigorchuk", "gk-odometer3"):
        spec = FX[name]
        h = spec.generators[0]
        for d in spec.generators[1:]:
            comm = multiply(multiply(h, d), multiply(h.inverse(), d.inverse()))
            assert evaluate(comm, 4).is_identity()


def test_diagonal_spec_orders():
    spec = diagonal_spec(FX["odometer"])
    assert spec.name == "diag-odometer"
    assert not spec.level_dependent
    assert [quotient(spec, n).order for n in range(1, 5)] == [1, 2, 4, 8]


def test_diagonal_spec_level_dependent():
    spec = diagonal_spec(FX["w2"])
    assert spec.level_dependent
    assert quotient(spec, 3).order == 8
    assert len(spec.generators_for_level(3)) == 3


def test_wreath_full_generator_layout():
    gens = wreath_full_generators([S2], 3)
    assert len(gens) == 7
    assert wreath_full_generators([S2], 0) == []
    assert wreath_full_generators([Permutation.identity(2)], 5) == []


def test_wreath_full_orders():
    assert quotient(FX["w2"], 1).order == 2
    assert quotient(FX["w3c"], 1).order == 3
    assert quotient(FX["w3s"], 1).order == 6
    assert quotient(FX["w2"], 2).order == 8
    assert quotient(FX["w3c"], 2).order == 81
    assert quotient(FX["w3s"], 2).order == 1296


def test_wreath_full_level_cap():
    with pytest.raises(ResourceLimit):
        wreath_full_generators([S2], 15)


def test_fixture_names():
    assert sorted(FX) == [
        "cyclic", "gk-grigorchuk", "gk-odometer", "gk-odometer3",
        "gk-trivial", "gk-w2", "gk-w3c", "gk-w3s", "grigorchuk",
        "intransitive", "odometer", "odometer3", "trivial",
        "w2", "w3c", "w3s",
    ]
    for name, spec in FX.items():
        assert spec.name == name


def test_fixture_shapes():
    assert len(FX["odometer"].generators) == 1
    assert len(FX["grigorchuk"].generators) == 4
    assert quotient(FX["grigorchuk"], 2).order == 8
    assert FX["trivial"].construction.kind == "plain"
    assert FX["cyclic"].construction.kind == "rooted"
    assert FX["intransitive"].construction.kind == "rooted"
    for name in ("w2", "w3c", "w3s"):
        assert FX[name].level_dependent
        assert FX[name].generators == ()
    for name in ("gk-trivial", "gk-odometer", "gk-grigorchuk"):
        assert FX[name].construction.kind == "GK"
        assert not FX[name].level_dependent
    for name in ("gk-w2", "gk-w3c", "gk-w3s"):
        assert FX[name].level_dependent


def test_fixture_content_keys_stable():
    again = fixtures()
    for name, spec in FX.items():
        assert again[name].content_key() == spec.content_key()


def test_content_key_ignores_display_name():
    od = FX["odometer"]
    renamed = GroupSpec("other", od.m, od.top_generators, od.machine,
                        od.generators, od.construction)
    assert renamed.content_key() == od.content_key()
    assert renamed.content_key() != FX["odometer3"].content_key()


def test_groupspec_validation():
    od = FX["odometer"]
    grig = FX["grigorchuk"]
    with pytest.raises(ValidationError):
        # generator living on a foreign machine
        GroupSpec("x", 2, od.top_generators, od.machine,
                  grig.generators[:1], Construction("plain"))
    with pytest.raises(ValidationError):
        # rooted spec whose generator recurses below the root
        GroupSpec("x", 2, od.top_generators, od.machine, od.generators,
                  Construction("rooted", h_generators=(S2,)))
    with pytest.raises(ValidationError):
        Construction("mystery")
    with pytest.raises(NotTransitive):
        GroupSpec("x", 3, (T3,), None, (),
                  Construction("GK", h_generators=(T3,), inner=FX["trivial"]))
    with pytest.raises(ValidationError):
        GroupSpec("x", 3, (S2,), None, (), Construction("plain"))


def test_generators_for_level_validation():
    with pytest.raises(ValidationError):
        FX["w2"].generators_for_level(-1)
    assert FX["w2"].generators_for_level(0) == []
    assert len(FX["w2"].generators_for_level(4)) == 15


def test_odometer3_orders():
    a = FX["odometer3"].generators[0]
    assert len(brute_closure(9, [evaluate(a, 2)])) == 9
    for n in range(1, 5):
        assert quotient(FX["odometer3"], n).order == 3 ** n
