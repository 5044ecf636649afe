"""Shared brute-force oracles for the test suite.

Everything here enumerates group elements directly, independent of the
stabilizer-chain engine, so engine results can be checked against plain
closure counting on small degrees.
"""
import random

import pytest

from treedim import Permutation


def brute_closure(degree, gens):
    """All elements of <gens> as image tuples, by breadth-first closure."""
    idt = tuple(range(degree))
    gens_t = [tuple(g.images) for g in gens]
    seen = {idt}
    frontier = [idt]
    while frontier:
        nxt = []
        for x in frontier:
            for g in gens_t:
                y = tuple(g[p] for p in x)
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
        if len(seen) > 200000:
            raise RuntimeError("brute closure exceeded 200000 elements")
    return seen


def brute_center(degree, gens):
    """Center of <gens> as a set of image tuples."""
    elems = brute_closure(degree, gens)
    gens_t = [tuple(g.images) for g in gens]
    out = set()
    for x in elems:
        if all(tuple(g[p] for p in x) == tuple(x[p] for p in g)
               for g in gens_t):
            out.add(x)
    return out


def brute_derived(degree, gens):
    """Derived subgroup of <gens> as a set of image tuples.

    Commutators of all element pairs already generate a normal subgroup,
    so a plain closure over them is the derived subgroup.
    """
    elems = list(brute_closure(degree, gens))
    comms = set()
    for a in elems:
        inv_a = [0] * degree
        for i, p in enumerate(a):
            inv_a[p] = i
        for b in elems:
            inv_b = [0] * degree
            for i, p in enumerate(b):
                inv_b[p] = i
            comms.add(tuple(b[a[inv_b[inv_a[i]]]] for i in range(degree)))
    return brute_closure(degree, [Permutation(list(c)) for c in comms])


def random_permutation(rng, degree):
    img = list(range(degree))
    rng.shuffle(img)
    return Permutation(img)


@pytest.fixture
def rng():
    return random.Random(971203)
