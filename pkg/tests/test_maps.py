import numpy as np
import pytest
from hypothesis import given, strategies as st

from coarsehom.core import CapExceeded
from coarsehom.maps import (FAIL, PASS, CoarseMap, NonTotalMap, are_close, check_action, check_controlled,
                            check_map_properties, check_proper, discretize, separation_ok, verify_equivalence)
from coarsehom.spaces import cyclic_rotation, cycle, lattice, reflection, twisted_shift

DEEP = tuple(range(7))


def test_identity_is_coarse():
    X = lattice(5)
    assert check_map_properties(CoarseMap.identity(X)).coarse


def test_shift_is_coarse():
    X = lattice(5)
    g = CoarseMap.from_rule(X, lattice(6), lambda x: x + 1, "shift")
    rep = check_map_properties(g)
    assert rep.coarse
    assert rep["controlled"].witness == {0: 0, 1: 1, 2: 2, 3: 3}


def test_doubling_needs_twice_the_level():
    f = CoarseMap.from_rule(lattice(8, DEEP), lattice(16, DEEP), lambda x: 2 * x, "double")
    v = check_controlled(f)
    for n in range(4):
        assert v.witness[n] == 2 * n
    # levels beyond half the depth have no witness: reported as unknown, not as failure
    assert v.status != FAIL


def test_constant_map_is_not_proper():
    X = lattice(5)
    c = CoarseMap.from_rule(X, X, lambda x: 0, "const")
    v = check_proper(c)
    assert v.status == FAIL


def test_reflection_not_close_to_identity():
    X = lattice(5)
    neg = CoarseMap.from_rule(X, X, lambda x: -x)
    assert not are_close(neg, CoarseMap.identity(X)).close


def test_shift_close_to_identity():
    X = lattice(5)
    s = CoarseMap.from_rule(X, lattice(6), lambda x: x + 1)
    i = CoarseMap.from_rule(X, lattice(6), lambda x: x)
    r = are_close(s, i)
    assert r.close and r.level == 1


def test_even_lattice_equivalent_to_lattice():
    E = lattice(10, DEEP, spacing=2)
    Z = lattice(10, DEEP)
    inc = CoarseMap.from_rule(E, Z, lambda x: x, "inc", 0)
    rnd = CoarseMap.from_rule(Z, E, lambda x: x - (1 if x > 0 else -1) * (x % 2), "round", 0)
    assert verify_equivalence(inc, rnd).ok


def test_non_total_map():
    X = lattice(2)
    with pytest.raises(NonTotalMap):
        CoarseMap(X, X, (0,))


def test_actions():
    W = lattice(6, (0, 1, 2, 3))
    rep = check_action(reflection(), W)
    assert all(v.status == PASS for v in rep.verdicts.values())
    assert check_action(cyclic_rotation(4, n=8), cycle(n=8))["proper"].ok
    # the twisted shift distorts distances without bound
    tw = check_action(twisted_shift(), lattice(6, (0, 1, 2, 3), dim=2))
    assert tw["isocoarse"].status == FAIL


@given(st.integers(0, 3), st.integers(0, 10**6))
def test_discretization_is_separated_and_dense(sep, seed):
    X = lattice(8, (0, 1, 2, 3, 4, 5, 6, 7))
    d = discretize(X, sep, seed=seed)
    assert separation_ok(d)
    # every point projects (into the subspace table) to a selected point at bounded level
    L = X.chain.level_matrix
    target = [d.points[j] for j in d.projection.assignment]
    assert all(L[x, t] <= sep for x, t in enumerate(target))
    assert set(target) == set(d.points)
    assert [d.subspace.labels[j] for j in d.projection.assignment] == [X.labels[t] for t in target]
    assert d.density_level is not None and d.density_level <= sep


def test_equivariant_discretization_is_invariant():
    X = lattice(6, (0, 1, 2, 3))
    act = reflection()
    d = discretize(X, 2, act)
    labels = {X.labels[p] for p in d.points}
    assert labels == {-x for x in labels}
    on = act.on(X)
    assert separation_ok(d, on)


def test_map_matrix_relation():
    X = lattice(3)
    f = CoarseMap.from_rule(X, X, lambda x: min(x + 1, 3))
    M = f.image_relation(X.level(1).matrix)
    assert M[f.assignment[0], f.assignment[1]]
    assert np.array_equal(f.array, np.array(f.assignment))
