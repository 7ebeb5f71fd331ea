import numpy as np
import pytest
from hypothesis import given, strategies as st

from coarsehom.chains import CoarseChain, assemble, boundary, chain_map_matrix, prism_chain, prism_matrix
from coarsehom.core import is_bounded
from coarsehom.homotopy import (FlasqueData, IntervalGrid, NeighborhoodFamily, Profile, build_cylinder,
                                build_homotopy_domains, check_bounded_law, derive_schedule, end_map, flasque_check,
                                homotopy_map, lift_classical, validate_homotopy)
from coarsehom.linalg import QQ, ZZ, Ring
from coarsehom.maps import FAIL, PASS, CoarseMap, check_map_properties
from coarsehom.spaces import custom, flasque_cylinder, lattice, ray


def path(n, depth=None):
    D = np.abs(np.subtract.outer(range(n), range(n)))
    return custom(list(range(n)), D, scales=tuple(range((depth or n - 1) + 1)))


FAMILIES = {
    "full": NeighborhoodFamily.full,
    "adjacent": NeighborhoodFamily.adjacent,
    "band": lambda g: NeighborhoodFamily.bandwidth(g, lambda x: 1 + x % 2),
}


@given(st.sampled_from(sorted(FAMILIES)), st.lists(st.integers(0, 5), min_size=16, max_size=16),
       st.sampled_from([ZZ, QQ, Ring("Zp", 3)]))
def test_chain_prism_identity(fam, table, ring):
    """d P + P d = g_* - f_* for an arbitrary assignment on the cylinder."""
    X, Y = path(4), path(6)
    g = IntervalGrid.uniform(4)
    cyl = build_cylinder(X, g, FAMILIES[fam](g))
    sched = derive_schedule(cyl)
    H = homotopy_map(cyl, Y, lambda x, t: table[4 * x + int(t)])
    f, h = end_map(H, 0).array, end_map(H, -1).array
    S, T = assemble(X, 1, ring, "chain", top=3), assemble(Y, 5, ring, "chain", top=3)
    for p in range(3):
        lhs = T.boundary_matrix(p + 1) @ prism_matrix(S, T, sched.terms_of, H.array, p)
        if p:
            lhs = lhs + prism_matrix(S, T, sched.terms_of, H.array, p - 1) @ S.boundary_matrix(p)
        rhs = chain_map_matrix(S, T, h, p) - chain_map_matrix(S, T, f, p)
        assert np.array_equal(np.asarray(lhs, dtype=object) % (ring.p or 10**9),
                              np.asarray(rhs, dtype=object) % (ring.p or 10**9))


@given(st.lists(st.integers(0, 5), min_size=16, max_size=16))
def test_cochain_prism_identity(table):
    """delta P + P delta = f^* - g^* with the negated dual prism."""
    X, Y = path(4), path(6)
    g = IntervalGrid.uniform(4)
    cyl = build_cylinder(X, g, NeighborhoodFamily.adjacent(g))
    sched = derive_schedule(cyl)
    H = homotopy_map(cyl, Y, lambda x, t: table[4 * x + int(t)])
    f, h = end_map(H, 0).array, end_map(H, -1).array
    S, T = assemble(X, 1, ZZ, "cochain", top=3), assemble(Y, 5, ZZ, "cochain", top=3)
    for p in range(3):
        lhs = prism_matrix(S, T, sched.terms_of, H.array, p) @ T.boundary_matrix(p + 1).T
        if p:
            lhs = lhs + S.boundary_matrix(p).T @ prism_matrix(S, T, sched.terms_of, H.array, p - 1)
        assert np.array_equal(lhs, chain_map_matrix(S, T, f, p) - chain_map_matrix(S, T, h, p))


def test_prism_on_a_point():
    X, Y = lattice(5), lattice(8)
    L = lift_classical(X, Y, lambda x, n: x + min(max(n, 0), 3), Profile.constant(0), Profile.constant(3),
                       target_offset=3)
    sched = derive_schedule(L.cylinder)
    c = CoarseChain(0, {(X.index[0],): 1})
    lhs = boundary(prism_chain(c, sched.terms_of, L.H.assignment))
    assert {tuple(Y.labels[i] for i in t): v for t, v in lhs.coeffs.items()} == {(0,): -1, (3,): 1}


def test_cylinder_slices_are_bounded():
    X = lattice(5)
    g = IntervalGrid.uniform(4)
    for U, level in ((NeighborhoodFamily.full(g), 1), (NeighborhoodFamily.adjacent(g), 2)):
        cyl = build_cylinder(X, g, U)
        assert check_bounded_law(cyl)
        column = [cyl.index(X.index[0], k) for k in range(4)]
        assert is_bounded(cyl.space, column).level == level


def test_translation_homotopy_is_valid():
    X, Y = lattice(5), lattice(8)
    L = lift_classical(X, Y, lambda x, n: x + min(max(n, 0), 3), Profile.constant(0), Profile.constant(3),
                       target_offset=3)
    rep = validate_homotopy(L.H, L.f, L.g)
    assert all(v.status == PASS for v in rep.verdicts.values())


def test_flip_is_not_a_homotopy():
    X = lattice(5)
    g = IntervalGrid.uniform(4)
    cyl = build_cylinder(X, g, NeighborhoodFamily.adjacent(g))
    H = homotopy_map(cyl, X, lambda x, t: x if t < 3 else -x)
    rep = validate_homotopy(H, CoarseMap.identity(X), CoarseMap.from_rule(X, X, lambda x: -x, "neg"))
    assert rep["controlled"].status == FAIL


def test_flasque_spaces():
    assert all(v.ok for v in flasque_check(FlasqueData(lambda k: k + 1), ray(6)).verdicts.values())
    cyl = flasque_check(FlasqueData(lambda p: (p[0], p[1] + 1)), flasque_cylinder(6))
    assert all(v.ok for v in cyl.verdicts.values())
    # the shift on Z does not push bounded sets away
    z = flasque_check(FlasqueData(lambda x: x + 1), lattice(6))
    assert z["escape"].status == FAIL and z["close"].ok


def test_homotopy_domains():
    D = build_homotopy_domains(lattice(3), Profile(lambda x: abs(x)))
    assert D.spaces["X_rho^rho"].labels == tuple((x, abs(x)) for x in range(-3, 4))
    assert check_map_properties(D.inclusion("X_rho^rho", "X_0^rho"))["controlled"].status == PASS
