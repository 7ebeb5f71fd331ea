import itertools

import numpy as np
import sympy
from hypothesis import given, strategies as st
from sympy.matrices.normalforms import smith_normal_form as sympy_snf

from coarsehom.chains import simplicial_complex_chains
from coarsehom.homology import (Group, check_exact, homology, induced_map, inverse_map, is_injective, is_iso,
                                is_surjective, is_zero_map, tower_limit)
from coarsehom.linalg import QQ, ZZ, Ring

# a 6-vertex triangulation of the projective plane
RP2 = [(0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5), (0, 5, 1), (1, 2, 4), (2, 3, 5), (3, 4, 1), (4, 5, 2), (5, 1, 3)]


def closure(facets, top=3):
    out = [set() for _ in range(top + 1)]
    for f in facets:
        f = tuple(sorted(f))
        for k in range(1, len(f) + 1):
            for face in itertools.combinations(f, k):
                if k - 1 <= top:
                    out[k - 1].add(face)
    return [sorted(s) for s in out]


def oracle(simplices, p):
    """Betti number and torsion from sympy Smith forms of the boundary matrices."""
    def bd(q):
        if q == 0 or q >= len(simplices) or not simplices[q] or not simplices[q - 1]:
            return sympy.zeros(len(simplices[q - 1]) if 0 < q <= len(simplices) else 0,
                               len(simplices[q]) if q < len(simplices) else 0)
        idx = {s: i for i, s in enumerate(simplices[q - 1])}
        M = sympy.zeros(len(simplices[q - 1]), len(simplices[q]))
        for j, s in enumerate(simplices[q]):
            for i in range(len(s)):
                M[idx[s[:i] + s[i + 1:]], j] = (-1) ** i
        return M

    def factors(M):
        if M.rows == 0 or M.cols == 0:
            return []
        S = sympy_snf(M, domain=sympy.ZZ)
        return [abs(int(S[i, i])) for i in range(min(S.shape)) if S[i, i] != 0]

    out_rank = len(factors(bd(p))) if p > 0 else 0
    f_in = factors(bd(p + 1)) if p + 1 < len(simplices) else []
    betti = len(simplices[p]) - out_rank - len(f_in)
    return betti, tuple(sorted(d for d in f_in if d > 1))


def test_projective_plane():
    S = closure(RP2)
    cx = simplicial_complex_chains(S, ZZ)
    assert [homology(cx, p).betti for p in range(2)] == [1, 0]
    assert homology(cx, 1).torsion == (2,)
    cx2 = simplicial_complex_chains(S, Ring("Zp", 2))
    assert [homology(cx2, p).betti for p in range(3)] == [1, 1, 1]
    co = simplicial_complex_chains(S, ZZ, "cochain")
    assert homology(co, 2).torsion == (2,) and homology(co, 1).betti == 0


facets = st.lists(st.sets(st.integers(0, 5), min_size=1, max_size=4).map(tuple), min_size=1, max_size=8)


@given(facets)
def test_simplicial_homology_matches_sympy(fs):
    S = closure(fs)
    cx = simplicial_complex_chains(S, ZZ)
    for p in range(3):
        H = homology(cx, p)
        assert (H.betti, tuple(H.torsion)) == oracle(S, p)


@given(facets)
def test_euler_characteristic_over_fields(fs):
    S = closure(fs)
    chi = sum((-1) ** p * len(S[p]) for p in range(len(S)))
    for ring in (QQ, Ring("Zp", 3)):
        cx = simplicial_complex_chains(S + [[]], ring)
        assert sum((-1) ** p * homology(cx, p).betti for p in range(len(S))) == chi


def test_group_maps():
    Z, Z2 = Group((0,)), Group((2,))
    assert is_iso(np.array([[1]]), Z2, Z2) and is_iso(np.array([[3]]), Z2, Z2)
    assert not is_iso(np.array([[2]]), Z2, Z2) and is_zero_map(np.array([[2]]), Z2)
    assert is_injective(np.array([[2]]), Z, Z) and not is_surjective(np.array([[2]]), Z, Z)
    assert is_iso(np.array([[2]]), Group((0,), QQ), Group((0,), QQ))
    M = np.array([[2, 1], [1, 1]])
    G = Group((0, 0))
    assert np.array_equal(np.asarray(inverse_map(M, G, G), dtype=int) @ M, np.eye(2, dtype=int))


def test_exactness_of_short_sequence():
    # 0 -> Z --2--> Z -> Z/2 -> 0
    gs = [Group(()), Group((0,)), Group((0,)), Group((2,)), Group(())]
    maps = [np.zeros((1, 0)), np.array([[2]]), np.array([[1]]), np.zeros((0, 1))]
    assert check_exact(gs, maps).exact
    bad = [np.zeros((1, 0)), np.array([[4]]), np.array([[1]]), np.zeros((0, 1))]
    assert not check_exact(gs, bad).exact


def test_tower_limit():
    G = Group((0,))
    r = tower_limit([G, G, G, G], [np.array([[2]]), np.array([[1]]), np.array([[-1]])], k=2)
    assert r.isos == [False, True, True] and r.stabilized_at == 1
    r = tower_limit([G, G, G], [np.array([[1]]), np.array([[3]])], k=2)
    assert not r.stabilized


def test_induced_map_on_circle():
    S = closure([(0, 1), (1, 2), (2, 0)])
    cx = simplicial_complex_chains(S, ZZ)
    H = homology(cx, 1)
    F = np.eye(cx.rank(1), dtype=int)
    assert is_iso(induced_map(F, H, H), Group.of(H), Group.of(H))
