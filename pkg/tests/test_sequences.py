import numpy as np
import pytest
from hypothesis import given, strategies as st

from coarsehom.linalg import QQ, ZZ, Ring
from coarsehom.rips import window_pair
from coarsehom.sequences import check_excision, mayer_vietoris, pair_complexes, pair_les
from coarsehom.spaces import custom, lattice, reflection

RINGS = [ZZ, QQ, Ring("Zp", 2)]


@st.composite
def finite_spaces(draw):
    n = draw(st.integers(2, 6))
    pts = draw(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=n, max_size=n, unique=True))
    P = np.array(pts)
    D = np.abs(P[:, None, :] - P[None, :, :]).max(axis=2)
    return custom(list(range(n)), D, scales=(0, 1, 2, 3))


@given(finite_spaces(), st.data(), st.sampled_from(RINGS), st.sampled_from(["chain", "cochain"]))
def test_pair_sequence_is_exact(X, data, ring, kind):
    A = data.draw(st.sets(st.integers(0, X.size - 1)))
    level = data.draw(st.integers(0, 2))
    r = pair_les(pair_complexes(X, A, level, ring, kind, top=3))
    assert r.chain_maps_ok and r.exact, r.to_json()


@given(finite_spaces(), st.data(), st.sampled_from(["chain", "cochain"]))
def test_mayer_vietoris_is_exact(X, data, kind):
    A = data.draw(st.sets(st.integers(0, X.size - 1), min_size=1))
    # B holds the 1-penumbra of the complement, so every level-1 tuple sits in A or in B
    B = X.penumbra(1, frozenset(range(X.size)) - A) | data.draw(st.sets(st.sampled_from(sorted(A))))
    mv = mayer_vietoris(X, A, B, 1, ZZ, kind, top=3)
    assert mv.chain_maps_ok and mv.exact


@pytest.mark.parametrize("kind", ["chain", "cochain"])
def test_line_halves(kind):
    X = lattice(6)
    col = window_pair(X, 2).collar
    A = X.select(lambda x: x <= 0)
    B = X.select(lambda x: x >= 0)
    assert pair_les(pair_complexes(X, A, 1, kind=kind, collar=col, top=3)).exact
    assert mayer_vietoris(X, A, B, 1, kind=kind, collar=col, top=3).exact
    rep = check_excision(X, A, X.select(lambda x: x <= -3), 1, kind=kind, collar=col)
    assert rep.ok and rep.degrees[1]["src"] == rep.degrees[1]["tgt"]


def test_excision_needs_subset():
    X = lattice(4)
    with pytest.raises(ValueError):
        check_excision(X, X.select(lambda x: x <= 0), X.select(lambda x: x >= 3), 1)


def test_mayer_vietoris_needs_cover():
    X = lattice(4)
    with pytest.raises(ValueError):
        mayer_vietoris(X, X.select(lambda x: x < 0), X.select(lambda x: x > 0), 1)


def test_equivariant_reflection():
    X = lattice(6)
    col = window_pair(X, 2).collar
    act = reflection()
    A = X.select(lambda x: abs(x) >= 2)
    C = X.select(lambda x: abs(x) >= 4)
    for kind, variant in (("chain", "invariant"), ("cochain", "coinvariant")):
        pc = pair_complexes(X, A, 1, QQ, kind, col, 3, variant, act)
        assert pair_les(pc).exact
        assert check_excision(X, A, C, 1, QQ, kind, col, 3, variant, act).ok


def test_disjoint_cover_breaks_mayer_vietoris():
    # two points one apart, split into singletons: the edge lies in neither piece
    X = custom([0, 1], np.array([[0, 1], [1, 0]]), scales=(0, 1))
    assert not mayer_vietoris(X, {0}, {1}, 1, ZZ, top=3).exact
