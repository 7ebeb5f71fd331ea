import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coarsehom.core import CapExceeded
from coarsehom.homology import homology
from coarsehom.rips import MissingWitness, build_filtration, build_rips, cliques, induced_map, window_pair
from coarsehom.spaces import cycle, lattice, ray


def brute_cliques(adj, max_dim):
    n = adj.shape[0]
    out = []
    for d in range(max_dim + 1):
        out.append([c for c in itertools.combinations(range(n), d + 1)
                    if all(adj[a, b] for a, b in itertools.combinations(c, 2))])
    return out


@given(st.integers(1, 8).flatmap(lambda n: st.lists(st.booleans(), min_size=n * n, max_size=n * n).map(
    lambda bits: np.array(bits, dtype=bool).reshape(n, n))))
def test_cliques_match_brute_force(M):
    adj = M & M.T
    assert cliques(adj, list(range(adj.shape[0])), 3) == brute_cliques(adj, 3)


def test_cap():
    with pytest.raises(CapExceeded):
        build_rips(lattice(10), None, 3, cap=20)


def test_cap_from_environment(monkeypatch):
    monkeypatch.setenv("COARSEHOM_CAP", "5")
    with pytest.raises(CapExceeded):
        build_rips(lattice(4), None, 1)


def test_filtration_monotone():
    fs = build_filtration(cycle(n=8), None)
    assert [K.count(0) for K in fs] == [8] * len(fs)
    assert fs[0].count(1) == 0 and fs[1].count(1) == 8


def test_circle_and_full_simplex():
    C = cycle(n=8)
    K = build_rips(C, None, 1)
    assert [homology(K.chains(), p).betti for p in range(2)] == [1, 1]
    top = build_rips(C, None, C.depth)
    assert [homology(top.chains(), p).betti for p in range(3)] == [1, 0, 0]


def test_exports():
    K = build_rips(lattice(2), None, 1)
    off = K.to_off().splitlines()
    assert off[0] == "OFF" and off[1] == "5 4 0"
    dot = K.to_dot()
    assert dot.startswith("graph rips {") and dot.count("--") == 4
    assert K.to_json()["simplices"][1][0] == [-2, -1]
    with pytest.raises(ValueError):
        K.export("svg")


def test_induced_map_checks_simplices():
    X = lattice(3)
    K1 = build_rips(X, None, 1)
    shift = [min(i + 1, X.size - 1) for i in range(X.size)]
    induced_map(shift, K1, K1)
    double = [X.index[max(-3, min(3, 2 * x))] for x in X.labels]
    with pytest.raises(MissingWitness):
        induced_map(double, K1, K1)


def test_window_collar():
    W = lattice(5, (0, 1, 2, 3))
    wp = window_pair(W, 2)
    assert sorted(W.labels[i] for i in wp.collar) == [-5, -4, 4, 5]
    R = ray(5, (0, 1, 2, 3))
    # the ray's left end is a genuine boundary, not a window edge
    assert sorted(R.labels[i] for i in window_pair(R, 2).collar) == [4, 5]
