"""Rips complexes of discretized spaces, their filtrations and window pairs."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import networkx as nx
import numpy as np

from .chains import GradedComplex, canonical_simplex, chain_map_matrix, simplicial_complex_chains
from .core import CapExceeded, CoarseSpace, ceil_scale, size_cap
from .linalg import ZZ, Ring


@dataclass
class SimplicialComplex:
    """Simplices per dimension as sorted tuples of point indices of ``space``."""

    space: CoarseSpace
    simplices: list
    level: int = 0
    max_dim: int = 3

    @property
    def vertices(self) -> list:
        return [s[0] for s in self.simplices[0]] if self.simplices else []

    def count(self, d: int) -> int:
        return len(self.simplices[d]) if d < len(self.simplices) else 0

    def contains(self, s: tuple) -> bool:
        d = len(s) - 1
        return d < len(self.simplices) and tuple(sorted(s)) in self._sets[d]

    @property
    def _sets(self):
        if not hasattr(self, "_cache"):
            self._cache = [set(dim) for dim in self.simplices]
        return self._cache

    def is_subcomplex_of(self, other: "SimplicialComplex") -> bool:
        return all(set(a) <= other._sets[d] for d, a in enumerate(self.simplices) if d < len(other.simplices))

    def chains(self, ring: Ring = ZZ, kind: str = "chain", relative=None, collar=None) -> GradedComplex:
        return simplicial_complex_chains(self.simplices, ring, kind, relative, collar, self.space.size, self.level)

    def to_json(self) -> dict:
        lab = self.space.labels
        return {"level": self.level, "max_dim": self.max_dim,
                "simplices": [[[_lab(lab[v]) for v in s] for s in dim] for dim in self.simplices]}

    def to_off(self) -> str:
        verts = self.vertices
        pos = {v: k for k, v in enumerate(verts)}
        faces = [s for d in (1, 2) if d < len(self.simplices) for s in self.simplices[d]]
        lines = ["OFF", f"{len(verts)} {len(faces)} 0"]
        for v in verts:
            c = _coords(self.space.labels[v])
            lines.append(" ".join(f"{x:g}" for x in c))
        for s in faces:
            lines.append(" ".join([str(len(s))] + [str(pos[v]) for v in s]))
        return "\n".join(lines) + "\n"

    def to_dot(self) -> str:
        lab = self.space.labels
        lines = ["graph rips {"]
        for v in self.vertices:
            lines.append(f'  n{v} [label="{lab[v]}"];')
        if len(self.simplices) > 1:
            for a, b in self.simplices[1]:
                lines.append(f"  n{a} -- n{b};")
        lines.append("}")
        return "\n".join(lines) + "\n"

    def export(self, fmt: str) -> str:
        fmt = fmt.lower()
        if fmt == "off":
            return self.to_off()
        if fmt == "dot":
            return self.to_dot()
        if fmt == "json":
            return json.dumps(self.to_json(), sort_keys=True)
        raise ValueError(f"unknown export format {fmt!r}")


def _lab(x):
    return list(x) if isinstance(x, tuple) else x


def _coords(label):
    if isinstance(label, tuple):
        c = [float(v) if isinstance(v, (int, float)) else 0.0 for v in label]
    elif isinstance(label, (int, float)):
        c = [float(label)]
    else:
        c = [0.0]
    return (c + [0.0, 0.0, 0.0])[:3]


def cliques(adj: np.ndarray, vertices: list, max_dim: int, cap: int | None = None) -> list:
    """All cliques with at most max_dim+1 vertices, grouped by dimension, as sorted tuples."""
    cap = cap or size_cap()
    vs = sorted(int(v) for v in vertices)
    sub = adj[np.ix_(vs, vs)].copy()
    np.fill_diagonal(sub, False)
    G = nx.from_numpy_array(sub.astype(np.int8))
    out = [[] for _ in range(max_dim + 1)]
    # cliques arrive in order of size, so the dimension cut can stop the generator
    for total, c in enumerate(nx.enumerate_all_cliques(G), start=1):
        if len(c) > max_dim + 1:
            break
        if total > cap:
            raise CapExceeded(f"Rips complex exceeds {cap} simplices (COARSEHOM_CAP)")
        out[len(c) - 1].append(tuple(sorted(vs[i] for i in c)))
    for dim in out:
        dim.sort()
    return out


def build_rips(X: CoarseSpace, points: Iterable[int] | None, level: int, max_dim: int = 3,
               cap: int | None = None) -> SimplicialComplex:
    """P_E(X'): simplices are finite cliques of E_level minus the diagonal on X'."""
    pts = list(range(X.size)) if points is None else sorted(set(points))
    E = X.level(level).matrix
    adj = E & E.T
    return SimplicialComplex(X, cliques(adj, pts, max_dim, cap), level, max_dim)


def build_filtration(X: CoarseSpace, points: Iterable[int] | None, levels: Iterable[int] | None = None,
                     max_dim: int = 3, cap: int | None = None) -> list[SimplicialComplex]:
    levels = list(range(X.depth + 1)) if levels is None else list(levels)
    out = [build_rips(X, points, n, max_dim, cap) for n in levels]
    for a, b in zip(out, out[1:]):
        if not a.is_subcomplex_of(b):
            raise AssertionError("Rips filtration is not monotone")
    return out


@dataclass
class SimplicialMap:
    source: SimplicialComplex
    target: SimplicialComplex
    vertex_map: np.ndarray

    def matrix(self, d: int, ring: Ring = ZZ, src_rel=None, tgt_rel=None) -> np.ndarray:
        S = self.source.chains(ring, collar=src_rel)
        T = self.target.chains(ring, collar=tgt_rel)
        return chain_map_matrix(S, T, self.vertex_map, d)


class MissingWitness(ValueError):
    pass


def induced_map(vertex_map, source: SimplicialComplex, target: SimplicialComplex) -> SimplicialMap:
    """Check every simplex lands (after collapsing) in the target complex."""
    f = np.asarray(vertex_map, dtype=np.int64)
    for d, dim in enumerate(source.simplices):
        for s in dim:
            img, sign = canonical_simplex(tuple(int(f[v]) for v in s))
            img = tuple(sorted(set(img)))
            if not target.contains(img):
                raise MissingWitness(f"image of {s} is not a simplex of the target at level {target.level}")
    return SimplicialMap(source, target, f)


def target_level_for(f_array, X: CoarseSpace, Y: CoarseSpace, n: int) -> int | None:
    """Least level m with (f x f)(E_n) inside F_m (the controlledness witness)."""
    ii, jj = np.nonzero(X.level(n).matrix)
    T = np.zeros((Y.size, Y.size), dtype=bool)
    T[f_array[ii], f_array[jj]] = True
    return Y.chain.least_level(T)


@dataclass
class WindowPair:
    """A window W with its collar: points whose E_r-ball leaves W."""

    window: frozenset
    collar: frozenset
    interior: frozenset
    r: int
    ambient_checked: bool = False


def window_pair(X: CoarseSpace, r: int, window: Iterable[int] | None = None) -> WindowPair:
    """Collar of width r.  For windows of an infinite family, balls are taken
    in a regenerated larger window, so the edge of the table is recognised."""
    W = frozenset(range(X.size)) if window is None else frozenset(window)
    if X.is_window:
        step = ceil_scale(X.scales[min(r, len(X.scales) - 1)]) if X.scales else r
        big = X.regenerate(X.ambient.radius + max(step, r))
        E = big.level(r).matrix
        inside = np.zeros(big.size, dtype=bool)
        for x in W:
            inside[big.index[X.labels[x]]] = True
        interior = frozenset(x for x in W if inside[E[big.index[X.labels[x]]]].all())
        checked = True
    else:
        E = X.level(r).matrix
        mask = np.zeros(X.size, dtype=bool)
        mask[list(W)] = True
        interior = frozenset(x for x in W if mask[E[x]].all())
        checked = False
    return WindowPair(W, W - interior, interior, r, checked)
