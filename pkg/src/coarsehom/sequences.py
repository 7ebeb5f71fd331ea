"""Long exact sequences, excision and Mayer-Vietoris on assembled complexes.

Maps between complexes use projection semantics: a tuple goes to its image
if that image is a basis element of the target and to zero otherwise.  On
windows rel collar this is a chain map as long as the collar is at least as
wide as the level (checked, never assumed).  All matrices here are in chain
direction C_p(src) -> C_p(tgt); cochain maps are their transposes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .chains import GradedComplex, _matrix_from_orbits, assemble, canonical_simplex
from .core import CoarseSpace
from .homology import (ExactnessReport, Group, HomologyGroup, check_exact, compose_maps, homology, induced_map,
                       inverse_map, is_iso)
from .linalg import ZZ, Ring, exact_matmul

# ---------------------------------------------------------------------------
# Chain-direction matrices between complexes


def map_matrix(src: GradedComplex, tgt: GradedComplex, p: int, point_map=None) -> np.ndarray:
    """C_p(src) -> C_p(tgt) induced by a point map (identity when omitted).

    Entries of ``point_map`` equal to -1 mean "outside the target table";
    tuples touching them, and tuples whose image is killed or absent, go to 0.
    """
    f = None if point_map is None else np.asarray(point_map, dtype=np.int64)
    tgt_index = {orb[0][0]: r for r, orb in enumerate(tgt.bases[p])}

    def image(t, j):
        nt = t if f is None else tuple(int(f[x]) for x in t)
        if any(x < 0 for x in nt):
            return
        if tgt.simplicial:
            nt, s = canonical_simplex(nt)
            if s == 0:
                return
            yield (nt, j), s
        else:
            yield (nt, j), 1

    return _matrix_from_orbits(src.bases[p], tgt_index, tgt.all_keys[p], image, lambda t: True,
                               tgt.rank(p)).toarray()


def connecting_matrix(rel: GradedComplex, sub: GradedComplex, p: int) -> np.ndarray:
    """C_p(X rel A) -> C_{p-1}(A): boundary of the lift, kept where it lies in A's basis."""
    tgt_index = {orb[0][0]: r for r, orb in enumerate(sub.bases[p - 1])}

    def image(t, j):
        for i in range(len(t)):
            face = t[:i] + t[i + 1:]
            if rel.simplicial:
                face, s = canonical_simplex(face)
                if s == 0:
                    continue
                yield (face, j), (-1) ** i * s
            else:
                yield (face, j), (-1) ** i

    return _matrix_from_orbits(rel.bases[p], tgt_index, sub.all_keys[p - 1], image, lambda t: True,
                               sub.rank(p - 1)).toarray()


def is_chain_map(src: GradedComplex, tgt: GradedComplex, mats: dict) -> bool:
    """d_tgt M_p = M_{p-1} d_src for all consecutive stored degrees."""
    for p in sorted(mats):
        if p - 1 not in mats or p > min(src.top, tgt.top):
            continue
        left = exact_matmul(tgt.boundary_matrix(p), mats[p]) if tgt.rank(p - 1) and src.rank(p) and tgt.rank(p) \
            else np.zeros((tgt.rank(p - 1), src.rank(p)), dtype=np.int64)
        right = exact_matmul(mats[p - 1], src.boundary_matrix(p)) if src.rank(p - 1) and src.rank(p) and \
            tgt.rank(p - 1) else np.zeros((tgt.rank(p - 1), src.rank(p)), dtype=np.int64)
        if not np.array_equal(np.asarray(left, dtype=object), np.asarray(right, dtype=object)):
            return False
    return True


def induced(M: np.ndarray, H_src_cx: HomologyGroup, H_tgt_cx: HomologyGroup, kind: str) -> np.ndarray:
    """Induced map for a chain-direction matrix M: C(src) -> C(tgt).

    For chains: H(src) -> H(tgt).  For cochains: H(tgt) -> H(src) via M^T.
    """
    if kind == "chain":
        return induced_map(M, H_src_cx, H_tgt_cx)
    return induced_map(np.asarray(M).T, H_tgt_cx, H_src_cx)


class HomologyCache:
    """Homology per (complex, degree), computed once."""

    def __init__(self):
        self._store: dict = {}

    def __call__(self, cx: GradedComplex, p: int) -> HomologyGroup:
        key = (id(cx), p)
        if key not in self._store:
            self._store[key] = (cx, homology(cx, p))
        return self._store[key][1]


def _zero(ring: Ring) -> Group:
    return Group((), ring)


def _g(H: HomologyGroup) -> Group:
    return Group.of(H)


# ---------------------------------------------------------------------------
# Pairs


@dataclass
class PairComplexes:
    """Complexes of A, X and (X, A), all rel the window collar."""

    sub: GradedComplex
    whole: GradedComplex
    rel: GradedComplex
    kind: str


def pair_complexes(X: CoarseSpace, A: Iterable[int], level: int, ring: Ring = ZZ, kind: str = "chain",
                   collar: Iterable[int] = (), top: int = 3, variant: str = "plain", action=None) -> PairComplexes:
    A = frozenset(A)
    col = frozenset(collar)
    sub = assemble(X, level, ring, kind, variant, collar=col & A, action=action, top=top, points=sorted(A))
    whole = assemble(X, level, ring, kind, variant, collar=col, action=action, top=top)
    rel = assemble(X, level, ring, kind, variant, relative=A, collar=col, action=action, top=top)
    return PairComplexes(sub, whole, rel, kind)


@dataclass
class SequenceReport:
    """A long sequence of groups with maps and its exactness verdict."""

    labels: list
    groups: list
    maps: list
    exactness: ExactnessReport
    chain_maps_ok: bool = True
    extra: dict = field(default_factory=dict)

    @property
    def exact(self) -> bool:
        return self.exactness.exact and self.chain_maps_ok

    def to_json(self) -> dict:
        return {"exact": self.exact, "chain_maps_ok": self.chain_maps_ok,
                "nodes": [dict(n, label=self.labels[n["node"]]) for n in self.exactness.nodes],
                "groups": [{"label": l, "orders": list(g.orders)} for l, g in zip(self.labels, self.groups)],
                **self.extra}


def pair_les(pc: PairComplexes, cache: HomologyCache | None = None) -> SequenceReport:
    """Long exact sequence of the pair, over the degrees the truncation determines."""
    cache = cache or HomologyCache()
    top = min(pc.sub.top, pc.whole.top, pc.rel.top)
    degs = range(0, top)
    ring = pc.whole.ring
    I = {p: map_matrix(pc.sub, pc.whole, p) for p in range(top + 1)}
    J = {p: map_matrix(pc.whole, pc.rel, p) for p in range(top + 1)}
    ok = is_chain_map(pc.sub, pc.whole, I) and is_chain_map(pc.whole, pc.rel, J)
    labels, groups, maps = [], [], []
    if pc.kind == "chain":
        for q in reversed(degs):
            HA, HX, HR = cache(pc.sub, q), cache(pc.whole, q), cache(pc.rel, q)
            if groups:
                maps.append(_connect_chain(pc, q + 1, cache))
            labels += [f"H{q}(A)", f"H{q}(X)", f"H{q}(X,A)"]
            groups += [_g(HA), _g(HX), _g(HR)]
            maps += [induced(I[q], HA, HX, "chain"), induced(J[q], HX, HR, "chain")]
        labels.append("0")
        groups.append(_zero(ring))
        maps.append(np.zeros((0, groups[-2].k), dtype=object))
    else:
        labels.append("0")
        groups.append(_zero(ring))
        first = True
        for q in degs:
            HA, HX, HR = cache(pc.sub, q), cache(pc.whole, q), cache(pc.rel, q)
            if first:
                maps.append(np.zeros((HR.ngens, 0), dtype=object))
                first = False
            else:
                maps.append(_connect_cochain(pc, q - 1, cache))
            labels += [f"H^{q}(X,A)", f"H^{q}(X)", f"H^{q}(A)"]
            groups += [_g(HR), _g(HX), _g(HA)]
            maps += [induced(J[q], HX, HR, "cochain"), induced(I[q], HA, HX, "cochain")]
    return SequenceReport(labels, groups, maps, check_exact(groups, maps), ok)


def _connect_chain(pc: PairComplexes, p: int, cache) -> np.ndarray:
    """H_p(X, A) -> H_{p-1}(A)."""
    D = connecting_matrix(pc.rel, pc.sub, p)
    return induced_map(D, cache(pc.rel, p), cache(pc.sub, p - 1))


def _connect_cochain(pc: PairComplexes, q: int, cache) -> np.ndarray:
    """H^q(A) -> H^{q+1}(X, A)."""
    D = connecting_matrix(pc.rel, pc.sub, q + 1)
    return induced_map(D.T, cache(pc.sub, q), cache(pc.rel, q + 1))


# ---------------------------------------------------------------------------
# Excision


@dataclass
class ExcisionReport:
    degrees: dict  # p -> {"iso": bool, "src": orders, "tgt": orders}
    chain_map_ok: bool
    outside_image: int  # basis elements of the big complex not hit by the map

    @property
    def ok(self) -> bool:
        return self.chain_map_ok and all(d["iso"] for d in self.degrees.values())

    def to_json(self) -> dict:
        return {"ok": self.ok, "chain_map_ok": self.chain_map_ok, "outside_image": self.outside_image,
                "degrees": {str(p): d for p, d in self.degrees.items()}}


def excision_complexes(X: CoarseSpace, A: Iterable[int], C: Iterable[int], level: int, ring: Ring = ZZ,
                       kind: str = "chain", collar: Iterable[int] = (), top: int = 3, variant: str = "plain",
                       action=None):
    """(X minus C, A minus C) and (X, A), both rel the collar."""
    A, C, col = frozenset(A), frozenset(C), frozenset(collar)
    if not C <= A:
        raise ValueError("excision needs C inside A")
    keep = sorted(frozenset(range(X.size)) - C)
    small = assemble(X, level, ring, kind, variant, relative=A - C, collar=col - C, action=action, top=top,
                     points=keep)
    big = assemble(X, level, ring, kind, variant, relative=A, collar=col, action=action, top=top)
    return small, big


def excision_map_report(small: GradedComplex, big: GradedComplex, cache: HomologyCache | None = None,
                        point_map=None) -> ExcisionReport:
    cache = cache or HomologyCache()
    top = min(small.top, big.top)
    M = {p: map_matrix(small, big, p, point_map) for p in range(top + 1)}
    ok = is_chain_map(small, big, M)
    degrees = {}
    for p in range(top):
        Hs, Hb = cache(small, p), cache(big, p)
        if small.kind == "chain":
            F = induced(M[p], Hs, Hb, "chain")
            iso = is_iso(F, _g(Hs), _g(Hb))
        else:
            F = induced(M[p], Hs, Hb, "cochain")
            iso = is_iso(F, _g(Hb), _g(Hs))
        degrees[p] = {"iso": bool(iso), "src": list(Hs.orders), "tgt": list(Hb.orders)}
    missed = sum(1 for p in range(top + 1) for j in range(big.rank(p)) if not M[p][j, :].any())
    return ExcisionReport(degrees, ok, missed)


def check_excision(X, A, C, level, ring=ZZ, kind="chain", collar=(), top=3, variant="plain", action=None,
                   cache=None) -> ExcisionReport:
    small, big = excision_complexes(X, A, C, level, ring, kind, collar, top, variant, action)
    return excision_map_report(small, big, cache)


# ---------------------------------------------------------------------------
# Mayer-Vietoris


def _direct_sum(G: Group, H: Group) -> Group:
    return Group(tuple(G.orders) + tuple(H.orders), G.ring)


def mayer_vietoris(X: CoarseSpace, A: Iterable[int], B: Iterable[int], level: int, ring: Ring = ZZ,
                   kind: str = "chain", collar: Iterable[int] = (), top: int = 3, variant: str = "plain",
                   action=None, cache: HomologyCache | None = None) -> SequenceReport:
    """The Mayer-Vietoris sequence with the connecting map composed from the
    pair (B, A n B), the inverse of excision (B, A n B) -> (X, A), and X -> (X, A)."""
    cache = cache or HomologyCache()
    A, B, col = frozenset(A), frozenset(B), frozenset(collar)
    if A | B != frozenset(range(X.size)):
        raise ValueError("A and B must cover X")
    AB = A & B

    def cx(points=None, relative=None):
        pts = None if points is None else sorted(points)
        c = col if points is None else col & frozenset(points)
        return assemble(X, level, ring, kind, variant, relative=relative, collar=c, action=action, top=top,
                        points=pts)

    cAB, cA, cB, cX = cx(AB), cx(A), cx(B), cx()
    cXA, cBAB = cx(None, A), cx(B, AB)
    top = min(c.top for c in (cAB, cA, cB, cX, cXA, cBAB))
    mats = {}
    for name, s, t in (("iA", cAB, cA), ("iB", cAB, cB), ("jA", cA, cX), ("jB", cB, cX), ("q", cX, cXA),
                       ("exc", cBAB, cXA)):
        mats[name] = {p: map_matrix(s, t, p) for p in range(top + 1)}
    ok = all(is_chain_map(s, t, mats[n]) for n, s, t in (("iA", cAB, cA), ("iB", cAB, cB), ("jA", cA, cX),
                                                          ("jB", cB, cX), ("q", cX, cXA), ("exc", cBAB, cXA)))
    labels, groups, maps = [], [], []
    extra = {"excision_iso": {}}
    H = cache
    if kind == "chain":
        for q in reversed(range(top)):
            GAB, GA, GB, GX = (_g(H(c, q)) for c in (cAB, cA, cB, cX))
            S = _direct_sum(GA, GB)
            if groups:
                maps.append(_mv_boundary(q + 1, cX, cXA, cBAB, cAB, mats, H, extra))
            iA = induced(mats["iA"][q], H(cAB, q), H(cA, q), "chain")
            iB = induced(mats["iB"][q], H(cAB, q), H(cB, q), "chain")
            jA = induced(mats["jA"][q], H(cA, q), H(cX, q), "chain")
            jB = induced(mats["jB"][q], H(cB, q), H(cX, q), "chain")
            alpha = np.concatenate([_o(iA, (GA.k, GAB.k)), -_o(iB, (GB.k, GAB.k))], axis=0)
            beta = np.concatenate([_o(jA, (GX.k, GA.k)), _o(jB, (GX.k, GB.k))], axis=1)
            labels += [f"H{q}(AnB)", f"H{q}(A)+H{q}(B)", f"H{q}(X)"]
            groups += [GAB, S, GX]
            maps += [alpha, beta]
        maps.append(np.zeros((0, groups[-1].k), dtype=object))
        labels.append("0")
        groups.append(_zero(ring))
    else:
        labels.append("0")
        groups.append(_zero(ring))
        for q in range(top):
            GAB, GA, GB, GX = (_g(H(c, q)) for c in (cAB, cA, cB, cX))
            S = _direct_sum(GA, GB)
            if q == 0:
                maps.append(np.zeros((GX.k, 0), dtype=object))
            else:
                maps.append(_mv_coboundary(q - 1, cX, cXA, cBAB, cAB, mats, H, extra))
            jA = induced(mats["jA"][q], H(cA, q), H(cX, q), "cochain")
            jB = induced(mats["jB"][q], H(cB, q), H(cX, q), "cochain")
            iA = induced(mats["iA"][q], H(cAB, q), H(cA, q), "cochain")
            iB = induced(mats["iB"][q], H(cAB, q), H(cB, q), "cochain")
            beta = np.concatenate([_o(jA, (GA.k, GX.k)), _o(jB, (GB.k, GX.k))], axis=0)
            alpha = np.concatenate([_o(iA, (GAB.k, GA.k)), -_o(iB, (GAB.k, GB.k))], axis=1)
            labels += [f"H^{q}(X)", f"H^{q}(A)+H^{q}(B)", f"H^{q}(AnB)"]
            groups += [GX, S, GAB]
            maps += [beta, alpha]
    return SequenceReport(labels, groups, maps, check_exact(groups, maps), ok, extra)


def _o(M, shape):
    M = np.asarray(M, dtype=object)
    return np.zeros(shape, dtype=object) if M.size == 0 else M


def _mv_boundary(p, cX, cXA, cBAB, cAB, mats, H, extra) -> np.ndarray:
    """H_p(X) -> H_p(X, A) <- H_p(B, AnB) -> H_{p-1}(AnB)."""
    HX, HXA, HBAB, HAB = H(cX, p), H(cXA, p), H(cBAB, p), H(cAB, p - 1)
    q = induced(mats["q"][p], HX, HXA, "chain")
    exc = induced(mats["exc"][p], HBAB, HXA, "chain")
    iso = is_iso(exc, _g(HBAB), _g(HXA))
    extra["excision_iso"][str(p)] = bool(iso)
    if not iso:
        raise ValueError(f"excision map in degree {p} is not invertible; the triple is not excisive at this level")
    inv = inverse_map(exc, _g(HBAB), _g(HXA))
    D = induced_map(connecting_matrix(cBAB, cAB, p), HBAB, HAB)
    step = compose_maps(inv, q, _g(HBAB))
    return compose_maps(D, step, _g(HAB))


def _mv_coboundary(q, cX, cXA, cBAB, cAB, mats, H, extra) -> np.ndarray:
    """H^q(AnB) -> H^{q+1}(B, AnB) <- H^{q+1}(X, A) -> H^{q+1}(X)."""
    p = q + 1
    HX, HXA, HBAB, HAB = H(cX, p), H(cXA, p), H(cBAB, p), H(cAB, q)
    jstar = induced(mats["q"][p], HX, HXA, "cochain")  # H^p(X, A) -> H^p(X)
    exc = induced(mats["exc"][p], HBAB, HXA, "cochain")  # H^p(X, A) -> H^p(B, AnB)
    iso = is_iso(exc, _g(HXA), _g(HBAB))
    extra["excision_iso"][str(p)] = bool(iso)
    if not iso:
        raise ValueError(f"excision map in degree {p} is not invertible; the triple is not excisive at this level")
    inv = inverse_map(exc, _g(HXA), _g(HBAB))
    D = induced_map(connecting_matrix(cBAB, cAB, p).T, HAB, HBAB)
    step = compose_maps(inv, D, _g(HXA))
    return compose_maps(jstar, step, _g(HX))
