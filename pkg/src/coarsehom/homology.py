"""Homology of free complexes with explicit generators, induced maps,
exactness checks and stabilization of towers.

A homology group is reported as Z^betti + Z/t_1 + ... (over a field only the
dimension is meaningful).  Generators are cycles in the complex's basis;
``classify`` sends a cycle to its coordinates on those generators.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import ZZ, Ring, _promote, exact_matmul, normal_form, sparse_invariant_factors


def _mul(ring: Ring, A, B):
    A, B = np.asarray(A), np.asarray(B)
    if A.shape[1] == 0 or A.shape[0] == 0 or B.shape[1] == 0:
        z = np.zeros((A.shape[0], B.shape[1]), dtype=object if ring.kind == "Q" else np.int64)
        return z if ring.kind != "Q" else ring.array(z)
    if ring.kind == "Z":
        return exact_matmul(A, B)
    if ring.kind == "Zp":
        return (_promote(np.asarray(A) % ring.p).dot(_promote(np.asarray(B) % ring.p)) % ring.p).astype(np.int64)
    return ring.array(A).dot(ring.array(B))


@dataclass
class HomologyGroup:
    degree: int
    ring: Ring
    betti: int
    torsion: tuple
    generators: np.ndarray  # chain-space columns; torsion generators first
    orders: tuple  # per generator: its order (0 = infinite)
    coord: np.ndarray  # rows give generator coordinates of a cycle
    stabilized_at: int | None = None

    @property
    def ngens(self) -> int:
        return len(self.orders)

    def is_zero(self) -> bool:
        return self.ngens == 0

    def reduce(self, v: np.ndarray) -> np.ndarray:
        v = np.array(v, dtype=object)
        for i, d in enumerate(self.orders):
            if d:
                v[i] = int(v[i]) % d
        if self.ring.kind == "Zp":
            v = np.array([int(x) % self.ring.p for x in v], dtype=object)
        return v

    def classify(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim == 1:
            x = x[:, None]
        if self.ngens == 0:
            return np.zeros((0, x.shape[1]), dtype=object)
        raw = _mul(self.ring, self.coord, x)
        return np.stack([self.reduce(raw[:, j]) for j in range(raw.shape[1])], axis=1)

    def summary(self) -> dict:
        return {"degree": self.degree, "betti": self.betti, "torsion": list(self.torsion),
                "ring": str(self.ring), "stabilized_at": self.stabilized_at}

    def same_type(self, other: "HomologyGroup") -> bool:
        return self.betti == other.betti and self.torsion == other.torsion


def homology_from_matrices(d_out, d_in, ring: Ring = ZZ, degree: int = 0) -> HomologyGroup:
    """ker(d_out) / im(d_in) with generators and a coordinate map."""
    d_out = np.asarray(d_out)
    d_in = np.asarray(d_in)
    m = d_out.shape[1] if d_out.ndim == 2 else d_in.shape[0]
    B = d_out if d_out.size or d_out.shape[1] == m else np.zeros((0, m), dtype=np.int64)
    A = d_in if d_in.ndim == 2 else np.zeros((m, 0), dtype=np.int64)
    snf_b = normal_form(ring.array(B) if ring.kind != "Z" else B, ring)
    rb = snf_b.rank
    Z = snf_b.V[:, rb:]
    L = snf_b.Vinv[rb:, :]
    Ap = _mul(ring, L, A) if A.shape[1] else np.zeros((L.shape[0], 0), dtype=np.int64)
    snf_a = normal_form(Ap, ring)
    s = snf_a.rank
    z = Z.shape[1]
    keep, orders, torsion = [], [], []
    if ring.kind == "Z":
        for i in range(s):
            d = int(snf_a.diagonal[i])
            if d > 1:
                keep.append(i)
                orders.append(d)
                torsion.append(d)
    for i in range(s, z):
        keep.append(i)
        orders.append(0)
    Ginv = snf_a.Uinv  # z x z
    gens = _mul(ring, Z, Ginv[:, keep]) if keep else np.zeros((m, 0), dtype=np.int64)
    coord = _mul(ring, snf_a.U[keep, :], L) if keep else np.zeros((0, m), dtype=np.int64)
    return HomologyGroup(degree, ring, z - s, tuple(torsion), gens, tuple(orders), coord)


def homology(cx, p: int, ring: Ring | None = None) -> HomologyGroup:
    """H_p (chains) or H^p (cochains) of an assembled complex."""
    ring = ring or cx.ring
    if p not in cx.valid_degrees():
        raise ValueError(f"degree {p} is outside the assembled range {list(cx.valid_degrees())}")
    return homology_from_matrices(cx.differential_out(p), cx.differential_in(p), ring, p)


def betti_torsion_sparse(cx, p: int, ring: Ring | None = None) -> tuple[int, tuple]:
    """(betti, torsion) in degree p from invariant factors only (no generators).

    Uses sparse unit-pivot elimination, so it copes with much larger
    complexes than ``homology``; it is also an independent route.
    """
    ring = ring or cx.ring
    out_m = cx.differential_out(p, sparse=True).tocsc()
    in_m = cx.differential_in(p, sparse=True).tocsc()
    dim = cx.rank(p)

    def cols_of(M):
        out = []
        for j in range(M.shape[1]):
            lo, hi = M.indptr[j], M.indptr[j + 1]
            out.append({int(i): int(v) for i, v in zip(M.indices[lo:hi], M.data[lo:hi]) if v})
        return out

    f_out = sparse_invariant_factors(cols_of(out_m), out_m.shape[0], ring)
    f_in = sparse_invariant_factors(cols_of(in_m), in_m.shape[0], ring)
    betti = dim - len(f_out) - len(f_in)
    torsion = tuple(d for d in f_in if d > 1) if ring.kind == "Z" else ()
    return betti, torsion


def induced_map(F, H_src: HomologyGroup, H_tgt: HomologyGroup) -> np.ndarray:
    """Matrix of the map on homology induced by a chain map F (tgt-gens x src-gens)."""
    if H_src.ngens == 0 or H_tgt.ngens == 0:
        return np.zeros((H_tgt.ngens, H_src.ngens), dtype=object)
    images = _mul(H_src.ring, F, H_src.generators)
    return H_tgt.classify(images)


def check_chain_map(F_p, F_pm1, d_src_p, d_tgt_p) -> bool:
    """F_{p-1} d = d F_p (chain convention)."""
    left = exact_matmul(F_pm1, d_src_p) if F_pm1.size and d_src_p.size else np.zeros((F_pm1.shape[0], d_src_p.shape[1]))
    right = exact_matmul(d_tgt_p, F_p) if d_tgt_p.size and F_p.size else np.zeros((d_tgt_p.shape[0], F_p.shape[1]))
    return np.array_equal(np.asarray(left, dtype=object), np.asarray(right, dtype=object))


# ---------------------------------------------------------------------------
# Group-level algebra on presented groups Z^k / diag(orders)


@dataclass(frozen=True)
class Group:
    orders: tuple
    ring: Ring = ZZ

    @classmethod
    def of(cls, H: HomologyGroup) -> "Group":
        return cls(H.orders, H.ring)

    @property
    def k(self) -> int:
        return len(self.orders)

    def relations(self) -> np.ndarray:
        cols = [i for i, d in enumerate(self.orders) if d]
        R = np.zeros((self.k, len(cols)), dtype=object)
        for c, i in enumerate(cols):
            R[i, c] = self.orders[i]
        return R


def _obj(M, shape=None):
    M = np.asarray(M, dtype=object)
    if shape is not None and M.size == 0:
        return np.zeros(shape, dtype=object)
    return M


def _lattice_kernel(M: np.ndarray) -> np.ndarray:
    """Integer basis (columns) of {x : M x = 0}."""
    n = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(n, dtype=object)
    snf = normal_form(_as_intobj(M), ZZ)
    return _obj(snf.V)[:, snf.rank:]


def _as_intobj(M):
    M = np.asarray(M)
    out = np.empty(M.shape, dtype=object)
    out.flat[:] = [int(x) for x in M.flat]
    return out


def _solve_lattice(L: np.ndarray, v: np.ndarray):
    """Integer y with L y = v, or None."""
    L = _as_intobj(L)
    v = _as_intobj(v).reshape(-1)
    if L.shape[1] == 0:
        return np.zeros(0, dtype=object) if not any(v) else None
    snf = normal_form(L, ZZ)
    w = _obj(snf.U).dot(v)
    r = snf.rank
    y = np.zeros(L.shape[1], dtype=object)
    for i in range(len(w)):
        wi = int(w[i])
        if i < r:
            d = int(snf.diagonal[i])
            if wi % d:
                return None
            y[i] = wi // d
        elif wi != 0:
            return None
    return _obj(snf.V).dot(y)


def _field_rank(M, ring: Ring) -> int:
    M = np.asarray(M)
    if M.size == 0:
        return 0
    return normal_form(ring.array(_as_intobj(M) if ring.kind == "Q" else np.asarray(M, dtype=np.int64)), ring,
                       transforms=False).rank


def compose_maps(N, M, tgt: Group) -> np.ndarray:
    """N o M reduced in the target group."""
    P = _obj(N, (tgt.k, np.asarray(M).shape[1])).dot(_obj(M)) if np.asarray(N).size and np.asarray(M).size \
        else np.zeros((tgt.k, np.asarray(M).shape[1]), dtype=object)
    return _reduce(P, tgt)


def _reduce(P, G: Group):
    P = _obj(P).copy()
    for i, d in enumerate(G.orders):
        if d:
            P[i] = [int(x) % d for x in P[i]]
    if G.ring.kind == "Zp":
        P = np.array([[int(x) % G.ring.p for x in row] for row in P], dtype=object).reshape(P.shape)
    return P


def is_zero_map(M, tgt: Group) -> bool:
    M = _reduce(M, tgt)
    return not any(int(x) != 0 if tgt.ring.kind != "Q" else x != 0 for x in M.flat)


def kernel_lattice(M, src: Group, tgt: Group) -> np.ndarray:
    """Generators (in Z^{k_src}) of the preimage of the relations of tgt."""
    M = _obj(M, (tgt.k, src.k))
    R = tgt.relations()
    block = np.concatenate([M, -R], axis=1) if R.size else M
    K = _lattice_kernel(block) if block.shape[0] else np.eye(block.shape[1], dtype=object)
    return K[: src.k]


def is_injective(M, src: Group, tgt: Group) -> bool:
    if src.ring.is_field:
        return _field_rank(M, src.ring) == src.k
    K = kernel_lattice(M, src, tgt)
    R = src.relations()
    return all(_solve_lattice(R, K[:, j]) is not None for j in range(K.shape[1]))


def is_surjective(M, src: Group, tgt: Group) -> bool:
    if src.ring.is_field:
        return _field_rank(M, src.ring) == tgt.k
    M = _obj(M, (tgt.k, src.k))
    R = tgt.relations()
    L = np.concatenate([M, R], axis=1) if R.size else M
    return all(_solve_lattice(L, np.eye(tgt.k, dtype=object)[:, i]) is not None for i in range(tgt.k))


def is_iso(M, src: Group, tgt: Group) -> bool:
    return is_injective(M, src, tgt) and is_surjective(M, src, tgt)


def inverse_map(M, src: Group, tgt: Group) -> np.ndarray:
    """Inverse of an isomorphism src -> tgt, as a matrix tgt -> src."""
    if not is_iso(M, src, tgt):
        raise ValueError("map is not an isomorphism")
    if src.ring.is_field:
        ring = src.ring
        A = ring.array(_as_intobj(M) if ring.kind == "Q" else np.asarray(M, dtype=np.int64))
        nf = normal_form(A, ring)
        # U A V = I  =>  A^-1 = V U
        return _reduce(_obj(nf.V).dot(_obj(nf.U)), src)
    M = _obj(M, (tgt.k, src.k))
    R = tgt.relations()
    L = np.concatenate([M, R], axis=1) if R.size else M
    cols = []
    for i in range(tgt.k):
        y = _solve_lattice(L, np.eye(tgt.k, dtype=object)[:, i])
        cols.append(y[: src.k])
    inv = np.stack(cols, axis=1) if cols else np.zeros((src.k, 0), dtype=object)
    return _reduce(inv, src)


@dataclass
class ExactnessReport:
    exact: bool
    nodes: list = field(default_factory=list)  # per interior node: dict


def check_exact(groups: list[Group], maps: list) -> ExactnessReport:
    """Exactness at every interior node of G0 -> G1 -> ... -> Gn."""
    nodes = []
    ok_all = True
    for i in range(1, len(groups) - 1):
        f, g = maps[i - 1], maps[i]
        A, B, C = groups[i - 1], groups[i], groups[i + 1]
        comp_zero = is_zero_map(compose_maps(g, f, C), C) if B.k else True
        if B.ring.is_field:
            rk_f = _field_rank(f, B.ring) if np.asarray(f).size else 0
            rk_g = _field_rank(g, B.ring) if np.asarray(g).size else 0
            ker = B.k - rk_g
            ok = comp_zero and ker == rk_f
            nodes.append({"node": i, "ker_dim": ker, "im_dim": rk_f, "composite_zero": comp_zero, "exact": ok})
        else:
            K = kernel_lattice(g, B, C) if B.k else np.zeros((0, 0), dtype=object)
            f = _obj(f, (B.k, A.k))
            R = B.relations()
            L = np.concatenate([f, R], axis=1) if R.size else f
            missing = [j for j in range(K.shape[1]) if _solve_lattice(L, K[:, j]) is None] if B.k else []
            ok = comp_zero and not missing
            nodes.append({"node": i, "kernel_gens": int(K.shape[1]), "outside_image": len(missing),
                          "composite_zero": comp_zero, "exact": ok})
        ok_all = ok_all and ok
    return ExactnessReport(ok_all, nodes)


@dataclass
class TowerReport:
    groups: list
    isos: list
    stabilized_at: int | None

    @property
    def stabilized(self) -> bool:
        return self.stabilized_at is not None

    @property
    def limit(self):
        return self.groups[-1] if self.stabilized else None


def tower_limit(groups: list, maps: list, k: int = 2, direction: str = "auto") -> TowerReport:
    """Least index after which all maps of the tower are isomorphisms.

    ``maps[i]`` connects entries i and i+1.  ``direction`` is "forward"
    (i -> i+1), "backward" (i+1 -> i) or "auto", which reads it off the
    shape and prefers forward for square matrices.  At least ``k``
    consecutive isomorphisms are required; this is a heuristic for the
    limit, not a proof of stabilization.
    """
    gs = [Group.of(g) if isinstance(g, HomologyGroup) else g for g in groups]
    isos = []
    for i, M in enumerate(maps):
        M = np.asarray(M)
        a, b = gs[i], gs[i + 1]
        fwd = direction == "forward" or (direction == "auto" and M.shape == (b.k, a.k))
        if fwd and M.shape == (b.k, a.k):
            isos.append(is_iso(M, a, b))
        elif not fwd and M.shape == (a.k, b.k):
            isos.append(is_iso(M, b, a))
        else:
            raise ValueError(f"tower map {i} has shape {M.shape}, groups have {a.k} and {b.k} generators")
    stab = None
    for i in range(len(isos)):
        if all(isos[i:]) and len(isos) - i >= k:
            stab = i
            break
    return TowerReport(list(groups), isos, stab)
