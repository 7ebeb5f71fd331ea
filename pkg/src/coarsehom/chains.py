"""Coarse chain and cochain complexes built from ordered tuples.

At level n the degree-p basis is every (p+1)-tuple (x_0, ..., x_p) whose
entries are pairwise E_n-related; tuples with repeated entries are ordinary
basis elements.  Relative, windowed and equivariant variants are quotients or
subcomplexes of this one, assembled as integer matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from .core import CapExceeded, CoarseSpace, size_cap
from .linalg import ZZ, Ring

# ---------------------------------------------------------------------------
# Chain-level objects (dicts from tuples to coefficients)


@dataclass
class CoarseChain:
    """Finite formal sum of point tuples of length degree+1."""

    degree: int
    coeffs: dict = field(default_factory=dict)
    ring: Ring = ZZ

    def __post_init__(self):
        self.coeffs = _clean(self.coeffs, self.ring)
        for t in self.coeffs:
            if len(t) != self.degree + 1:
                raise ValueError(f"tuple {t} has the wrong length for degree {self.degree}")

    def __add__(self, other):
        return CoarseChain(self.degree, _add(self.coeffs, other.coeffs), self.ring)

    def __sub__(self, other):
        return CoarseChain(self.degree, _add(self.coeffs, other.coeffs, -1), self.ring)

    def __eq__(self, other):
        return isinstance(other, CoarseChain) and self.degree == other.degree and self.coeffs == other.coeffs

    def support(self) -> frozenset:
        return frozenset(x for t in self.coeffs for x in t)

    def is_zero(self) -> bool:
        return not self.coeffs


@dataclass
class CoarseCochain:
    """Finitely supported function on (degree+1)-tuples (zero elsewhere)."""

    degree: int
    values: dict = field(default_factory=dict)
    ring: Ring = ZZ

    def __post_init__(self):
        self.values = _clean(self.values, self.ring)

    def __call__(self, t) -> object:
        return self.values.get(tuple(t), 0)

    def __add__(self, other):
        return CoarseCochain(self.degree, _add(self.values, other.values), self.ring)

    def __sub__(self, other):
        return CoarseCochain(self.degree, _add(self.values, other.values, -1), self.ring)

    def __eq__(self, other):
        return isinstance(other, CoarseCochain) and self.degree == other.degree and self.values == other.values


def _clean(d, ring):
    out = {}
    for k, v in d.items():
        v = ring.coerce(v)
        if v != 0:
            out[tuple(k)] = v
    return out


def _add(a, b, sign=1):
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0) + sign * v
    return out


def boundary(c: CoarseChain) -> CoarseChain:
    """d(x_0..x_p) = sum_i (-1)^i (x_0..^x_i..x_p)."""
    if c.degree == 0:
        return CoarseChain(-1, {}, c.ring)
    out: dict = {}
    for t, v in c.coeffs.items():
        for i in range(len(t)):
            face = t[:i] + t[i + 1:]
            out[face] = out.get(face, 0) + (-1) ** i * v
    return CoarseChain(c.degree - 1, out, c.ring)


def coboundary(phi: CoarseCochain, domain: Iterable[tuple]) -> CoarseCochain:
    """(d phi)(x_0..x_{p+1}) = sum_i (-1)^i phi(..^x_i..), evaluated on ``domain``."""
    out = {}
    for t in domain:
        s = 0
        for i in range(len(t)):
            s += (-1) ** i * phi(t[:i] + t[i + 1:])
        if s:
            out[tuple(t)] = s
    return CoarseCochain(phi.degree + 1, out, phi.ring)


def pushforward(c: CoarseChain, f) -> CoarseChain:
    """f_*(x_0..x_p) = (f x_0, ..., f x_p); ``f`` is an index array or callable."""
    fn = f if callable(f) else (lambda x: int(f[x]))
    out: dict = {}
    for t, v in c.coeffs.items():
        img = tuple(fn(x) for x in t)
        out[img] = out.get(img, 0) + v
    return CoarseChain(c.degree, out, c.ring)


def pullback(phi: CoarseCochain, f, domain: Iterable[tuple]) -> CoarseCochain:
    fn = f if callable(f) else (lambda x: int(f[x]))
    return CoarseCochain(phi.degree, {t: phi(tuple(fn(x) for x in t)) for t in domain}, phi.ring)


def pair_level(X: CoarseSpace, t: tuple) -> int | None:
    """Least level at which all entries of t are pairwise related."""
    if len(t) < 2:
        return 0
    idx = list(t)
    return X.chain.least_level(_full(X.size, idx))


def _full(size, idx):
    M = np.zeros((size, size), dtype=bool)
    M[np.ix_(idx, idx)] = True
    return M


# ---------------------------------------------------------------------------
# Tuple enumeration


def enumerate_tuples(E: np.ndarray, p: int, points: Iterable[int] | None = None, cap: int | None = None) -> list[tuple]:
    """All (p+1)-tuples with pairwise E-related entries, in lexicographic order."""
    n = E.shape[0]
    sym = E & E.T
    allowed = np.zeros(n, dtype=bool)
    allowed[list(range(n)) if points is None else list(points)] = True
    cap = cap or size_cap()
    out: list[tuple] = []

    def rec(prefix, mask):
        if len(prefix) == p + 1:
            out.append(tuple(prefix))
            if len(out) > cap:
                raise CapExceeded(f"more than {cap} tuples in degree {p}")
            return
        for y in np.nonzero(mask)[0].tolist():
            rec(prefix + [y], mask & sym[y])

    rec([], allowed.copy())
    return out


# ---------------------------------------------------------------------------
# Assembled complexes


@dataclass
class GradedComplex:
    """Free complex over a ring, in chain convention.

    ``bases[p]`` lists folded basis elements; each is a list of
    ``(unfolded key, sign)`` where an unfolded key is ``(tuple, j)`` with j an
    index into the coefficient basis.  ``d[p]`` (p >= 1) is the integer matrix
    of the boundary C_p -> C_{p-1}.  A cochain complex uses the same data:
    its coboundary C^p -> C^{p+1} is ``d[p+1].T``.
    """

    space_size: int
    kind: str
    ring: Ring
    bases: list
    d: list
    simplicial: bool = False
    killed_sets: tuple = ()
    variant: str = "plain"
    level: int = 0
    flags: dict = field(default_factory=dict)
    all_keys: list | None = None

    def __post_init__(self):
        if self.all_keys is None:
            self.all_keys = [set(key for orb in basis for key, _ in orb) for basis in self.bases]
        self._index = []
        for basis in self.bases:
            idx = {}
            for k, orbit in enumerate(basis):
                key, sign = orbit[0]
                idx[key] = k
            self._index.append(idx)

    @property
    def top(self) -> int:
        return len(self.bases) - 1

    def rank(self, p: int) -> int:
        return len(self.bases[p]) if 0 <= p <= self.top else 0

    def valid_degrees(self) -> range:
        """Degrees whose (co)homology is determined by the truncation."""
        return range(0, self.top)

    def sparse_boundary(self, p: int):
        """C_p -> C_{p-1} as a sparse matrix (zero outside the stored range)."""
        if p <= 0 or p > self.top:
            return sp.csc_matrix((self.rank(p - 1), self.rank(p)), dtype=np.int64)
        return self.d[p]

    def boundary_matrix(self, p: int) -> np.ndarray:
        """C_p -> C_{p-1} as a dense integer array."""
        return self.sparse_boundary(p).toarray()

    def differential_out(self, p: int, sparse: bool = False):
        """Map leaving degree p in this complex's own direction."""
        M = self.sparse_boundary(p) if self.kind == "chain" else self.sparse_boundary(p + 1).T.tocsc()
        return M if sparse else M.toarray()

    def differential_in(self, p: int, sparse: bool = False):
        M = self.sparse_boundary(p + 1) if self.kind == "chain" else self.sparse_boundary(p).T.tocsc()
        return M if sparse else M.toarray()

    def killed(self, t: tuple) -> bool:
        return any(all(x in S for x in t) for S in self.killed_sets)

    def key_index(self, p: int, key) -> int | None:
        return self._index[p].get(key)

    def vector(self, p: int, chain: CoarseChain, j: int = 0) -> np.ndarray:
        """Coordinates of a plain chain (must be a combination of basis keys)."""
        v = np.zeros(self.rank(p), dtype=object)
        for t, c in chain.coeffs.items():
            if self.simplicial:
                t, s = canonical_simplex(t)
                if s == 0:
                    continue
                c = c * s
            k = self.key_index(p, (t, j))
            if k is None:
                if self.killed(t):
                    continue
                raise KeyError(f"tuple {t} is not a basis element in degree {p}")
            v[k] += c
        return v

    def check_d_squared(self) -> bool:
        for p in range(2, self.top + 1):
            if self.rank(p - 2) and self.rank(p) and (self.d[p - 1] @ self.d[p]).count_nonzero():
                return False
        return True

    def manifest(self) -> dict:
        return {"kind": self.kind, "ring": str(self.ring), "variant": self.variant, "level": self.level,
                "ranks": [self.rank(p) for p in range(self.top + 1)], "simplicial": self.simplicial,
                "flags": self.flags}


def canonical_simplex(t: tuple):
    """Sorted vertex tuple and the sign of the sorting permutation (0 if degenerate)."""
    if len(set(t)) != len(t):
        return tuple(sorted(t)), 0
    perm = sorted(range(len(t)), key=lambda i: t[i])
    sign = 1
    seen = [False] * len(t)
    for i in range(len(t)):
        if not seen[i]:
            j, length = i, 0
            while not seen[j]:
                seen[j] = True
                j = perm[j]
                length += 1
            if length % 2 == 0:
                sign = -sign
    return tuple(sorted(t)), sign


def _faces(t, simplicial):
    for i in range(len(t)):
        yield t[:i] + t[i + 1:], (-1) ** i


def _fold_orbits(keys_by_degree, action_perms, coeff_maps, ring):
    """Orbits of unfolded keys with sign bookkeeping.

    Returns per degree a list of orbits [(key, sign), ...] (representative
    first, sign +1) and the number of sign-inconsistent orbits dropped.
    """
    char2 = ring.characteristic == 2
    out, dropped = [], []
    for keys in keys_by_degree:
        keyset = set(keys)
        seen = set()
        orbits, bad = [], 0
        for key in keys:
            if key in seen:
                continue
            sign_of = {key: 1}
            queue = [key]
            consistent = True
            while queue:
                k = queue.pop()
                t, j = k
                for g, perm in action_perms.items():
                    jj, s = coeff_maps[g][j]
                    nt = tuple(int(perm[x]) for x in t)
                    nk = (nt, jj)
                    ns = sign_of[k] * s
                    if nk not in keyset:
                        raise ValueError("the action does not preserve the complex (non-invariant subset?)")
                    if nk in sign_of:
                        if sign_of[nk] != ns and not char2:
                            consistent = False
                    else:
                        sign_of[nk] = ns
                        queue.append(nk)
            seen.update(sign_of)
            if consistent:
                if char2:
                    sign_of = {k: 1 for k in sign_of}
                orbits.append(sorted(sign_of.items(), key=lambda kv: (kv[0] != key, kv[0])))
            else:
                bad += 1
        out.append(orbits)
        dropped.append(bad)
    return out, dropped


def _matrix_from_orbits(src_orbits, tgt_index, tgt_all, image_fn, killed_fn, nrows):
    """Folded matrix (sparse): column k is the folded image of the k-th source orbit sum."""
    rows, cols, vals = [], [], []
    for col, orbit in enumerate(src_orbits):
        acc: dict = {}
        for (t, j), s in orbit:
            for (nt, nj), c in image_fn(t, j):
                acc[(nt, nj)] = acc.get((nt, nj), 0) + s * c
        for key, c in acc.items():
            if c == 0:
                continue
            row = tgt_index.get(key)
            if row is not None:
                rows.append(row)
                cols.append(col)
                vals.append(c)
            elif key not in tgt_all and not killed_fn(key[0]):
                raise KeyError(f"image {key[0]} lies outside the target complex (level too small?)")
    return sp.csc_matrix((np.array(vals, dtype=np.int64), (rows, cols)), shape=(nrows, len(src_orbits)),
                         dtype=np.int64)


def assemble(X: CoarseSpace, level: int, ring: Ring = ZZ, kind: str = "chain", variant: str = "plain",
             relative: Iterable[int] | None = None, collar: Iterable[int] | None = None,
             action=None, top: int = 2, points: Iterable[int] | None = None) -> GradedComplex:
    """Ordered-tuple complex of X at ``level``, degrees 0..top.

    ``relative`` quotients chains by tuples inside A (for cochains: keeps the
    cochains vanishing on A); ``collar`` does the same for a window collar.
    ``variant`` is ``plain``, ``invariant`` (chains) or ``coinvariant``
    (cochains); the last two need ``action``.
    """
    if kind not in ("chain", "cochain"):
        raise ValueError("kind is 'chain' or 'cochain'")
    if variant not in ("plain", "invariant", "coinvariant"):
        raise ValueError(f"unknown variant {variant!r}")
    if variant == "invariant" and kind != "chain" or variant == "coinvariant" and kind != "cochain":
        raise ValueError("invariant pairs with chains, coinvariant with cochains")
    killed_sets = tuple(frozenset(S) for S in (relative, collar) if S is not None)
    E = X.level(level).matrix
    k = 1 if action is None else action.coeff_rank
    keys_by_degree = []
    for p in range(top + 1):
        tuples = [t for t in enumerate_tuples(E, p, points) if not any(all(x in S for x in t) for S in killed_sets)]
        keys_by_degree.append([(t, j) for t in tuples for j in range(k)])
    flags = {}
    all_keys = [set(keys) for keys in keys_by_degree]
    if variant == "plain":
        orbits = [[[(key, 1)] for key in keys] for keys in keys_by_degree]
    else:
        if action is None:
            raise ValueError("equivariant variants need an action")
        on = action.on(X)
        if not on.total:
            raise ValueError("equivariant complexes need an action by bijections of the table")
        for S in killed_sets:
            if not on.invariant(S):
                raise ValueError("relative subset or collar is not invariant under the action")
        inv_perms = {g: np.argsort(p) for g, p in on.perms.items()}
        coeff_maps = {g: action.coeff(g) for g in on.perms}
        orbits, dropped = _fold_orbits(keys_by_degree, inv_perms, coeff_maps, ring)
        if any(dropped):
            flags["sign_inconsistent_orbits"] = dropped
            if variant == "coinvariant" and ring.kind == "Z":
                # literal coinvariants would carry a Z/2 summand per such orbit
                flags["coinvariant_torsion_dropped"] = True
    d = [sp.csc_matrix((0, len(orbits[0])), dtype=np.int64)]
    for p in range(1, top + 1):
        tgt_index = {orb[0][0]: r for r, orb in enumerate(orbits[p - 1])}

        def image(t, j):
            for face, s in _faces(t, False):
                yield (face, j), s

        def killed(t):
            return any(all(x in S for x in t) for S in killed_sets)

        d.append(_matrix_from_orbits(orbits[p], tgt_index, all_keys[p - 1], image, killed, len(orbits[p - 1])))
    return GradedComplex(X.size, kind, ring, orbits, d, False, killed_sets, variant, level, flags, all_keys)


def simplicial_complex_chains(simplices: list, ring: Ring = ZZ, kind: str = "chain",
                              relative: Iterable[int] | None = None, collar: Iterable[int] | None = None,
                              space_size: int = 0, level: int = 0) -> GradedComplex:
    """Oriented simplicial (co)chains of a complex given as sorted vertex tuples per dimension."""
    killed_sets = tuple(frozenset(S) for S in (relative, collar) if S is not None)

    def killed(t):
        return any(all(x in S for x in t) for S in killed_sets)

    bases = [[[((s, 0), 1)] for s in dim if not killed(s)] for dim in simplices]
    d = [sp.csc_matrix((0, len(bases[0])), dtype=np.int64)]
    for p in range(1, len(bases)):
        index = {orb[0][0]: r for r, orb in enumerate(bases[p - 1])}
        rows, cols, vals = [], [], []
        for col, orb in enumerate(bases[p]):
            s = orb[0][0][0]
            for face, sign in _faces(s, True):
                r = index.get((face, 0))
                if r is not None:
                    rows.append(r)
                    cols.append(col)
                    vals.append(sign)
        d.append(sp.csc_matrix((np.array(vals, dtype=np.int64), (rows, cols)),
                               shape=(len(bases[p - 1]), len(bases[p])), dtype=np.int64))
    return GradedComplex(space_size, kind, ring, bases, d, True, killed_sets, "plain", level, {})


def chain_map_matrix(src: GradedComplex, tgt: GradedComplex, point_map, p: int) -> np.ndarray:
    """Matrix of the map induced in degree p by a map of point tables.

    For chain complexes this is f_*: C_p(src) -> C_p(tgt).  For cochain
    complexes it is f^*: C^p(tgt) -> C^p(src).  Simplicial complexes drop
    degenerate images and reorder vertices with the permutation sign.
    """
    if src.kind != tgt.kind:
        raise ValueError("chain maps go between complexes of the same kind")
    f = np.asarray(point_map, dtype=np.int64)
    if p > src.top or p > tgt.top:
        raise ValueError("degree beyond the assembled range")
    tgt_index = {orb[0][0]: r for r, orb in enumerate(tgt.bases[p])}

    def image(t, j):
        nt = tuple(int(f[x]) for x in t)
        if tgt.simplicial:
            nt, s = canonical_simplex(nt)
            if s == 0:
                return
            yield (nt, j), s
        else:
            yield (nt, j), 1

    M = _matrix_from_orbits(src.bases[p], tgt_index, tgt.all_keys[p], image, tgt.killed, tgt.rank(p)).toarray()
    return M if src.kind == "chain" else M.T


def prism_matrix(src: GradedComplex, tgt: GradedComplex, terms_of, H, p: int) -> np.ndarray:
    """Matrix of the generalized prism in degree p.

    Chains: P: C_p(src) -> C_{p+1}(tgt) with dP + Pd = g_* - f_*.
    Cochains: P: C^{p+1}(tgt) -> C^p(src) with dP + Pd = f^* - g^*.
    ``terms_of`` is a schedule's merge (tuple -> [(i(l), cylinder tuple)]).
    """
    if src.kind != tgt.kind:
        raise ValueError("prism between complexes of different kinds")
    Ha = np.asarray(H, dtype=np.int64)
    tgt_index = {orb[0][0]: r for r, orb in enumerate(tgt.bases[p + 1])}

    def image(t, j):
        for i_l, cyl in terms_of(t):
            nt = tuple(int(Ha[z]) for z in cyl)
            sign = (-1) ** i_l
            if tgt.simplicial:
                nt, s = canonical_simplex(nt)
                if s == 0:
                    continue
                sign *= s
            yield (nt, j), sign

    M = _matrix_from_orbits(src.bases[p], tgt_index, tgt.all_keys[p + 1], image, tgt.killed,
                            tgt.rank(p + 1)).toarray()
    return M if src.kind == "chain" else -M.T


def identity_matrix_check(M: np.ndarray) -> bool:
    return M.shape[0] == M.shape[1] and np.array_equal(M, np.eye(M.shape[0], dtype=M.dtype))


# ---------------------------------------------------------------------------
# Prisms, flasque contraction, excision retraction


def prism_chain(c: CoarseChain, terms_of, H) -> CoarseChain:
    """P_H(x) = sum_l (-1)^{i(l)} H_*(x_l).

    ``terms_of(t)`` yields ``(i(l), cylinder tuple)`` for the merged
    subdivision of t; ``H`` maps cylinder indices to target indices.
    """
    Hf = H if callable(H) else (lambda z: int(H[z]))
    out: dict = {}
    for t, v in c.coeffs.items():
        for i_l, cyl in terms_of(t):
            img = tuple(Hf(z) for z in cyl)
            out[img] = out.get(img, 0) + (-1) ** i_l * v
    return CoarseChain(c.degree + 1, out, c.ring)


def prism_cochain(phi: CoarseCochain, terms_of, H, domain: Iterable[tuple]) -> CoarseCochain:
    """Cochain prism, normalised so that d P + P d = f^* - g^*.

    The value on x is -sum_l (-1)^{i(l)} phi(H_*(x_l)), i.e. minus the dual
    of the chain prism (whose identity reads dP + Pd = g_* - f_*).
    """
    Hf = H if callable(H) else (lambda z: int(H[z]))
    out = {}
    for t in domain:
        s = 0
        for i_l, cyl in terms_of(tuple(t)):
            s += (-1) ** i_l * phi(tuple(Hf(z) for z in cyl))
        if s:
            out[tuple(t)] = -s
    return CoarseCochain(phi.degree - 1, out, phi.ring)


class HorizonError(ValueError):
    pass


def flasque_contraction(c: CoarseChain, phi, horizon: int, collar: Iterable[int] | None = None) -> CoarseChain:
    """s(x) = sum_{n<N} sum_i (-1)^i (phi^{n+1}x_0..phi^{n+1}x_i, phi^n x_i..phi^n x_p).

    Exactly d s + s d = id - (phi^N)_*.  When ``collar`` is given the
    horizon must push every support point into it, so that the identity
    d s + s d = id holds in the complex relative to the collar.
    """
    fn = phi if callable(phi) else (lambda x: int(phi[x]) if int(phi[x]) >= 0 else None)
    traj: dict = {}
    for x in c.support():
        path = [x]
        for _ in range(horizon):
            y = fn(path[-1])
            if y is None or y < 0:
                raise HorizonError(f"trajectory of point {x} leaves the window before the horizon")
            path.append(y)
        traj[x] = path
    if collar is not None:
        col = frozenset(collar)
        for x, path in traj.items():
            if path[-1] not in col:
                raise HorizonError(f"horizon {horizon} leaves point {x} at {path[-1]}, outside the collar")
    out: dict = {}
    for t, v in c.coeffs.items():
        p = len(t) - 1
        for n in range(horizon):
            for i in range(p + 1):
                tup = tuple(traj[x][n + 1] for x in t[: i + 1]) + tuple(traj[x][n] for x in t[i:])
                out[tup] = out.get(tup, 0) + (-1) ** i * v
    return CoarseChain(c.degree + 1, out, c.ring)


def flasque_power(c: CoarseChain, phi, horizon: int) -> CoarseChain:
    fn = phi if callable(phi) else (lambda x: int(phi[x]))

    def power(x):
        for _ in range(horizon):
            x = fn(x)
        return x

    return pushforward(c, power)


def retraction_cochain_prism(phi: CoarseCochain, r, domain: Iterable[tuple]) -> CoarseCochain:
    """P(phi)(x_0..x_{p-1}) = sum_l (-1)^l phi(x_0..x_l, r x_l..r x_{p-1}).

    With this sign, d P + P d = r^* - id on cochains.
    """
    rf = r if callable(r) else (lambda x: int(r[x]))
    out = {}
    for t in domain:
        t = tuple(t)
        s = 0
        for l in range(len(t)):
            s += (-1) ** l * phi(t[: l + 1] + tuple(rf(x) for x in t[l:]))
        if s:
            out[t] = s
    return CoarseCochain(phi.degree - 1, out, phi.ring)


@dataclass
class Retraction:
    """r: X -> X minus C, identity off C, with per-level distance and control witnesses."""

    r: np.ndarray
    distance_levels: dict  # n -> least level m with (x, r x) in F_m on the n-th shell
    control_levels: dict  # n -> least level holding (r x r)(E_n restricted to Pen_n(X minus C))

    @property
    def ok(self) -> bool:
        return all(v is not None for v in self.distance_levels.values()) and \
            all(v is not None for v in self.control_levels.values())


def excision_retraction(X: CoarseSpace, A: Iterable[int], C: Iterable[int], action=None) -> Retraction:
    """Send each point of C to a nearest point of A minus C (least level, then index).

    With an action, one representative per orbit is placed and the choice is
    transported along the orbit; stabilizers must fix the chosen target.
    """
    A, C = frozenset(A), frozenset(C)
    if not C <= A:
        raise ValueError("C must be a subset of A")
    if C and not (A - C):
        raise ValueError("A minus C is empty; there is nowhere to retract to")
    L = X.chain.level_matrix
    targets = np.array(sorted(A - C), dtype=np.int64)
    r = np.arange(X.size, dtype=np.int64)
    if action is None:
        for x in sorted(C):
            lv = L[x, targets]
            r[x] = int(targets[int(np.argmin(lv))])
    else:
        on = action.on(X)
        elems, closed = on.elements(cap=max(action.max_word, X.size))
        if not (closed and on.total):
            raise ValueError("equivariant retraction needs a finite action by bijections")
        done = set()
        for x in sorted(C):
            if x in done:
                continue
            stab = [arr for _, arr in elems if arr[x] == x]
            order = targets[np.lexsort((targets, L[x, targets]))]
            y = next((int(t) for t in order if all(arr[t] == t for arr in stab)), None)
            if y is None:
                raise ValueError(f"no stabilizer-fixed retraction target for point {X.labels[x]!r}")
            for _, arr in elems:
                r[arr[x]] = arr[y]
                done.add(int(arr[x]))
    # witnesses per shell Pen_n(X minus C) minus Pen_{n-1}
    outside = frozenset(range(X.size)) - C
    dist, ctrl = {}, {}
    prev = frozenset(outside)
    for n in range(X.depth + 1):
        pen = X.penumbra(n, outside)
        shell = sorted(pen - prev) if n else sorted(pen)
        if shell:
            M = np.zeros((X.size, X.size), dtype=bool)
            M[shell, r[shell]] = True
            dist[n] = X.chain.least_level(M)
        idx = sorted(pen)
        E = X.level(n).matrix[np.ix_(idx, idx)]
        ii, jj = np.nonzero(E)
        T = np.zeros((X.size, X.size), dtype=bool)
        T[r[np.array(idx)[ii]], r[np.array(idx)[jj]]] = True
        ctrl[n] = X.chain.least_level(T)
        prev = pen
    return Retraction(r, dist, ctrl)
