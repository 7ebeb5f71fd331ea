"""Finite coarse spaces: entourages, chains of entourages, penumbras, boundedness.

A coarse space here is a finite point table (a *window* of an infinite space,
or a genuinely finite space) together with an increasing chain of entourages
E_0 = Diag <= E_1 <= ... <= E_depth.  Entourages are sets of ordered pairs of
point indices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np


class OwnerMismatch(ValueError):
    """Raised when entourages or subsets from different point tables meet."""


class CapExceeded(RuntimeError):
    """A size cap (points, pairs, simplices) was hit."""


def size_cap(default: int = 2_000_000) -> int:
    import os

    raw = os.environ.get("COARSEHOM_CAP")
    return int(raw) if raw else default


@dataclass(frozen=True, eq=False)
class Entourage:
    """A relation on ``size`` points: sorted ordered index pairs, or a boolean matrix.

    Entourages built from matrices keep the matrix and list their pairs only
    when asked.
    """

    size: int
    pairs_given: tuple | None = ()
    owner: str | None = None

    @classmethod
    def from_pairs(cls, size: int, pairs: Iterable, owner: str | None = None) -> "Entourage":
        ps = sorted({(int(a), int(b)) for a, b in pairs})
        for a, b in ps:
            if not (0 <= a < size and 0 <= b < size):
                raise IndexError(f"pair {(a, b)} outside a table of {size} points")
        return cls(size, tuple(ps), owner)

    @classmethod
    def from_matrix(cls, M: np.ndarray, owner: str | None = None) -> "Entourage":
        M = np.array(M, dtype=bool)
        M.setflags(write=False)
        ent = cls(M.shape[0], None, owner)
        ent.__dict__["matrix"] = M
        return ent

    @classmethod
    def diagonal(cls, size: int, owner: str | None = None) -> "Entourage":
        return cls(size, tuple((i, i) for i in range(size)), owner)

    @cached_property
    def pairs(self) -> tuple:
        if self.pairs_given is not None:
            return self.pairs_given
        ii, jj = np.nonzero(self.matrix)
        return tuple(zip(ii.tolist(), jj.tolist()))

    @cached_property
    def matrix(self) -> np.ndarray:
        M = np.zeros((self.size, self.size), dtype=bool)
        if self.pairs_given:
            a = np.array(self.pairs_given)
            M[a[:, 0], a[:, 1]] = True
        M.setflags(write=False)
        return M

    def __eq__(self, other) -> bool:
        if not isinstance(other, Entourage):
            return NotImplemented
        return self.size == other.size and bool(np.array_equal(self.matrix, other.matrix))

    def __hash__(self) -> int:
        return hash((self.size, self.matrix.tobytes()))

    def __contains__(self, pair) -> bool:
        a, b = pair
        return 0 <= a < self.size and 0 <= b < self.size and bool(self.matrix[a, b])

    def __len__(self) -> int:
        return int(np.count_nonzero(self.matrix))

    def __iter__(self):
        return iter(self.pairs)

    def issubset(self, other: "Entourage") -> bool:
        _same_table(self, other)
        return not np.any(self.matrix & ~other.matrix)

    def union(self, other: "Entourage") -> "Entourage":
        _same_table(self, other)
        return Entourage.from_matrix(self.matrix | other.matrix, self.owner or other.owner)

    def off_diagonal(self) -> int:
        return len(self) - int(np.count_nonzero(np.diag(self.matrix)))

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.matrix, self.matrix.T))

    def restrict(self, idx: Sequence[int], owner: str | None = None) -> "Entourage":
        idx = list(idx)
        return Entourage.from_matrix(self.matrix[np.ix_(idx, idx)], owner)


def _same_table(E: Entourage, F: Entourage):
    if E.size != F.size or (E.owner and F.owner and E.owner != F.owner):
        raise OwnerMismatch(f"entourages live on different tables ({E.owner}/{E.size} vs {F.owner}/{F.size})")


def compose(E: Entourage, F: Entourage) -> Entourage:
    """E o F = {(x, z) : (x, y) in E and (y, z) in F for some y}."""
    _same_table(E, F)
    return Entourage.from_matrix(bool_matmul(E.matrix, F.matrix), E.owner or F.owner)


def bool_matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Relational product of boolean matrices (float32 BLAS; exact below 2**24 columns)."""
    return (A.astype(np.float32) @ B.astype(np.float32)) > 0


def inverse(E: Entourage) -> Entourage:
    return Entourage.from_matrix(E.matrix.T, E.owner)


def penumbra(E: Entourage, A: Iterable[int]) -> frozenset:
    """Pen_E(A) = {x : (x, y) in E for some y in A}."""
    A = sorted(set(A))
    if not A:
        return frozenset()
    if A[0] < 0 or A[-1] >= E.size:
        raise OwnerMismatch("subset index outside the entourage's table")
    hit = E.matrix[:, A].any(axis=1)
    return frozenset(np.nonzero(hit)[0].tolist())


def ball(E: Entourage, x: int) -> frozenset:
    return penumbra(E, [x])


@dataclass(frozen=True)
class EntourageChain:
    levels: tuple  # of Entourage; levels[0] is the diagonal

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def __getitem__(self, n: int) -> Entourage:
        return self.levels[n]

    def __len__(self):
        return len(self.levels)

    def level_of(self, pair) -> int | None:
        """Least n with pair in E_n, if any."""
        for n, E in enumerate(self.levels):
            if pair in E:
                return n
        return None

    @cached_property
    def level_matrix(self) -> np.ndarray:
        """Entry (x, y) is the least level containing (x, y), or depth + 1."""
        size = self.levels[0].size
        L = np.full((size, size), self.depth + 1, dtype=np.int64)
        for n in range(self.depth, -1, -1):
            L[self.levels[n].matrix] = n
        return L

    def least_level(self, M: np.ndarray) -> int | None:
        """Least n with the boolean relation M inside E_n."""
        if not M.any():
            return 0
        n = int(self.level_matrix[M].max())
        return n if n <= self.depth else None


def normalize_levels(levels: Sequence[Entourage]) -> EntourageChain:
    """Symmetrize, add the diagonal and make the sequence increasing.

    Applying this to an already normalized chain returns it unchanged.
    """
    if not levels:
        raise ValueError("a chain needs at least one level")
    size = levels[0].size
    owner = levels[0].owner
    acc = np.eye(size, dtype=bool)
    out = []
    for E in levels:
        _same_table(levels[0], E)
        acc = acc | E.matrix | E.matrix.T
        out.append(Entourage.from_matrix(acc, owner))
    return EntourageChain(tuple(out))


def normalize_chain(generators: Sequence[Entourage], depth: int, size: int | None = None,
                    owner: str | None = None) -> EntourageChain:
    """Chain generated by a finite list of entourages.

    E_n is the n-fold composite of S_n = Diag u G_1 u G_1^-1 u ... u G_n u G_n^-1
    (generators past the end of the list are not added), so it contains every
    entourage built from G_1..G_n with at most n compositions, inversions and
    unions.  E_0 is the diagonal.
    """
    if size is None:
        if not generators:
            raise ValueError("size is required when there are no generators")
        size = generators[0].size
    for G in generators:
        if G.size != size:
            raise OwnerMismatch("generator on a different table")
    diag = np.eye(size, dtype=bool)
    levels = [Entourage.from_matrix(diag, owner)]
    S = diag.copy()
    P = diag
    for n in range(1, depth + 1):
        if n <= len(generators):
            G = generators[n - 1].matrix
            S = S | G | G.T
            P = S.copy()
            for _ in range(n - 1):
                P = bool_matmul(P, S)
        else:
            # S no longer changes, so S^n = S^(n-1) o S
            P = bool_matmul(P, S)
        levels.append(Entourage.from_matrix(P, owner))
    return normalize_levels(levels)


# ---------------------------------------------------------------------------
# Spaces


@dataclass(frozen=True)
class Ambient:
    """Where a point table comes from.

    ``kind`` is ``"finite"`` (the table is the whole space) or ``"window"``
    (the table is a radius-``radius`` window of the infinite space described
    by ``family`` and ``params``; it can be regenerated at other radii).
    """

    kind: str = "finite"
    family: str = "custom"
    radius: int = 0
    params: tuple = ()

    def param(self, key, default=None):
        return dict(self.params).get(key, default)


_FAMILIES: dict[str, Callable[..., "CoarseSpace"]] = {}


def register_family(name: str, builder: Callable[..., "CoarseSpace"]):
    """Register ``builder(radius, scales, **params)`` for window regeneration."""
    _FAMILIES[name] = builder


@dataclass(frozen=True, eq=False)
class CoarseSpace:
    labels: tuple
    chain: EntourageChain
    ambient: Ambient = Ambient()
    name: str = "X"
    metric: np.ndarray | None = field(default=None, repr=False)
    scales: tuple | None = None
    regen: Callable[[int], "CoarseSpace"] | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate point labels")
        if self.chain.levels[0].size != len(self.labels):
            raise ValueError("chain and point table sizes differ")

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def depth(self) -> int:
        return self.chain.depth

    @property
    def is_window(self) -> bool:
        return self.ambient.kind == "window"

    def level(self, n: int) -> Entourage:
        return self.chain[min(n, self.depth)]

    @cached_property
    def index(self) -> dict:
        return {lab: i for i, lab in enumerate(self.labels)}

    def indices(self, labels: Iterable) -> frozenset:
        try:
            return frozenset(self.index[lab] for lab in labels)
        except KeyError as exc:
            raise OwnerMismatch(f"label {exc.args[0]!r} is not a point of {self.name}") from None

    def select(self, predicate: Callable) -> frozenset:
        return frozenset(i for i, lab in enumerate(self.labels) if predicate(lab))

    def penumbra(self, n: int, A: Iterable[int]) -> frozenset:
        return penumbra(self.level(n), A)

    def regenerate(self, radius: int) -> "CoarseSpace":
        """The same family at another window radius."""
        if self.regen is not None:
            return self.regen(radius)
        if self.ambient.kind != "window":
            raise ValueError(f"{self.name} is a finite space; it has no window tower")
        builder = _FAMILIES.get(self.ambient.family)
        if builder is None:
            raise ValueError(f"no regeneration rule for family {self.ambient.family!r}")
        return builder(radius, self.scales, **dict(self.ambient.params))

    def subspace(self, idx: Iterable[int], name: str | None = None) -> "CoarseSpace":
        """Restriction of the structure to a subset (kept in index order)."""
        idx = sorted(set(idx))
        levels = tuple(E.restrict(idx) for E in self.chain.levels)
        metric = None if self.metric is None else self.metric[np.ix_(idx, idx)]
        return CoarseSpace(tuple(self.labels[i] for i in idx), EntourageChain(levels),
                           Ambient("finite", "subspace", self.ambient.radius, ()), name or f"{self.name}|sub",
                           metric, self.scales)

    def diameter_level(self) -> int | None:
        return self.chain.least_level(np.ones((self.size, self.size), dtype=bool))


def from_metric(labels: Sequence, dist, scales: Sequence[float], name: str = "X",
                ambient: Ambient = Ambient(), check: bool = True) -> CoarseSpace:
    """Metric chain: E_n = {(x, y) : d(x, y) <= scales[n]}.

    ``dist`` may contain ``inf`` (points in different coarse components).
    ``scales[0]`` should be 0 so that E_0 is the diagonal.
    """
    D = np.asarray(dist, dtype=float)
    n = len(labels)
    if D.shape != (n, n):
        raise ValueError("distance matrix shape does not match the labels")
    scales = tuple(float(s) for s in scales)
    if any(b <= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be strictly increasing")
    if check:
        check_metric(D)
    levels = []
    for s in scales:
        M = D <= s + 1e-12
        np.fill_diagonal(M, True)
        levels.append(Entourage.from_matrix(M, name))
    return CoarseSpace(tuple(labels), EntourageChain(tuple(levels)), ambient, name, D, scales)


def check_metric(D: np.ndarray):
    if np.any(np.diag(D) != 0):
        raise ValueError("metric: nonzero self-distance")
    if not np.array_equal(D, D.T):
        raise ValueError("metric: not symmetric")
    if np.any(D < 0):
        raise ValueError("metric: negative distance")
    off = D + np.eye(len(D))
    if np.any(off <= 0):
        raise ValueError("metric: distinct points at distance zero")
    with np.errstate(invalid="ignore"):
        for k in range(len(D)):
            via = D[:, k][:, None] + D[k, :][None, :]
            bad = D > via + 1e-9
            if bad.any():
                i, j = np.argwhere(bad)[0]
                raise ValueError(f"metric: triangle inequality fails for ({i}, {k}, {j})")


def from_generators(labels: Sequence, generators: Sequence[Entourage], depth: int, name: str = "X",
                    ambient: Ambient = Ambient()) -> CoarseSpace:
    chain = normalize_chain(generators, depth, len(labels), name)
    return CoarseSpace(tuple(labels), chain, ambient, name)


# ---------------------------------------------------------------------------
# Boundedness and excision


@dataclass(frozen=True)
class BoundedAt:
    level: int
    center: int
    known: bool = True


@dataclass(frozen=True)
class UnknownWithinDepth:
    depth: int
    known: bool = False


def is_bounded(X: CoarseSpace, K: Iterable[int]):
    """Least n such that K sits inside a single E_n-ball, if n <= depth."""
    K = sorted(set(K))
    if not K:
        return BoundedAt(0, -1)
    L = X.chain.level_matrix[:, K]  # L[c, k] = least level with (c, k)
    need = L.max(axis=1)
    c = int(np.argmin(need))
    n = int(need[c])
    if n > X.depth:
        return UnknownWithinDepth(X.depth)
    return BoundedAt(n, c)


def product(X: CoarseSpace, Y: CoarseSpace, name: str | None = None, cap: int | None = None) -> CoarseSpace:
    """Product structure: level n is E_n x F_n (depth = the smaller depth)."""
    cap = cap or size_cap(20_000)
    size = X.size * Y.size
    if size > cap:
        raise CapExceeded(f"product has {size} points (cap {cap})")
    depth = min(X.depth, Y.depth)
    name = name or f"{X.name}x{Y.name}"
    levels = tuple(Entourage.from_matrix(np.kron(X.level(n).matrix, Y.level(n).matrix), name)
                   for n in range(depth + 1))
    labels = tuple((a, b) for a in X.labels for b in Y.labels)
    regen = None
    if X.is_window or Y.is_window or X.regen or Y.regen:
        def regen(R, X=X, Y=Y):
            Xr = X.regenerate(R) if (X.is_window or X.regen) else X
            Yr = Y.regenerate(R) if (Y.is_window or Y.regen) else Y
            return product(Xr, Yr, name)
    kind = "window" if regen else "finite"
    radius = max(X.ambient.radius, Y.ambient.radius)
    return CoarseSpace(labels, EntourageChain(levels), Ambient(kind, "product", radius, ()), name, None, None, regen)


@dataclass(frozen=True)
class Excision:
    """Outcome of an excisiveness check.

    ``witness[n] = m`` records the least level m that works for level n;
    ``fails_at`` is the first level with no witness inside the depth.
    """

    witness: dict
    fails_at: int | None = None
    counterexample: int | None = None

    @property
    def ok(self) -> bool:
        return self.fails_at is None


def check_excisive(X: CoarseSpace, A: Iterable[int], B: Iterable[int]) -> Excision:
    """Cover form: Pen_n(A) n Pen_n(B) inside Pen_m(A n B)."""
    A, B = frozenset(A), frozenset(B)
    AB = A & B
    pens = [X.penumbra(m, AB) for m in range(X.depth + 1)]
    witness = {}
    for n in range(X.depth + 1):
        lhs = X.penumbra(n, A) & X.penumbra(n, B)
        m = next((m for m in range(X.depth + 1) if lhs <= pens[m]), None)
        if m is None:
            bad = min(lhs - pens[-1])
            return Excision(witness, n, bad)
        witness[n] = m
    return Excision(witness)


def check_excisive_subset(X: CoarseSpace, A: Iterable[int], C: Iterable[int]) -> Excision:
    """Subset form: Pen_n(A) minus C inside Pen_m(A minus C)."""
    A, C = frozenset(A), frozenset(C)
    AC = A - C
    pens = [X.penumbra(m, AC) for m in range(X.depth + 1)]
    witness = {}
    for n in range(X.depth + 1):
        lhs = X.penumbra(n, A) - C
        m = next((m for m in range(X.depth + 1) if lhs <= pens[m]), None)
        if m is None:
            return Excision(witness, n, min(lhs - pens[-1]))
        witness[n] = m
    return Excision(witness)


def lattice_metric(points: np.ndarray, norm: str = "max") -> np.ndarray:
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    diff = np.abs(P[:, None, :] - P[None, :, :])
    if norm == "max":
        return diff.max(axis=2)
    if norm == "l1":
        return diff.sum(axis=2)
    return np.sqrt((diff**2).sum(axis=2))


def ceil_scale(s: float) -> int:
    return int(math.ceil(s - 1e-9))
