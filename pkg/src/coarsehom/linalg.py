"""Exact linear algebra over the integers, prime fields and the rationals.

Everything here works on numpy arrays.  Integer arrays start as int64 and are
promoted to Python-object arrays (arbitrary precision) as soon as an update
could overflow, so results are always exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

_LIMIT = 2**62
_FLOAT_EXACT = 2**53


@dataclass(frozen=True)
class Ring:
    """Coefficient ring: ``Z``, ``Zp`` (with prime ``p``) or ``Q``."""

    kind: str = "Z"
    p: int = 0

    def __post_init__(self):
        if self.kind not in ("Z", "Zp", "Q"):
            raise ValueError(f"unknown ring {self.kind!r}")
        if self.kind == "Zp" and not _is_prime(self.p):
            raise ValueError(f"Zp needs a prime modulus, got {self.p}")

    @classmethod
    def parse(cls, text: str) -> "Ring":
        text = text.strip()
        if text in ("Z", "ZZ"):
            return cls("Z")
        if text in ("Q", "QQ"):
            return cls("Q")
        for prefix in ("Z/", "Zp", "Z_", "F"):
            if text.startswith(prefix) and text[len(prefix):].isdigit():
                return cls("Zp", int(text[len(prefix):]))
        raise ValueError(f"cannot parse ring {text!r}")

    @property
    def is_field(self) -> bool:
        return self.kind != "Z"

    @property
    def characteristic(self) -> int:
        return self.p if self.kind == "Zp" else 0

    def __str__(self):
        return f"Z/{self.p}" if self.kind == "Zp" else self.kind

    def coerce(self, x):
        if self.kind == "Zp":
            return int(x) % self.p
        if self.kind == "Q":
            return Fraction(x)
        return int(x)

    def array(self, M) -> np.ndarray:
        """Copy of ``M`` with entries in this ring."""
        M = np.asarray(M)
        if self.kind == "Zp":
            return np.asarray(M, dtype=np.int64) % self.p
        if self.kind == "Q":
            out = np.empty(M.shape, dtype=object)
            out.flat[:] = [Fraction(x) for x in M.flat]
            return out
        return _as_int(M)


ZZ = Ring("Z")
QQ = Ring("Q")


def _is_prime(p: int) -> bool:
    return p >= 2 and all(p % d for d in range(2, int(p**0.5) + 1))


def _as_int(M) -> np.ndarray:
    M = np.asarray(M)
    if M.dtype == object:
        if all(abs(int(x)) < _LIMIT for x in M.flat):
            return np.array(M.tolist() if M.size else np.zeros(M.shape), dtype=np.int64).reshape(M.shape)
        out = np.empty(M.shape, dtype=object)
        out.flat[:] = [int(x) for x in M.flat]
        return out
    return M.astype(np.int64, copy=True)


def _maxabs(a) -> int:
    if a.size == 0:
        return 0
    if a.dtype == object:
        return max(abs(int(x)) for x in a.flat)
    return int(np.abs(a).max())


def _promote(a):
    if a.dtype == object:
        return a
    out = np.empty(a.shape, dtype=object)
    out.flat[:] = [int(x) for x in a.flat]
    return out


def identity(n: int, ring: Ring = ZZ) -> np.ndarray:
    return ring.array(np.eye(n, dtype=np.int64))


def exact_matmul(A, B) -> np.ndarray:
    """Integer product with no overflow (object arithmetic when needed)."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.dtype != object and B.dtype != object and A.size and B.size:
        bound = _maxabs(A) * _maxabs(B) * max(A.shape[1], 1)
        if bound < _FLOAT_EXACT:
            # every partial sum is an integer below 2**53, so BLAS in float64 is exact
            return np.rint(A.astype(np.float64) @ B.astype(np.float64)).astype(np.int64)
        if bound < _LIMIT:
            return A.astype(np.int64) @ B.astype(np.int64)
    if A.shape[1] == 0:
        return np.zeros((A.shape[0], B.shape[1]), dtype=np.int64)
    return _promote(np.asarray(A)).dot(_promote(np.asarray(B)))


# ---------------------------------------------------------------------------
# Smith normal form over Z


@dataclass
class SmithForm:
    """``U @ M @ V == S`` with U, V unimodular and S diagonal.

    ``Uinv`` and ``Vinv`` are the exact inverses, kept alongside so callers can
    change bases both ways without a second solve.
    """

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray
    Uinv: np.ndarray
    Vinv: np.ndarray
    diagonal: list
    rank: int

    @property
    def invariant_factors(self) -> list[int]:
        return [int(d) for d in self.diagonal[: self.rank]]


class _Mats:
    """Holds the working matrix and transforms; promotes to object on demand."""

    def __init__(self, M, track: bool):
        m, n = M.shape
        self.A = _as_int(M)
        self.track = track
        self._bounds: dict = {}
        if track:
            self.U = np.eye(m, dtype=np.int64)
            self.Uinv = np.eye(m, dtype=np.int64)
            self.V = np.eye(n, dtype=np.int64)
            self.Vinv = np.eye(n, dtype=np.int64)

    def _guard(self, name, q, src, terms: int = 1):
        # keeps a running upper bound on |entries| so the full matrix is rescanned
        # only when the bound gets near the int64 limit
        arr = getattr(self, name)
        if arr.dtype == object:
            return
        bound = self._bounds.get(name)
        if bound is None:
            bound = _maxabs(arr)
        bound += _maxabs(q) * _maxabs(src) * terms
        if bound >= _LIMIT:
            bound = _maxabs(arr) + _maxabs(q) * _maxabs(src) * terms
            if bound >= _LIMIT:
                setattr(self, name, _promote(arr))
        self._bounds[name] = bound

    # A[rows] -= q[:, None] * A[t]
    def rows_sub(self, rows, q, t):
        if len(rows) == 0:
            return
        self._guard("A", q, self.A[t])
        q = q.astype(self.A.dtype) if self.A.dtype != object else _promote(q)
        self.A[rows] -= np.outer(q, self.A[t])
        if self.track:
            self._guard("U", q, self.U[t])
            qU = q if self.U.dtype == object else q.astype(np.int64)
            self.U[rows] -= np.outer(qU, self.U[t])
            self._guard("Uinv", q, self.Uinv[:, rows], len(rows))
            Ui = self.Uinv
            qi = _promote(q) if Ui.dtype == object else q.astype(np.int64)
            Ui[:, t] += Ui[:, rows] @ qi if Ui.dtype != object else Ui[:, rows].dot(qi)

    # A[:, cols] -= q[None, :] * A[:, t]
    def cols_sub(self, cols, q, t):
        if len(cols) == 0:
            return
        self._guard("A", q, self.A[:, t])
        q = q.astype(self.A.dtype) if self.A.dtype != object else _promote(q)
        self.A[:, cols] -= np.outer(self.A[:, t], q)
        if self.track:
            self._guard("V", q, self.V[:, t])
            qV = q if self.V.dtype == object else q.astype(np.int64)
            self.V[:, cols] -= np.outer(self.V[:, t], qV)
            self._guard("Vinv", q, self.Vinv[cols], len(cols))
            Vi = self.Vinv
            qi = _promote(q) if Vi.dtype == object else q.astype(np.int64)
            Vi[t] += qi @ Vi[cols] if Vi.dtype != object else qi.dot(Vi[cols])

    def swap_rows(self, i, j):
        if i == j:
            return
        self.A[[i, j]] = self.A[[j, i]]
        if self.track:
            self.U[[i, j]] = self.U[[j, i]]
            self.Uinv[:, [i, j]] = self.Uinv[:, [j, i]]

    def swap_cols(self, i, j):
        if i == j:
            return
        self.A[:, [i, j]] = self.A[:, [j, i]]
        if self.track:
            self.V[:, [i, j]] = self.V[:, [j, i]]
            self.Vinv[[i, j]] = self.Vinv[[j, i]]

    def negate_row(self, i):
        self.A[i] = -self.A[i]
        if self.track:
            self.U[i] = -self.U[i]
            self.Uinv[:, i] = -self.Uinv[:, i]

    def add_row(self, dst, src):
        # A[dst] += A[src]
        self.rows_sub(np.array([dst]), np.array([-1], dtype=np.int64), src)


def _round_div(a: np.ndarray, p) -> np.ndarray:
    """Nearest-integer quotients of ``a`` by ``p`` (smaller remainders)."""
    if a.dtype == object:
        p = int(p)
        return np.array([(2 * int(x) + abs(p)) // (2 * p) if p > 0 else -((2 * int(x) + abs(p)) // (2 * -p))
                         for x in a], dtype=object)
    p = int(p)
    if p > 0:
        return (2 * a + p) // (2 * p)
    return -((2 * a - p) // (-2 * p))


def smith_normal_form(M, transforms: bool = True) -> SmithForm:
    """Smith normal form over Z with invariant factors d1 | d2 | ... (all > 0).

    Pivot rule: a unit in the leading column if there is one, otherwise the
    nonzero entry of least absolute value in the remaining block, earliest
    position on ties.  Rows and columns are cleared by rounded
    division, which keeps intermediate entries small.
    """
    M = np.asarray(M)
    if M.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    m, n = M.shape
    W = _Mats(M, transforms)
    t = 0
    end = n  # columns at index >= end are known to be zero
    while t < min(m, end):
        if not W.A[t:, t].any():
            # a zero column stays zero under the remaining operations; park it
            end -= 1
            W.swap_cols(t, end)
            continue
        block = W.A[t:, t:end]
        if block.dtype == object:
            absb = np.array([[abs(int(x)) for x in row] for row in block], dtype=object) if block.size else block
            nz = [(absb[i, j], i, j) for i in range(block.shape[0]) for j in range(block.shape[1]) if absb[i, j] != 0]
            if not nz:
                break
            _, i, j = min(nz)
        else:
            # a unit in the leading column is as good as any pivot; look there first
            lead = np.nonzero(np.abs(block[:, 0]) == 1)[0]
            if len(lead):
                i, j = int(lead[0]), 0
            else:
                absb = np.abs(block)
                if not absb.any():
                    break
                masked = np.where(absb > 0, absb, np.iinfo(np.int64).max)
                i, j = np.unravel_index(np.argmin(masked), masked.shape)
        W.swap_rows(t, t + int(i))
        W.swap_cols(t, t + int(j))
        while True:
            piv = W.A[t, t]
            col = W.A[t + 1:, t]
            rows = np.nonzero(col)[0]
            if len(rows):
                q = _round_div(col[rows], piv)
                W.rows_sub(rows + t + 1, q, t)
            row = W.A[t, t + 1:]
            cols = np.nonzero(row)[0]
            if len(cols):
                q = _round_div(row[cols], piv)
                W.cols_sub(cols + t + 1, q, t)
            col = W.A[t + 1:, t]
            row = W.A[t, t + 1:]
            rest_c = np.nonzero(col)[0]
            rest_r = np.nonzero(row)[0]
            if len(rest_c) or len(rest_r):
                # a smaller remainder exists; make it the pivot
                cands = [(abs(int(col[k])), 0, int(k)) for k in rest_c] + [(abs(int(row[k])), 1, int(k)) for k in rest_r]
                _, side, k = min(cands)
                if side == 0:
                    W.swap_rows(t, t + 1 + k)
                else:
                    W.swap_cols(t, t + 1 + k)
                continue
            # divisibility of the remaining block
            sub = W.A[t + 1:, t + 1:end]
            piv = int(W.A[t, t])
            if sub.size and abs(piv) != 1:
                if sub.dtype == object:
                    bad = [(i2, j2) for i2 in range(sub.shape[0]) for j2 in range(sub.shape[1]) if int(sub[i2, j2]) % piv]
                    bad = bad[0] if bad else None
                else:
                    badmask = (sub % piv) != 0
                    bad = tuple(np.argwhere(badmask)[0]) if badmask.any() else None
                if bad is not None:
                    W.add_row(t, t + 1 + int(bad[0]))
                    continue
            break
        if W.A[t, t] < 0:
            W.negate_row(t)
        t += 1
    rank = t
    diag = [int(W.A[k, k]) for k in range(min(m, n))]
    if not transforms:
        return SmithForm(None, W.A, None, None, None, diag, rank)
    return SmithForm(W.U, W.A, W.V, W.Uinv, W.Vinv, diag, rank)


def invariant_factors(M) -> list[int]:
    """Nonzero invariant factors of an integer matrix (no transforms)."""
    M = np.asarray(M)
    if M.size == 0:
        return []
    return smith_normal_form(M, transforms=False).invariant_factors


def det_bareiss(M) -> int:
    """Exact determinant by fraction-free elimination."""
    A = [[int(x) for x in row] for row in np.asarray(M)]
    n = len(A)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            for i in range(k + 1, n):
                if A[i][k] != 0:
                    A[k], A[i] = A[i], A[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


@dataclass
class SnfCertificate:
    product_ok: bool
    unimodular_ok: bool
    divisibility_ok: bool
    diagonal_ok: bool

    @property
    def ok(self) -> bool:
        return self.product_ok and self.unimodular_ok and self.divisibility_ok and self.diagonal_ok


def certify_snf(M, snf: SmithForm, use_det: bool = True) -> SnfCertificate:
    """Recheck a Smith form from scratch in exact arithmetic."""
    M = _promote(np.asarray(M, dtype=object) if np.asarray(M).dtype == object else np.asarray(M))
    U, V, S = _promote(snf.U), _promote(snf.V), _promote(snf.S)
    product_ok = bool(np.array_equal(U.dot(M).dot(V), S))
    m, n = S.shape
    diagonal_ok = all(S[i, j] == 0 for i in range(m) for j in range(n) if i != j)
    diagonal_ok = diagonal_ok and all(int(S[k, k]) > 0 for k in range(snf.rank))
    diagonal_ok = diagonal_ok and all(int(S[k, k]) == 0 for k in range(snf.rank, min(m, n)))
    d = snf.invariant_factors
    divisibility_ok = all(d[k + 1] % d[k] == 0 for k in range(len(d) - 1))
    if use_det:
        unimodular_ok = abs(det_bareiss(U)) == 1 and abs(det_bareiss(V)) == 1
    else:
        unimodular_ok = (np.array_equal(U.dot(_promote(snf.Uinv)), identity(m).astype(object))
                         and np.array_equal(V.dot(_promote(snf.Vinv)), identity(n).astype(object)))
    return SnfCertificate(product_ok, unimodular_ok, divisibility_ok, diagonal_ok)


# ---------------------------------------------------------------------------
# Fields: row/column reduction to a diagonal of ones


def field_normal_form(M, ring: Ring, transforms: bool = True) -> SmithForm:
    """The field analogue of the Smith form: ``U M V = diag(1,...,1,0,...)``."""
    if not ring.is_field:
        raise ValueError("field_normal_form needs Zp or Q")
    A = ring.array(M)
    m, n = A.shape
    p = ring.p

    def red(x):
        return x % p if ring.kind == "Zp" else x

    def inv(x):
        return pow(int(x), -1, p) if ring.kind == "Zp" else 1 / x

    if transforms:
        U, Uinv, V, Vinv = identity(m, ring), identity(m, ring), identity(n, ring), identity(n, ring)
    t = 0
    while t < min(m, n):
        block = A[t:, t:]
        nz = np.argwhere(block != 0)
        if len(nz) == 0:
            break
        i, j = (int(nz[0][0]) + t, int(nz[0][1]) + t)
        if i != t:
            A[[t, i]] = A[[i, t]]
            if transforms:
                U[[t, i]] = U[[i, t]]
                Uinv[:, [t, i]] = Uinv[:, [i, t]]
        if j != t:
            A[:, [t, j]] = A[:, [j, t]]
            if transforms:
                V[:, [t, j]] = V[:, [j, t]]
                Vinv[[t, j]] = Vinv[[j, t]]
        c = inv(A[t, t])
        A[t] = red(A[t] * c)
        if transforms:
            U[t] = red(U[t] * c)
            Uinv[:, t] = red(Uinv[:, t] * _inverse_scalar(c, ring))
        rows = np.nonzero(A[:, t])[0]
        rows = rows[rows != t]
        if len(rows):
            q = A[rows, t].copy()
            A[rows] = red(A[rows] - np.outer(q, A[t]))
            if transforms:
                U[rows] = red(U[rows] - np.outer(q, U[t]))
                Uinv[:, t] = red(Uinv[:, t] + Uinv[:, rows] @ q if ring.kind == "Zp" else Uinv[:, t] + Uinv[:, rows].dot(q))
        cols = np.nonzero(A[t])[0]
        cols = cols[cols != t]
        if len(cols):
            q = A[t, cols].copy()
            A[:, cols] = red(A[:, cols] - np.outer(A[:, t], q))
            if transforms:
                V[:, cols] = red(V[:, cols] - np.outer(V[:, t], q))
                Vinv[t] = red(Vinv[t] + q @ Vinv[cols] if ring.kind == "Zp" else Vinv[t] + q.dot(Vinv[cols]))
        t += 1
    diag = [A[k, k] for k in range(min(m, n))]
    if not transforms:
        return SmithForm(None, A, None, None, None, diag, t)
    return SmithForm(U, A, V, Uinv, Vinv, diag, t)


def _inverse_scalar(c, ring: Ring):
    # scaling row t by c is undone by scaling column t of Uinv by 1/c
    if ring.kind == "Zp":
        return pow(int(c), -1, ring.p)
    return 1 / c


def normal_form(M, ring: Ring = ZZ, transforms: bool = True) -> SmithForm:
    if ring.is_field:
        return field_normal_form(M, ring, transforms)
    return smith_normal_form(M, transforms)


def rank(M, ring: Ring = ZZ) -> int:
    M = np.asarray(M)
    if M.size == 0:
        return 0
    return normal_form(M, ring, transforms=False).rank


# ---------------------------------------------------------------------------
# Sparse unit-pivot elimination (invariant factors of large sparse matrices)


def sparse_invariant_factors(columns: list[dict[int, int]], nrows: int, ring: Ring = ZZ) -> list:
    """Invariant factors of a sparse matrix given as a list of columns.

    Unit pivots are eliminated first (Markowitz order: fewest row entries,
    then fewest column entries); elementary operations with a unit pivot leave
    the invariant factors unchanged apart from removing one factor 1.  What is
    left is handed to the dense Smith form.  Over a field every nonzero entry
    is a unit, so the result is ``[1] * rank``.
    """
    p = ring.p if ring.kind == "Zp" else 0
    cols: dict[int, dict[int, object]] = {}
    rows: dict[int, set[int]] = {}
    for j, col in enumerate(columns):
        c = {}
        for i, v in col.items():
            v = ring.coerce(v)
            if v != 0:
                c[i] = v
        if c:
            cols[j] = c
            for i in c:
                rows.setdefault(i, set()).add(j)

    def is_unit(v):
        return v != 0 if ring.is_field else abs(v) == 1

    def inv(v):
        if ring.kind == "Zp":
            return pow(int(v), -1, p)
        if ring.kind == "Q":
            return 1 / v
        return v  # +-1 is its own inverse

    ones = 0
    import heapq

    heap = []
    for j, c in cols.items():
        for i, v in c.items():
            if is_unit(v):
                heapq.heappush(heap, (len(rows[i]) * len(c), i, j))
    while heap:
        cost, i, j = heapq.heappop(heap)
        c = cols.get(j)
        if c is None or i not in c or not is_unit(c[i]) or i not in rows:
            continue
        cur = len(rows[i]) * len(c)
        if cur != cost:
            heapq.heappush(heap, (cur, i, j))
            continue
        ones += 1
        pinv = inv(c[i])
        # clear row i using column j: col_k -= (a_ik / a_ij) col_j
        for k in list(rows[i]):
            if k == j:
                continue
            ck = cols[k]
            f = ck[i] * pinv
            if ring.kind == "Zp":
                f %= p
            for r, v in c.items():
                nv = ck.get(r, 0) - f * v
                if ring.kind == "Zp":
                    nv %= p
                if nv == 0:
                    if r in ck:
                        del ck[r]
                        rows[r].discard(k)
                else:
                    if r not in ck:
                        rows.setdefault(r, set()).add(k)
                    ck[r] = nv
                    if is_unit(nv):
                        heapq.heappush(heap, (len(rows[r]) * len(ck), r, k))
            if not ck:
                del cols[k]
        # drop column j and row i (the rest of column j is cleared by row ops)
        for r in c:
            rows[r].discard(j)
            if not rows[r]:
                del rows[r]
        del cols[j]
        if i in rows:
            for k in rows[i]:
                cols[k].pop(i, None)
                if not cols[k]:
                    del cols[k]
            del rows[i]
    if ring.is_field:
        # anything left still has full elimination available densely
        rest = _dense_rest(cols, rows, ring)
        return [1] * (ones + (rank(rest, ring) if rest.size else 0))
    rest = _dense_rest(cols, rows, ring)
    return [1] * ones + (invariant_factors(rest) if rest.size else [])


def _dense_rest(cols, rows, ring):
    rlist = sorted(rows)
    clist = sorted(cols)
    rindex = {r: a for a, r in enumerate(rlist)}
    dtype = object if ring.kind == "Q" else np.int64
    D = np.zeros((len(rlist), len(clist)), dtype=dtype)
    if ring.kind == "Q":
        D[:] = Fraction(0)
    big = False
    for b, j in enumerate(clist):
        for r, v in cols[j].items():
            if ring.kind == "Z" and abs(v) >= _LIMIT:
                big = True
            if big and D.dtype != object:
                D = _promote(D)
            D[rindex[r], b] = v
    return D
