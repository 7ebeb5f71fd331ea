"""Generalized homotopy cylinders, subdivision schedules and flasqueness tests.

The interval is a finite tick grid.  A cylinder over X carries the structure
generated by E_n x Diag (same tick, related points) and E_U (same point,
ticks related by that point's neighbourhood U_x).  Because U_x may widen away
from bounded sets, a homotopy can take longer and longer to cross the grid.
"""
from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import (Ambient, CapExceeded, CoarseSpace, Entourage, is_bounded, normalize_chain, product,
                   size_cap)
from .maps import (FAIL, INCONCLUSIVE, PASS, UNKNOWN, CoarseMap, GroupAction, NonTotalMap, PropertyReport,
                   Verdict, _combine, check_proper, tower_radii)

# ---------------------------------------------------------------------------
# Grid and neighbourhoods


@dataclass(frozen=True)
class IntervalGrid:
    ticks: tuple

    def __post_init__(self):
        t = tuple(self.ticks)
        if len(t) < 2:
            raise ValueError("an interval grid needs at least two ticks")
        if any(not a < b for a, b in zip(t, t[1:])):
            raise ValueError("ticks must be strictly increasing")
        object.__setattr__(self, "ticks", t)

    @classmethod
    def uniform(cls, count: int, a: float = 0, b: float | None = None) -> "IntervalGrid":
        b = count - 1 if b is None else b
        if count < 2:
            raise ValueError("an interval grid needs at least two ticks")
        step = (b - a) / (count - 1)
        vals = [a + k * step for k in range(count)]
        if float(step).is_integer() and float(a).is_integer():
            vals = [int(round(v)) for v in vals]
        return cls(tuple(vals))

    @property
    def T(self) -> int:
        return len(self.ticks) - 1

    def __len__(self):
        return len(self.ticks)


def _check_mask(M: np.ndarray, n: int, who):
    if M.shape != (n, n):
        raise ValueError(f"U_{who} has shape {M.shape}, expected {(n, n)}")
    if not M.diagonal().all():
        raise ValueError(f"U_{who} is not reflexive")
    if not (M == M.T).all():
        raise ValueError(f"U_{who} is not symmetric")
    if not all(M[k, k + 1] for k in range(n - 1)):
        raise ValueError(f"U_{who} misses an adjacent tick pair")


@dataclass(frozen=True, eq=False)
class NeighborhoodFamily:
    """U_x as a boolean tick x tick matrix per point label.

    ``rule(label)`` produces the matrix for any label, so the family can
    follow a window tower; ``masks`` caches it on one table.
    """

    grid: IntervalGrid
    rule: Callable
    name: str = "U"

    def mask(self, label) -> np.ndarray:
        M = np.asarray(self.rule(label), dtype=bool)
        _check_mask(M, len(self.grid), label)
        return M

    def masks(self, X: CoarseSpace) -> np.ndarray:
        return np.stack([self.mask(lab) for lab in X.labels])

    @classmethod
    def full(cls, grid: IntervalGrid) -> "NeighborhoodFamily":
        n = len(grid)
        M = np.ones((n, n), dtype=bool)
        return cls(grid, lambda lab: M, "full")

    @classmethod
    def bandwidth(cls, grid: IntervalGrid, width: Callable | int = 1) -> "NeighborhoodFamily":
        """U_x = {(s, t) : |index(s) - index(t)| <= width(x)}."""
        n = len(grid)
        idx = np.arange(n)
        gap = np.abs(idx[:, None] - idx[None, :])
        wf = width if callable(width) else (lambda lab, w=width: w)
        return cls(grid, lambda lab: gap <= max(1, int(wf(lab))), "bandwidth")

    @classmethod
    def adjacent(cls, grid: IntervalGrid) -> "NeighborhoodFamily":
        fam = cls.bandwidth(grid, 1)
        return cls(grid, fam.rule, "adjacent")

    def check_invariant(self, action: GroupAction, X: CoarseSpace) -> Verdict:
        """Strict equivariance U_{x.g} = U_x on the generators (where defined)."""
        for g, rule in action.generators.items():
            if not callable(rule):
                continue
            for lab in X.labels:
                img = rule(lab)
                if img is None or img not in X.index:
                    continue
                if not np.array_equal(self.mask(lab), self.mask(img)):
                    return Verdict(FAIL, None, {"generator": g, "point": lab}, "U is not invariant")
        return Verdict(PASS, {"generators": sorted(action.generators)}, None, "")

    def to_json(self, X: CoarseSpace) -> list:
        return [{"point": _lab_json(lab), "pairs": np.argwhere(self.mask(lab)).tolist()} for lab in X.labels]


def _lab_json(lab):
    if isinstance(lab, tuple):
        return [_lab_json(v) for v in lab]
    if isinstance(lab, float) and math.isinf(lab):
        return "inf" if lab > 0 else "-inf"
    if isinstance(lab, np.integer):
        return int(lab)
    return lab


# ---------------------------------------------------------------------------
# Cylinders


@dataclass(frozen=True, eq=False)
class Cylinder:
    """X x I together with the data it was built from."""

    space: CoarseSpace
    base: CoarseSpace
    grid: IntervalGrid
    U: NeighborhoodFamily
    generators: tuple  # of Entourage, in the order fed to normalize_chain

    def index(self, x: int, k: int) -> int:
        return x * len(self.grid) + k

    def split(self, z: int) -> tuple[int, int]:
        return divmod(z, len(self.grid))

    def slice_at(self, k: int) -> list[int]:
        return [self.index(x, k) for x in range(self.base.size)]

    def regenerate(self, radius: int) -> "Cylinder":
        return _CYLINDERS[self.space.regenerate(radius)]


_CYLINDERS: "weakref.WeakKeyDictionary[CoarseSpace, Cylinder]" = weakref.WeakKeyDictionary()


def cylinder_of(space: CoarseSpace) -> Cylinder | None:
    return _CYLINDERS.get(space)


def build_cylinder(X: CoarseSpace, grid: IntervalGrid, U: NeighborhoodFamily, depth: int | None = None,
                   cap: int | None = None, name: str | None = None) -> Cylinder:
    """Cylinder X x ticks; level n is the n-fold composite of the generators up to n.

    Generator n is (E_n x Diag) u E_U, so E_U is available from level 1 on.
    """
    if U.grid != grid:
        raise ValueError("neighbourhood family lives on another grid")
    cap = cap or size_cap(20_000)
    nt = len(grid)
    size = X.size * nt
    if size > cap:
        raise CapExceeded(f"cylinder has {size} points (cap {cap})")
    depth = X.depth + grid.T + 1 if depth is None else depth
    masks = U.masks(X)
    EU = np.zeros((size, size), dtype=bool)
    for x in range(X.size):
        EU[x * nt:(x + 1) * nt, x * nt:(x + 1) * nt] = masks[x]
    eye_t = np.eye(nt, dtype=bool)
    name = name or f"{X.name}xI"
    gens = []
    for n in range(1, max(X.depth, 1) + 1):
        G = np.kron(X.level(n).matrix, eye_t) | EU
        gens.append(Entourage.from_matrix(G, name))
    chain = normalize_chain(gens, depth, size, name)
    labels = tuple((lab, t) for lab in X.labels for t in grid.ticks)
    regen = None
    if X.is_window or X.regen is not None:
        def regen(R, X=X, grid=grid, U=U, depth=depth, cap=cap, name=name):
            return build_cylinder(X.regenerate(R), grid, U, depth, cap, name).space
    amb = Ambient("window" if regen else "finite", "cylinder-of", X.ambient.radius, ())
    space = CoarseSpace(labels, chain, amb, name, None, None, regen)
    cyl = Cylinder(space, X, grid, U, tuple(gens))
    _CYLINDERS[space] = cyl
    return cyl


def check_bounded_law(cyl: Cylinder) -> bool:
    """Every cylinder ball projects to an X-bounded set, and K x I is bounded
    whenever K is (tested on all balls of X)."""
    X, nt = cyl.base, len(cyl.grid)
    C = cyl.space
    for n in range(C.depth + 1):
        E = C.level(n).matrix
        for z in range(C.size):
            proj = {int(w) // nt for w in np.nonzero(E[z])[0]}
            if not is_bounded(X, proj).known and X.diameter_level() is not None:
                return False
    for n in range(X.depth + 1):
        E = X.level(n).matrix
        for x in range(X.size):
            K = np.nonzero(E[x])[0]
            KI = [int(k) * nt + t for k in K for t in range(nt)]
            if not is_bounded(C, KI).known:
                return False
    return True


# ---------------------------------------------------------------------------
# Subdivision schedules


class ScheduleError(ValueError):
    pass


def _greedy_schedule(M: np.ndarray) -> tuple:
    """Furthest-first tick subsequence with the consecutive-window condition."""
    n = M.shape[0]
    seq = [0]
    while seq[-1] < n - 1:
        j = seq[-1]
        best = None
        for k in range(j + 1, n):
            if M[j:k + 1, j].all() and M[j:k + 1, k].all():
                best = k
        if best is None:
            raise ScheduleError("U is too fine for the grid: no admissible next tick")
        seq.append(best)
    return tuple(seq)


@dataclass(frozen=True)
class MergeStep:
    i: int  # i_x(l)
    before: tuple  # j_x(l-1)
    after: tuple  # j_x(l)
    tuple_: tuple  # x_l as cylinder indices


@dataclass(frozen=True, eq=False)
class SubdivisionSchedule:
    """Per-point tick index sequences s_{x,0} = 0 < ... < s_{x,k_x} = T."""

    cylinder: Cylinder
    seqs: tuple  # per point of the base: tuple of tick indices

    def k(self, x: int) -> int:
        return len(self.seqs[x]) - 1

    def merge(self, t: Sequence[int]) -> list[MergeStep]:
        """Merged lattice path for the tuple t: one coordinate advances per step,
        the one with the smallest next tick value (smallest position on ties)."""
        ticks = self.cylinder.grid.ticks
        seqs = [self.seqs[x] for x in t]
        ks = [len(s) - 1 for s in seqs]
        j = [0] * len(t)
        out = []
        for _ in range(sum(ks)):
            cands = [i for i in range(len(t)) if j[i] + 1 <= ks[i]]
            i = min(cands, key=lambda q: (ticks[seqs[q][j[q] + 1]], q))
            before = tuple(j)
            entries = [self.cylinder.index(x, seqs[q][j[q]]) for q, x in enumerate(t)]
            entries.insert(i + 1, self.cylinder.index(t[i], seqs[i][j[i] + 1]))
            j[i] += 1
            out.append(MergeStep(i, before, tuple(j), tuple(entries)))
        return out

    def terms_of(self, t: Sequence[int]):
        return [(s.i, s.tuple_) for s in self.merge(t)]

    def check_windows(self) -> bool:
        masks = self.cylinder.U.masks(self.cylinder.base)
        for x, seq in enumerate(self.seqs):
            M = masks[x]
            if seq[0] != 0 or seq[-1] != self.cylinder.grid.T:
                return False
            for a, b in zip(seq, seq[1:]):
                if not (M[a:b + 1, a].all() and M[a:b + 1, b].all()):
                    return False
        return True

    def to_json(self) -> list:
        X, ticks = self.cylinder.base, self.cylinder.grid.ticks
        return [{"point": _lab_json(lab), "ticks": [_lab_json(ticks[k]) for k in self.seqs[x]]}
                for x, lab in enumerate(X.labels)]


def derive_schedule(cyl: Cylinder, action: GroupAction | None = None) -> SubdivisionSchedule:
    """Greedy schedules; points with equal U_x get equal schedules, so an
    invariant family gives an invariant schedule."""
    masks = cyl.U.masks(cyl.base)
    memo: dict = {}
    seqs = []
    for M in masks:
        key = M.tobytes()
        if key not in memo:
            memo[key] = _greedy_schedule(M)
        seqs.append(memo[key])
    sched = SubdivisionSchedule(cyl, tuple(seqs))
    if action is not None:
        inv = cyl.U.check_invariant(action, cyl.base)
        if not inv.ok:
            raise ScheduleError(f"neighbourhood family is not invariant: {inv.counterexample}")
    return sched


def schedule_support_level(sched: SubdivisionSchedule, level: int, p: int) -> int | None:
    """Least cylinder level holding every merged tuple x_l for x in the
    level-``level`` degree-p tuples of the base (None past the depth)."""
    from .chains import enumerate_tuples

    X, C = sched.cylinder.base, sched.cylinder.space
    L = C.chain.level_matrix
    worst = 0
    for t in enumerate_tuples(X.level(level).matrix, p):
        for step in sched.merge(t):
            z = np.array(step.tuple_)
            worst = max(worst, int(L[np.ix_(z, z)].max()))
    return worst if worst <= C.depth else None


# ---------------------------------------------------------------------------
# Homotopies


def homotopy_map(cyl: Cylinder, target: CoarseSpace, rule: Callable, name: str = "H",
                 target_offset: int | None = None) -> CoarseMap:
    """H on the cylinder from a rule (x_label, tick) -> target label."""
    return CoarseMap.from_rule(cyl.space, target, lambda lab: rule(lab[0], lab[1]), name, target_offset)


def end_map(H: CoarseMap, end: int) -> CoarseMap:
    """Restriction of H to X x {t_0} (end=0) or X x {t_T} (end=-1), as a map on X."""
    cyl = _CYLINDERS[H.source]
    k = 0 if end == 0 else cyl.grid.T
    t = cyl.grid.ticks[k]
    assign = tuple(H.assignment[cyl.index(x, k)] for x in range(cyl.base.size))
    rule = None
    if H.rule is not None:
        hr = H.rule
        rule = lambda lab: hr((lab, t))  # noqa: E731
    return CoarseMap(cyl.base, H.target, assign, rule, f"{H.name}@{t}", H.target_offset)


def _generator_levels(H: CoarseMap) -> list:
    cyl = _CYLINDERS[H.source]
    return [H.target.chain.least_level(H.image_relation(G.matrix)) for G in cyl.generators]


def check_controlled_generators(H: CoarseMap, radii=None) -> Verdict:
    """Controlledness on the generating entourages, along the window tower.

    A map controlled on generators is controlled on everything they generate,
    so this avoids asking the target for levels deeper than it has.
    """
    if H.regenerable:
        radii = radii or tower_radii(H.source)
        tower = [(r, H if r == H.source.ambient.radius else H.regenerate(r)) for r in radii]
    else:
        tower = [(H.source.ambient.radius, H)]
    per = [(r, _generator_levels(g)) for r, g in tower]
    witness, status, cex = {}, PASS, None
    for n in range(len(per[0][1])):
        s, why = _combine([(r, lv[n]) for r, lv in per], f"generator {n + 1}")
        if s == PASS:
            witness[n + 1] = per[-1][1][n]
            continue
        if status != FAIL:
            status = s
            g = tower[-1][1]
            G = _CYLINDERS[g.source].generators[n].matrix
            L = g.target.chain.level_matrix
            a = g.array
            ii, jj = np.nonzero(G)
            k = int(np.argmax(L[a[ii], a[jj]]))
            cex = {"generator": n + 1, "pair": (g.source.labels[ii[k]], g.source.labels[jj[k]]),
                   "per_radius": [(r, lv[n]) for r, lv in per]}
    return Verdict(status, witness, cex, "")


def validate_homotopy(H: CoarseMap, f: CoarseMap, g: CoarseMap, relative: tuple | None = None,
                      radii=None) -> PropertyReport:
    """H is coarse on the cylinder and restricts to f and g at the two ends.

    ``relative=(A, B)`` (index sets of base and target) also checks A x I -> B.
    """
    cyl = _CYLINDERS.get(H.source)
    if cyl is None:
        raise ValueError("H is not defined on a cylinder built by build_cylinder")
    verdicts = {"controlled": check_controlled_generators(H, radii), "proper": check_proper(H, radii, project=lambda lab: lab[0])}
    for key, k, m in (("left", 0, f), ("right", cyl.grid.T, g)):
        bad = next((x for x in range(cyl.base.size) if H.assignment[cyl.index(x, k)] != m.assignment[x]), None)
        if m.target.labels != H.target.labels:
            bad = next((x for x in range(cyl.base.size)
                        if H.target.labels[H.assignment[cyl.index(x, k)]] != m.target.labels[m.assignment[x]]),
                       None)
        if bad is None:
            verdicts[key] = Verdict(PASS, {"tick": _lab_json(cyl.grid.ticks[k])})
        else:
            verdicts[key] = Verdict(FAIL, None, {"point": cyl.base.labels[bad]},
                                    f"restriction at tick {cyl.grid.ticks[k]} differs from {m.name}")
    if relative is not None:
        A, B = frozenset(relative[0]), frozenset(relative[1])
        bad = next(((x, k) for x in sorted(A) for k in range(len(cyl.grid))
                    if H.assignment[cyl.index(x, k)] not in B), None)
        verdicts["relative"] = (Verdict(PASS) if bad is None else
                                Verdict(FAIL, None, {"point": cyl.space.labels[cyl.index(*bad)]},
                                        "A x I is not mapped into B"))
    return PropertyReport(verdicts)


def homotopy_valid(report: PropertyReport) -> bool:
    return all(v.ok for v in report.verdicts.values())


# ---------------------------------------------------------------------------
# Profiles and classical homotopies


@dataclass(frozen=True, eq=False)
class Profile:
    """An integer function rho on point labels, with an optional declared bound |rho| <= bound."""

    rule: Callable
    bound: int | None = None
    name: str = "rho"

    @classmethod
    def constant(cls, c: int) -> "Profile":
        return cls(lambda lab: c, abs(c), f"const{c}")

    def values(self, X: CoarseSpace) -> np.ndarray:
        vals = []
        for lab in X.labels:
            v = self.rule(lab)
            if int(v) != v:
                raise ValueError(f"{self.name}({lab!r}) = {v} is not an integer")
            vals.append(int(v))
        return np.asarray(vals, dtype=np.int64)

    def check_bound(self, X: CoarseSpace) -> Verdict:
        if self.bound is None:
            return Verdict(PASS, {"bound": None})
        v = self.values(X)
        k = int(np.argmax(np.abs(v)))
        if abs(int(v[k])) > self.bound:
            return Verdict(FAIL, None, {"point": X.labels[k], "value": int(v[k])},
                           f"{self.name} exceeds its declared bound {self.bound}")
        return Verdict(PASS, {"bound": self.bound})

    def classify(self, X: CoarseSpace, radii=None) -> dict:
        """Record the class of rho: bornological (always, on windows of
        locally finite spaces) and whether it is also controlled, i.e. the
        spread of rho over E_n-pairs stays bounded along the window tower."""
        spaces = [X]
        if X.is_window or X.regen is not None:
            spaces = [X.regenerate(r) if r != X.ambient.radius else X for r in (radii or tower_radii(X))]
        per_level = {}
        for Y in spaces:
            v = self.values(Y)
            spread = np.abs(v[:, None] - v[None, :])
            for n in range(Y.depth + 1):
                per_level.setdefault(n, []).append((Y.ambient.radius, int(spread[Y.level(n).matrix].max())))
        controlled = all(_combine(per, "spread")[0] == PASS for per in per_level.values())
        return {"bornological": True, "controlled": controlled,
                "spread": {n: per[-1][1] for n, per in per_level.items()}}


class NotEventuallyConstant(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ClassicalLift:
    cylinder: Cylinder
    H: CoarseMap
    f: CoarseMap
    g: CoarseMap
    rho_class: dict


def _lift_family(rho_m, rho_p, grid: IntervalGrid) -> NeighborhoodFamily:
    ticks = np.array(grid.ticks, dtype=float)
    n = len(ticks)
    idx = np.arange(n)
    near = np.abs(idx[:, None] - idx[None, :]) <= 1

    def rule(lab):
        lo = ticks < rho_m(lab)
        hi = ticks > rho_p(lab)
        return near | (lo[:, None] & lo[None, :]) | (hi[:, None] & hi[None, :])

    return NeighborhoodFamily(grid, rule, "classical")


def lift_classical(X: CoarseSpace, Y: CoarseSpace, H_rule: Callable, rho_minus: Profile, rho_plus: Profile,
                   target_offset: int | None = None, slack: int = 2, name: str = "H") -> ClassicalLift:
    """Turn a classical homotopy H: X x Z -> Y (constant f below rho-, constant g
    above rho+) into a map on a cylinder with ticks -inf, m..M, +inf.

    H~(x, s) = H(x, s clamped to [rho-(x), rho+(x)]); the endpoint ticks
    give f and g.  Constancy is checked ``slack`` steps past each profile.
    """
    for prof in (rho_minus, rho_plus):
        v = prof.check_bound(X)
        if not v.ok:
            raise ValueError(v.detail + f" at {v.counterexample}")
    lo, hi = rho_minus.values(X), rho_plus.values(X)
    if (lo > hi).any():
        k = int(np.argmax(lo > hi))
        raise ValueError(f"rho- > rho+ at {X.labels[k]!r}")
    for x, lab in enumerate(X.labels):
        a, b = int(lo[x]), int(hi[x])
        f0, g0 = H_rule(lab, a), H_rule(lab, b)
        for s in range(1, slack + 1):
            if H_rule(lab, a - s) != f0 or H_rule(lab, b + s) != g0:
                raise NotEventuallyConstant(f"H is not constant beyond the profiles at {lab!r}")
    grid = IntervalGrid((-math.inf,) + tuple(range(int(lo.min()), int(hi.max()) + 1)) + (math.inf,))
    rm, rp = rho_minus.rule, rho_plus.rule

    def lifted(lab, s):
        a, b = rm(lab), rp(lab)
        return H_rule(lab, int(min(max(s, a), b)))

    def make(Xr):
        lo_r, hi_r = rho_minus.values(Xr), rho_plus.values(Xr)
        if lo_r.min() < lo.min() or hi_r.max() > hi.max():
            g = IntervalGrid((-math.inf,) + tuple(range(int(lo_r.min()), int(hi_r.max()) + 1)) + (math.inf,))
        else:
            g = grid
        return build_cylinder(Xr, g, _lift_family(rm, rp, g), name=f"{X.name}xI")

    cyl = make(X)
    if X.is_window or X.regen is not None:
        # the grid may have to grow with the window, so regenerate through the lift
        base_regen = X.regenerate

        def regen(R):
            return make(base_regen(R)).space

        space = cyl.space
        new_space = CoarseSpace(space.labels, space.chain, space.ambient, space.name, None, None, regen)
        cyl = Cylinder(new_space, X, cyl.grid, cyl.U, cyl.generators)
        _CYLINDERS[new_space] = cyl
    H = homotopy_map(cyl, Y, lifted, name, target_offset)
    f = CoarseMap.from_rule(X, Y, lambda lab: H_rule(lab, rm(lab)), "f", target_offset)
    g = CoarseMap.from_rule(X, Y, lambda lab: H_rule(lab, rp(lab)), "g", target_offset)
    cls = {"rho-": rho_minus.classify(X), "rho+": rho_plus.classify(X)}
    return ClassicalLift(cyl, H, f, g, cls)


# ---------------------------------------------------------------------------
# Flasqueness


@dataclass(frozen=True, eq=False)
class FlasqueData:
    """phi as a label rule, with the tested bounded sets and the horizon factor."""

    phi: Callable
    bounded_sets: tuple = ()  # tuples of labels; default: small balls around the first point
    horizon_factor: int = 2
    name: str = "phi"

    def array(self, X: CoarseSpace) -> np.ndarray:
        """phi on one table; -1 where it leaves the table."""
        return np.array([X.index.get(self.phi(lab), -1) for lab in X.labels], dtype=np.int64)


def _orbit_images(phi, labels, horizon):
    """images[n] = set of phi^n(x) for x in labels, n = 0..horizon."""
    cur = list(labels)
    out = [set(cur)]
    for _ in range(horizon):
        cur = [phi(x) for x in cur]
        out.append(set(cur))
    return out


def _covering_window(X: CoarseSpace, labels_needed: set, tries: int = 5):
    if all(l in X.index for l in labels_needed):
        return X
    if not (X.is_window or X.regen is not None):
        return None
    R = max(X.ambient.radius, 1)
    for _ in range(tries):
        R *= 2
        Y = X.regenerate(R)
        if all(l in Y.index for l in labels_needed):
            return Y
    return None


def flasque_check(d: FlasqueData, X: CoarseSpace, action: GroupAction | None = None, radii=None) -> PropertyReport:
    """Three windowed conditions: phi close to the identity; phi^n eventually
    avoids each tested bounded set; the iterates are equicontrolled.

    Each witness is computed on a tower of windows and must not grow.
    """
    spaces = [X]
    if X.is_window or X.regen is not None:
        spaces = [X.regenerate(r) if r != X.ambient.radius else X for r in (radii or tower_radii(X))]
    Ks = [tuple(K) for K in d.bounded_sets] or [tuple(X.labels[y] for y in np.nonzero(X.level(n).matrix[0])[0])
                                                 for n in range(min(2, X.depth) + 1)]
    close_per, escape_per, equi_per = [], {k: [] for k in range(len(Ks))}, {}
    inconclusive = []
    for W in spaces:
        r = W.ambient.radius
        horizon = d.horizon_factor * max(r, W.size if not W.is_window else 0) + 2
        imgs = _orbit_images(d.phi, W.labels, horizon)
        # (1) closeness: level of {(x, phi x)}
        needed = set(W.labels) | imgs[1]
        big = _covering_window(W, needed)
        if big is None:
            close_per.append((r, None))
            inconclusive.append("phi leaves every regenerated window")
        else:
            T = np.zeros((big.size, big.size), dtype=bool)
            for lab in W.labels:
                T[big.index[lab], big.index[d.phi(lab)]] = True
            close_per.append((r, big.chain.least_level(T)))
        # (2) escape: least N with phi^n(W) disjoint from K for N <= n <= horizon
        for k, K in enumerate(Ks):
            Kset = set(K)
            hit = [bool(img & Kset) for img in imgs]
            N = None
            for n in range(horizon, -1, -1):
                if hit[n]:
                    break
                N = n
            escape_per[k].append((r, N))
        # (3) equicontrol: one level m_n for all iterates, measured in a covering window
        allimgs = set().union(*imgs)
        big = _covering_window(W, allimgs)
        if big is None:
            inconclusive.append("iterates leave every regenerated window")
            for n in range(W.depth + 1):
                equi_per.setdefault(n, []).append((r, None))
            continue
        traj = np.empty((horizon + 1, W.size), dtype=np.int64)
        cur = list(W.labels)
        for t in range(horizon + 1):
            traj[t] = [big.index[c] for c in cur]
            cur = [d.phi(c) for c in cur]
        L = big.chain.level_matrix
        for n in range(W.depth + 1):
            ii, jj = np.nonzero(W.level(n).matrix)
            m = int(L[traj[:, ii], traj[:, jj]].max()) if len(ii) else 0
            equi_per.setdefault(n, []).append((r, m if m <= big.depth else None))
    verdicts = {}
    s, why = _combine(close_per, "closeness")
    verdicts["close"] = Verdict(s, {"level": close_per[-1][1]} if s == PASS else None,
                                None if s == PASS else {"per_radius": close_per}, why)
    worst, wit, cex = PASS, {}, None
    for k, per in escape_per.items():
        s, why = _combine(per, "escape")
        if s == PASS:
            wit[str(list(Ks[k]))] = per[-1][1]
            continue
        if all(v is None for _, v in per):
            s = INCONCLUSIVE if worst == PASS else worst
            why = "horizon exhausted"
        if s == FAIL or worst == PASS:
            worst, cex = s, {"K": list(Ks[k]), "per_radius": per, "why": why}
    verdicts["escape"] = Verdict(worst, wit if worst == PASS else None, cex,
                                 "" if worst == PASS else cex["why"])
    worst, wit, cex = PASS, {}, None
    for n, per in equi_per.items():
        s, why = _combine(per, f"level {n}")
        if s == PASS:
            wit[n] = per[-1][1]
        elif worst != FAIL:
            worst, cex = s, {"level": n, "per_radius": per, "why": why}
    verdicts["equicontrolled"] = Verdict(worst, wit if worst == PASS else None, cex, "; ".join(inconclusive))
    if action is not None:
        bad = None
        for gname, rule in action.generators.items():
            if not callable(rule):
                continue
            for lab in X.labels:
                img = rule(lab)
                if img is None or img not in X.index:
                    continue
                if d.phi(img) != rule(d.phi(lab)):
                    bad = {"generator": gname, "point": lab}
                    break
            if bad:
                break
        verdicts["equivariant"] = Verdict(PASS) if bad is None else Verdict(FAIL, None, bad, "phi is not equivariant")
    return PropertyReport(verdicts)


def flasque_ok(report: PropertyReport) -> bool:
    return all(v.ok for v in report.verdicts.values())


# ---------------------------------------------------------------------------
# Homotopy domains inside X x Z


@dataclass(frozen=True, eq=False)
class HomotopyDomains:
    ambient: CoarseSpace  # X x Z-window
    sets: dict  # name -> frozenset of ambient indices
    spaces: dict  # name -> CoarseSpace (subspace structure)

    def inclusion(self, small: str, big: str) -> CoarseMap:
        S, B = self.spaces[small], self.spaces[big]
        return CoarseMap(S, B, tuple(B.index[lab] for lab in S.labels), None, f"{small}->{big}")

    def projection(self, name: str, X: CoarseSpace) -> CoarseMap:
        S = self.spaces[name]
        return CoarseMap(S, X, tuple(X.index[lab[0]] for lab in S.labels), None, f"p:{name}")


def build_homotopy_domains(X: CoarseSpace, rho: Profile, pad: int = 2) -> HomotopyDomains:
    """X_rho (n >= rho), X^rho (n <= rho), X_rho^rho (n = rho), X_0^rho (0 <= n <= rho)."""
    from .spaces import lattice

    v = rho.values(X)
    bound = int(np.abs(v).max()) + pad
    if rho.bound is not None and int(np.abs(v).max()) > rho.bound:
        raise ValueError(f"{rho.name} is out of its declared range")
    scales = X.scales if X.scales is not None else tuple(range(X.depth + 1))
    Z = lattice(bound, scales)
    P = product(X, Z, f"{X.name}xZ")
    nz = Z.size
    rows = {}
    for name, pred in (("X_rho", lambda n, r: n >= r), ("X^rho", lambda n, r: n <= r),
                       ("X_rho^rho", lambda n, r: n == r), ("X_0^rho", lambda n, r: 0 <= n <= r),
                       ("X_0^0", lambda n, r: n == 0)):
        rows[name] = frozenset(x * nz + k for x in range(X.size) for k, n in enumerate(Z.labels)
                               if pred(n, int(v[x])))
    spaces = {name: P.subspace(idx, name) for name, idx in rows.items()}
    return HomotopyDomains(P, rows, spaces)
