"""Coarse maps, closeness, group actions and discretization.

Properties that are really statements about an infinite space (properness,
uniform control) are decided on a tower of windows: the same family
regenerated at a few radii.  A property passes when its witness is stable
between the two largest radii and fails when the witness keeps growing.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import CoarseSpace, OwnerMismatch, ball, bool_matmul, is_bounded

PASS, FAIL, UNKNOWN, INCONCLUSIVE = "pass", "fail", "unknown", "inconclusive"


class NonTotalMap(ValueError):
    pass


@dataclass
class Verdict:
    status: str
    witness: dict | None = None
    counterexample: object = None
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status == PASS

    def to_json(self):
        return {"status": self.status, "witness": _jsonable(self.witness),
                "counterexample": _jsonable(self.counterexample), "detail": self.detail}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    return x


@dataclass
class PropertyReport:
    verdicts: dict = field(default_factory=dict)

    def __getitem__(self, key) -> Verdict:
        return self.verdicts[key]

    @property
    def coarse(self) -> bool:
        return self.verdicts["controlled"].ok and self.verdicts["proper"].ok

    def to_json(self):
        return {k: v.to_json() for k, v in self.verdicts.items()}


# ---------------------------------------------------------------------------
# Maps


@dataclass(frozen=True, eq=False)
class CoarseMap:
    source: CoarseSpace
    target: CoarseSpace
    assignment: tuple
    rule: Callable | None = None
    name: str = "f"
    target_offset: int | None = None

    def __post_init__(self):
        if len(self.assignment) != self.source.size:
            raise NonTotalMap("assignment length differs from the source size")
        if any(not (0 <= a < self.target.size) for a in self.assignment):
            raise NonTotalMap("assignment points outside the target table")

    @classmethod
    def from_rule(cls, source: CoarseSpace, target: CoarseSpace, rule: Callable, name: str = "f",
                  target_offset: int | None = None) -> "CoarseMap":
        out = []
        for lab in source.labels:
            img = rule(lab)
            if img not in target.index:
                raise NonTotalMap(f"{name}({lab!r}) = {img!r} is not a point of {target.name}")
            out.append(target.index[img])
        return cls(source, target, tuple(out), rule, name, target_offset)

    @classmethod
    def identity(cls, X: CoarseSpace) -> "CoarseMap":
        return cls(X, X, tuple(range(X.size)), lambda x: x, "id", 0)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.assignment, dtype=np.int64)

    def __call__(self, i: int) -> int:
        return self.assignment[i]

    def label(self, lab):
        return self.target.labels[self.assignment[self.source.index[lab]]]

    @property
    def regenerable(self) -> bool:
        return self.rule is not None and (self.source.is_window or self.source.regen is not None)

    def regenerate(self, radius: int) -> "CoarseMap":
        """The same rule between regenerated windows.

        The target radius follows ``target_offset`` when given, otherwise it
        scales with the source radius; it is widened until the rule fits.
        """
        if self.rule is None:
            raise ValueError(f"map {self.name} has no rule; it cannot follow a window tower")
        src = self.source.regenerate(radius)
        if not (self.target.is_window or self.target.regen is not None):
            return CoarseMap.from_rule(src, self.target, self.rule, self.name, self.target_offset)
        Rs, Rt = max(self.source.ambient.radius, 1), self.target.ambient.radius
        if self.target_offset is not None:
            rt = radius + self.target_offset
        else:
            rt = max(radius + Rt - Rs, -(-Rt * radius // Rs))
        for _ in range(4):
            try:
                return CoarseMap.from_rule(src, self.target.regenerate(rt), self.rule, self.name,
                                           self.target_offset)
            except NonTotalMap:
                rt = 2 * rt + 1
        raise NonTotalMap(f"{self.name} does not fit any regenerated target window")

    def image_relation(self, M: np.ndarray) -> np.ndarray:
        """(f x f)(M) as a boolean matrix on the target."""
        a = self.array
        ii, jj = np.nonzero(M)
        T = np.zeros((self.target.size, self.target.size), dtype=bool)
        T[a[ii], a[jj]] = True
        return T

    def then(self, g: "CoarseMap") -> "CoarseMap":
        """g o f."""
        if g.source.labels != self.target.labels:
            raise OwnerMismatch(f"cannot compose {self.name} into {g.name}: tables differ")
        rule = None
        if self.rule is not None and g.rule is not None:
            f_rule, g_rule = self.rule, g.rule
            rule = lambda x: g_rule(f_rule(x))  # noqa: E731
        off = None
        if self.target_offset is not None and g.target_offset is not None:
            off = self.target_offset + g.target_offset
        return CoarseMap(self.source, g.target, tuple(g.assignment[a] for a in self.assignment), rule,
                         f"{g.name}o{self.name}", off)


def tower_radii(X: CoarseSpace, extra: Sequence[int] = ()) -> list[int]:
    """A small probe radius, the base radius and one larger radius.

    Verdicts compare the two largest; the small probe lets a witness that
    exists on small windows and then leaves the depth count as a failure.
    """
    R = max(X.ambient.radius, 1)
    return sorted({max(1, R // 3), R, R + max(2, R // 2), *extra})


def _tower(f: CoarseMap, radii=None) -> list[tuple[int, CoarseMap]]:
    if not f.regenerable:
        return [(f.source.ambient.radius, f)]
    radii = radii or tower_radii(f.source)
    return [(r, f if r == f.source.ambient.radius else f.regenerate(r)) for r in radii]


def _controlled_levels(f: CoarseMap) -> list:
    out = []
    for n in range(f.source.depth + 1):
        T = f.image_relation(f.source.level(n).matrix)
        out.append(f.target.chain.least_level(T))
    return out


def _first_pair_outside(f: CoarseMap, n: int, m: int | None):
    """A pair of E_n whose image is not in F_m (m=None means not in any level)."""
    L = f.target.chain.level_matrix
    a = f.array
    ii, jj = np.nonzero(f.source.level(n).matrix)
    lv = L[a[ii], a[jj]]
    bound = f.target.depth if m is None else m
    k = np.nonzero(lv > bound)[0]
    if len(k) == 0:
        return None
    k = k[np.argmax(lv[k])]
    return (f.source.labels[ii[k]], f.source.labels[jj[k]])


def _combine(per_radius: list, label: str):
    """Fold a per-radius list of witness levels into a verdict."""
    values = [v for _, v in per_radius]
    last = values[-1]
    if last is None:
        if any(v is not None for v in values):
            return FAIL, "witness exits the depth as the window grows"
        return UNKNOWN, "no witness within depth"
    if len(values) == 1 or values[-2] == last:
        return PASS, ""
    return FAIL, f"{label} witness grows with the window: {values}"


def check_controlled(f: CoarseMap, radii=None) -> Verdict:
    tower = _tower(f, radii)
    levels = [(r, _controlled_levels(g)) for r, g in tower]
    witness, worst, cex, details = {}, PASS, None, []
    for n in range(f.source.depth + 1):
        per = [(r, lv[n] if n < len(lv) else None) for r, lv in levels]
        status, why = _combine(per, f"level {n}")
        if status == PASS:
            witness[n] = per[-1][1]
            continue
        r, g = tower[-1]
        pair = _first_pair_outside(g, min(n, g.source.depth), per[-2][1] if (status == FAIL and per[-1][1] is not None) else None)
        if status == FAIL and worst != FAIL:
            worst, cex = FAIL, {"level": n, "radius": r, "pair": pair}
        elif status == UNKNOWN and worst == PASS:
            worst, cex = UNKNOWN, {"level": n, "radius": r, "pair": pair}
        details.append(f"level {n}: {why}")
    return Verdict(worst, witness, cex, "; ".join(details))


def check_proper(f: CoarseMap, radii=None, project: Callable | None = None) -> Verdict:
    """Preimage of a fixed bounded set (the image of the base window) must not grow.

    ``project`` maps source labels to the keys that are compared; cylinders
    pass their base projection, since the tick grid of the (compact)
    interval is refined, not extended, as the window grows.
    """
    if not f.regenerable:
        if f.source.is_window:
            return Verdict(INCONCLUSIVE, None, None, "window source without a rule; tower unavailable")
        return Verdict(PASS, {"finite": True}, None, "finite source")
    R = max(f.source.ambient.radius, 1)
    radii = list(radii or (R, 2 * R + 1, 3 * R + 2))
    tower = _tower(f, radii)
    base = tower[0][1]
    K = {base.target.labels[a] for a in base.assignment}
    # the preimage is compared between the two larger windows, so that a
    # preimage sticking out of the base window is not mistaken for growth
    pre = []
    for _, g in tower[1:]:
        key = project or (lambda lab: lab)
        pre.append({key(g.source.labels[i]) for i, a in enumerate(g.assignment) if g.target.labels[a] in K})
    if pre[-1] != pre[0]:
        extra = sorted(pre[-1] - pre[0], key=repr)[:1]
        return Verdict(FAIL, None, {"new_preimage": extra[0] if extra else None,
                                    "radii": [tower[1][0], tower[-1][0]]},
                       "preimage of a fixed bounded set grows with the window")
    return Verdict(PASS, {"probe_size": len(K)}, None, "")


def check_bornological(f: CoarseMap, radii=None) -> Verdict:
    tower = _tower(f, radii)
    per_level: dict = {}
    for r, g in tower:
        for n in range(g.source.depth + 1):
            E = g.source.level(n)
            worst = 0
            for x in range(g.source.size):
                img = {g.assignment[y] for y in ball(E, x)}
                b = is_bounded(g.target, img)
                if not b.known:
                    worst = None
                    break
                worst = max(worst, b.level)
            per_level.setdefault(n, []).append((r, worst))
    witness, status, cex = {}, PASS, None
    for n, per in per_level.items():
        s, why = _combine(per, f"ball level {n}")
        if s == PASS:
            witness[n] = per[-1][1]
        elif status != FAIL:
            status, cex = s, {"level": n, "per_radius": per}
    return Verdict(status, witness, cex, "")


def check_map_properties(f: CoarseMap, radii=None) -> PropertyReport:
    return PropertyReport({
        "controlled": check_controlled(f, radii),
        "proper": check_proper(f, radii),
        "bornological": check_bornological(f, radii),
    })


@dataclass(frozen=True)
class CloseAt:
    level: int
    close: bool = True


@dataclass(frozen=True)
class NotCloseWithinDepth:
    per_radius: tuple
    close: bool = False


def _close_level(f: CoarseMap, g: CoarseMap):
    if f.source.labels != g.source.labels or f.target.labels != g.target.labels:
        raise OwnerMismatch("closeness needs maps between the same tables")
    T = np.zeros((f.target.size, f.target.size), dtype=bool)
    T[f.array, g.array] = True
    return f.target.chain.least_level(T)


def are_close(f: CoarseMap, g: CoarseMap, radii=None):
    """Least n with {(f x, g x)} inside F_n, stable along the window tower."""
    if f.regenerable and g.regenerable:
        radii = radii or tower_radii(f.source)
        per = []
        for r in radii:
            fr = f if r == f.source.ambient.radius else f.regenerate(r)
            gr = g if r == g.source.ambient.radius else g.regenerate(r)
            per.append((r, _close_level(fr, gr)))
    else:
        per = [(f.source.ambient.radius, _close_level(f, g))]
    status, _ = _combine(per, "closeness")
    if status == PASS:
        return CloseAt(per[-1][1])
    return NotCloseWithinDepth(tuple(per))


@dataclass
class EquivalenceReport:
    f: PropertyReport
    g: PropertyReport
    gf: object
    fg: object

    @property
    def ok(self) -> bool:
        return self.f.coarse and self.g.coarse and self.gf.close and self.fg.close


def verify_equivalence(f: CoarseMap, g: CoarseMap, radii=None) -> EquivalenceReport:
    gf = f.then(g)
    fg = g.then(f)
    idX = CoarseMap.identity(f.source)
    idY = CoarseMap.identity(f.target)
    return EquivalenceReport(check_map_properties(f, radii), check_map_properties(g, radii),
                             are_close(gf, idX, radii), are_close(fg, idY, radii))


# ---------------------------------------------------------------------------
# Group actions (right actions x -> x.g)


def _signed_perm(spec, k):
    if spec is None:
        return [(j, 1) for j in range(k)]
    out = []
    for item in spec:
        if isinstance(item, (list, tuple)):
            out.append((int(item[0]), int(item[1])))
        else:
            v = int(item)
            # compact form: +(j+1) or -(j+1)
            out.append((abs(v) - 1, 1 if v > 0 else -1))
    return out


@dataclass(frozen=True, eq=False)
class GroupAction:
    """Generators act on the right on labels; ``inverses`` are optional rules.

    ``coefficient_action[name]`` is a signed permutation of the coefficient
    basis e_0..e_{k-1}: entry j is ``(image index, sign)``.
    """

    generators: dict
    inverses: dict | None = None
    coefficient_action: dict | None = None
    coeff_rank: int = 1
    relations: tuple = ()
    name: str = "G"
    max_word: int = 8

    def coeff(self, g: str) -> list:
        spec = (self.coefficient_action or {}).get(g)
        return _signed_perm(spec, self.coeff_rank)

    def on(self, X: CoarseSpace) -> "ActionOn":
        perms = {}
        for g, rule in self.generators.items():
            if callable(rule):
                arr = np.array([X.index.get(rule(lab), -1) for lab in X.labels], dtype=np.int64)
            else:
                arr = np.asarray(rule, dtype=np.int64)
                if arr.shape != (X.size,):
                    raise OwnerMismatch(f"generator {g} is a permutation of another table")
            perms[g] = arr
        return ActionOn(self, X, perms)


@dataclass
class ActionOn:
    """An action materialised on one point table (generators may be partial)."""

    action: GroupAction
    space: CoarseSpace
    perms: dict

    @property
    def total(self) -> bool:
        return all((p >= 0).all() for p in self.perms.values())

    def injective(self) -> bool:
        for p in self.perms.values():
            d = p[p >= 0]
            if len(set(d.tolist())) != len(d):
                return False
        return True

    def apply_word(self, word: str) -> np.ndarray:
        arr = np.arange(self.space.size)
        for ch in word:
            p = self.perms[ch]
            arr = np.where(arr >= 0, p[np.maximum(arr, 0)], -1)
        return arr

    def elements(self, cap: int | None = None):
        """Distinct partial maps reachable by words of length <= cap.

        Returns (list of (word, array), closed) where ``closed`` says the
        enumeration reached a fixed point before the cap.
        """
        cap = self.action.max_word if cap is None else cap
        ident = np.arange(self.space.size)
        seen = {ident.tobytes(): ("", ident)}
        frontier = [("", ident)]
        gens = list(self.perms.items())
        for _ in range(cap):
            nxt = []
            for word, arr in frontier:
                for g, p in gens:
                    new = np.where(arr >= 0, p[np.maximum(arr, 0)], -1)
                    if not (new >= 0).any():
                        continue
                    key = new.tobytes()
                    if key not in seen:
                        seen[key] = (word + g, new)
                        nxt.append((word + g, new))
            frontier = nxt
            if not frontier:
                return list(seen.values()), True
        return list(seen.values()), False

    def orbits(self) -> list[list[int]]:
        parent = list(range(self.space.size))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for p in self.perms.values():
            for x, y in enumerate(p.tolist()):
                if y >= 0:
                    ra, rb = find(x), find(y)
                    if ra != rb:
                        parent[max(ra, rb)] = min(ra, rb)
        groups: dict = {}
        for x in range(self.space.size):
            groups.setdefault(find(x), []).append(x)
        return sorted(groups.values())

    def stabilizers(self) -> dict:
        elems, closed = self.elements(cap=max(self.action.max_word, self.space.size))
        if not closed or not self.total:
            raise ValueError("stabilizers need a finite action by total bijections")
        return {x: frozenset(w for w, arr in elems if arr[x] == x) for x in range(self.space.size)}

    def invariant(self, A: Iterable[int]) -> bool:
        A = frozenset(A)
        for p in self.perms.values():
            imgs = {int(p[a]) for a in A}
            if -1 in imgs or not imgs <= A:
                return False
        return True


def check_action(action: GroupAction, X: CoarseSpace, cap: int | None = None) -> PropertyReport:
    on = action.on(X)
    cap = action.max_word if cap is None else cap
    verdicts = {}
    if not on.injective():
        verdicts["bijective"] = Verdict(FAIL, None, None, "a generator is not injective")
    elif not X.is_window and not on.total:
        verdicts["bijective"] = Verdict(FAIL, None, None, "a generator leaves a finite space")
    else:
        verdicts["bijective"] = Verdict(PASS)
    bad_rel = [w for w in action.relations
               if not np.array_equal(*(lambda a: (a[a >= 0], np.arange(X.size)[a >= 0]))(on.apply_word(w)))]
    verdicts["relations"] = Verdict(FAIL if bad_rel else PASS, None, bad_rel or None)
    elems, closed = on.elements(cap)
    # properness: {g : Kg meets K} for small bounded K
    status, cex = PASS, None
    lengths = {w: len(w) for w, _ in elems}
    top = max(lengths.values()) if lengths else 0
    for x in range(X.size):
        K = np.zeros(X.size, dtype=bool)
        K[list(ball(X.level(1), x))] = True
        hits = [w for w, arr in elems if _meets(arr, K)]
        if not closed and any(lengths[w] == top and top == cap for w in hits):
            status, cex = INCONCLUSIVE, {"point": X.labels[x], "elements": len(hits)}
            break
    verdicts["proper"] = Verdict(status, {"closed": closed, "elements": len(elems)}, cex)
    # isocoarse: orbit closure of each E_n stays inside some level
    witness, status, cex = {}, PASS, None
    L = X.chain.level_matrix
    for n in range(X.depth + 1):
        ii, jj = np.nonzero(X.level(n).matrix)
        worst, worst_at, grew_last = 0, None, False
        for w, arr in elems:
            a, b = arr[ii], arr[jj]
            ok = (a >= 0) & (b >= 0)
            if not ok.any():
                continue
            lv = L[a[ok], b[ok]]
            k = int(np.argmax(lv))
            if lv[k] > worst:
                worst = int(lv[k])
                worst_at = (w, X.labels[ii[ok][k]], X.labels[jj[ok][k]])
                if len(w) == top:
                    grew_last = True
        if worst > X.depth:
            status, cex = FAIL, {"level": n, "word": worst_at[0], "pair": worst_at[1:]}
            break
        if not closed and grew_last and top == cap and status == PASS:
            status = INCONCLUSIVE
        witness[n] = worst
    verdicts["isocoarse"] = Verdict(status, witness, cex)
    return PropertyReport(verdicts)


def _meets(arr, K):
    ok = arr >= 0
    src = K & ok
    return bool(K[arr[src]].any())


# ---------------------------------------------------------------------------
# Discretization


@dataclass
class Discretization:
    space: CoarseSpace
    points: tuple  # selected indices of the original table, ascending
    subspace: CoarseSpace
    projection: CoarseMap  # X -> X'
    inclusion: CoarseMap  # X' -> X
    sep_level: int
    density_level: int | None
    enlarged: tuple = ()


def _bfs_hops(X: CoarseSpace, start: Iterable[int]) -> np.ndarray:
    E = X.level(X.depth).matrix
    dist = np.full(X.size, -1)
    q = deque()
    for s in start:
        dist[s] = 0
        q.append(s)
    while q:
        x = q.popleft()
        for y in np.nonzero(E[x])[0]:
            if dist[y] < 0:
                dist[y] = dist[x] + 1
                q.append(y)
    dist[dist < 0] = X.size + 1
    return dist


def _finish(X, chosen, sep_level, proj_of, enlarged=()):
    pts = tuple(sorted(chosen))
    sub = X.subspace(pts, name=f"{X.name}'")
    pos = {p: k for k, p in enumerate(pts)}
    proj = CoarseMap(X, sub, tuple(pos[proj_of[x]] for x in range(X.size)), None, "pi")
    inc = CoarseMap(sub, X, pts, None, "iota")
    T = np.zeros((X.size, X.size), dtype=bool)
    T[np.arange(X.size), [proj_of[x] for x in range(X.size)]] = True
    return Discretization(X, pts, sub, proj, inc, sep_level, X.chain.least_level(T), tuple(enlarged))


def discretize(X: CoarseSpace, sep_level: int, action: GroupAction | None = None,
               seed: int | None = None, base: int | None = None) -> Discretization:
    """Greedy maximal E_n-separated subset and a nearest-point projection.

    Without a seed points are visited in table order (leftmost first); a seed
    shuffles the visiting order, which is how independent discretizations are
    produced.
    """
    E = X.level(sep_level).matrix
    L = X.chain.level_matrix
    if action is None:
        order = list(range(X.size))
        if seed is not None:
            order = list(np.random.default_rng(seed).permutation(X.size))
        chosen: list[int] = []
        blocked = np.zeros(X.size, dtype=bool)
        for x in order:
            if not blocked[x]:
                chosen.append(int(x))
                blocked |= E[x] | E[:, x]
        proj_of = {}
        ch = np.array(sorted(chosen))
        for x in range(X.size):
            lv = L[x, ch]
            proj_of[x] = int(ch[np.lexsort((ch, lv))[0]])
        return _finish(X, chosen, sep_level, proj_of)
    return _discretize_equivariant(X, sep_level, action, seed, base)


def _discretize_equivariant(X, sep_level, action, seed, base):
    on = action.on(X)
    if not on.total:
        raise ValueError("equivariant discretization needs an action by bijections of the table")
    E = X.level(sep_level).matrix
    L = X.chain.level_matrix
    orbits = on.orbits()
    orbit_of = {x: k for k, O in enumerate(orbits) for x in O}
    if base is None:
        hops = np.array([_bfs_hops(X, [x]).max() for x in range(X.size)])
        base = int(np.lexsort((np.arange(X.size), hops))[0])
    dist = _bfs_hops(X, orbits[orbit_of[base]])
    keys = [(min(dist[x] for x in O), O[0]) for O in orbits]
    order = sorted(range(len(orbits)), key=lambda k: keys[k])
    if seed is not None:
        rng = np.random.default_rng(seed)
        order = sorted(order, key=lambda k: (keys[k][0], rng.random()))
    chosen: set[int] = set()
    for k in order:
        O = orbits[k]
        clash = any(E[y, z] or E[z, y] for y in O for z in chosen)
        if not clash:
            chosen.update(O)
    # stabilizer repair: each orbit needs a target whose stabilizer contains its own
    stab = on.stabilizers()
    proj_of: dict = {}
    enlarged = []
    elems, _ = on.elements(cap=max(action.max_word, X.size))
    EE = bool_matmul(E, E)
    for O in orbits:
        x = O[0]
        cand = sorted(chosen, key=lambda c: (L[x, c], c))
        cand = [c for c in cand if EE[x, c] and stab[c] >= stab[x]]
        if not cand:
            chosen.update(O)
            enlarged.append(X.labels[x])
            cand = [x]
        c = cand[0]
        for w, arr in elems:
            proj_of[int(arr[x])] = int(arr[c])
    return _finish(X, chosen, sep_level, proj_of, enlarged)


def separation_ok(d: Discretization, modulo_orbits: ActionOn | None = None) -> bool:
    E = d.space.level(d.sep_level).matrix
    pts = list(d.points)
    orbit = {}
    if modulo_orbits is not None:
        orbit = {x: k for k, O in enumerate(modulo_orbits.orbits()) for x in O}
    for a in pts:
        for b in pts:
            if a != b and E[a, b] and (not orbit or orbit[a] != orbit[b]):
                return False
    return True
