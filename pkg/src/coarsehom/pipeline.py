"""End-to-end coarsified (co)homology: discretize, Rips, windows rel collar, towers.

Infinite families are handled through a tower of windows of growing radius.
Chains use restriction to the smaller window (locally finite homology is an
inverse limit), cochains use extension by zero (compact supports form a
direct limit).  Finite spaces run a tower over scale levels instead.
Stabilization is read off the tower and is heuristic evidence, not proof.
"""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .core import CapExceeded, CoarseSpace
from .homology import Group, betti_torsion_sparse, homology, induced_map, is_iso, tower_limit
from .linalg import ZZ, Ring
from .maps import GroupAction, check_action, discretize
from .rips import build_rips, window_pair
from .sequences import induced, is_chain_map, map_matrix

DEFAULT_WINDOWS = (6, 9, 12)


class GateRejected(ValueError):
    """An equivariant run was refused because the action is not proper and isocoarse."""


@dataclass
class PipelineConfig:
    level: int = 1
    windows: tuple = DEFAULT_WINDOWS
    collar: int | None = None  # default level + 1
    sep: int = 0
    seeds: tuple = (None, 1)
    top: int = 2  # highest reported degree
    oracle: bool = False  # cross-check against the ordered-tuple complex
    equivariant: bool = False


@dataclass
class Stage:
    """One entry of the tower: a window (or level) with its complex."""

    key: int
    complex: object
    points: tuple
    collar: frozenset
    level: int


@dataclass
class CoarsifiedReport:
    space: str
    ring: str
    kind: str
    degrees: list
    tower: dict
    independence: dict
    oracle: dict = field(default_factory=dict)
    gate: dict = field(default_factory=dict)
    partial: bool = False
    notes: list = field(default_factory=list)
    seconds: float = 0.0

    def group(self, p: int) -> dict:
        return self.degrees[p]

    def to_json(self, timing: bool = False) -> dict:
        out = {"space": self.space, "ring": self.ring, "kind": self.kind, "degrees": self.degrees,
               "tower": self.tower, "independence": self.independence, "oracle": self.oracle,
               "gate": self.gate, "partial": self.partial, "notes": self.notes}
        if timing:
            out["seconds"] = round(self.seconds, 3)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["degree", "betti", "torsion", "stabilized_at"])
        for d in self.degrees:
            w.writerow([d["degree"], d["betti"], " ".join(map(str, d["torsion"])), d["stabilized_at"]])
        return buf.getvalue()


def _gate(X: CoarseSpace, action: GroupAction | None, permute: bool = False) -> dict:
    if action is None:
        return {}
    if permute and not action.on(X).total:
        # e.g. a translation moves points off a finite window
        raise GateRejected(f"action {action.name!r} does not permute the points of {X.name}")
    rep = check_action(action, X)
    verdicts = {k: v.status for k, v in rep.verdicts.items()}
    ok = all(rep[k].ok for k in ("proper", "isocoarse"))
    if not ok:
        raise GateRejected(f"action {action.name!r} is not proper and isocoarse within depth: {verdicts}")
    return verdicts


def _window_stages(big: CoarseSpace, pts: tuple, cfg: PipelineConfig, ring: Ring, kind: str) -> list[Stage]:
    r = cfg.level + 1 if cfg.collar is None else cfg.collar
    ptset = frozenset(pts)
    stages = []
    for N in cfg.windows:
        W = big.regenerate(N)
        wp = window_pair(W, r)
        inside = [big.index[lab] for lab in W.labels if lab in big.index]
        window = sorted(set(inside) & ptset)
        collar = frozenset(big.index[W.labels[x]] for x in wp.collar) & ptset
        K = build_rips(big, window, cfg.level, max_dim=cfg.top + 1)
        stages.append(Stage(N, K.chains(ring, kind, collar=collar), tuple(window), collar, cfg.level))
    return stages


def _level_stages(X: CoarseSpace, pts: tuple, cfg: PipelineConfig, ring: Ring, kind: str) -> list[Stage]:
    top_level = max(X.depth, cfg.level)
    out = []
    for n in range(cfg.level, top_level + 1):
        K = build_rips(X, pts, n, max_dim=cfg.top + 1)
        out.append(Stage(n, K.chains(ring, kind), tuple(pts), frozenset(), n))
    return out


def _tower_maps(stages: list[Stage], windowed: bool, top: int):
    """Chain-direction matrices between consecutive stages, with their source/target."""
    out = []
    for a, b in zip(stages, stages[1:]):
        # windows: restrict the larger window to the smaller; levels: include the lower level
        src, tgt = (b, a) if windowed else (a, b)
        mats = {p: map_matrix(src.complex, tgt.complex, p) for p in range(top + 2)}
        out.append((src, tgt, mats, is_chain_map(src.complex, tgt.complex, mats)))
    return out


def _direction(windowed: bool, kind: str) -> str:
    # windows: chains restrict backward, cochains extend forward; levels: the reverse
    return "backward" if windowed == (kind == "chain") else "forward"


def _run_towers(stages, windowed, kind, top):
    groups = {p: [homology(s.complex, p) for s in stages] for p in range(top + 1)}
    maps = _tower_maps(stages, windowed, top)
    pos = {id(s): i for i, s in enumerate(stages)}
    reports, degrees = {}, []
    for p in range(top + 1):
        ms = [induced(mats[p], groups[p][pos[id(src)]], groups[p][pos[id(tgt)]], kind)
              for src, tgt, mats, _ in maps]
        tr = tower_limit(groups[p], ms, k=min(2, len(ms)), direction=_direction(windowed, kind)) if ms else None
        if tr is None:
            stab = 0
        elif windowed:
            stab = tr.stabilized_at
        else:
            # a finite space carries finitely many levels, so the top one is the colimit
            trailing = len(tr.isos) - next((i + 1 for i in reversed(range(len(tr.isos))) if not tr.isos[i]), 0)
            stab = len(stages) - 1 - trailing
        last = groups[p][-1]
        degrees.append({"degree": p, "betti": last.betti, "torsion": list(last.torsion), "stabilized_at": stab,
                        "tower": [{"key": s.key, "betti": g.betti, "torsion": list(g.torsion)}
                                  for s, g in zip(stages, groups[p])]})
        reports[p] = {"isos": [] if tr is None else tr.isos}
    chain_ok = all(m[3] for m in maps)
    return degrees, reports, chain_ok, groups


def _independence(big, d1, d2, cfg, ring, kind, windowed, stable=None):
    """Compare two discretizations through their union, at the last stage.

    Only degrees in ``stable`` (those whose tower stabilized) enter the verdict;
    the others are still compared and listed under "unstabilized".
    """
    union = tuple(sorted(set(d1.points) | set(d2.points)))
    make = _window_stages if windowed else _level_stages
    last = lambda pts: make(big, pts, cfg, ring, kind)[-1]
    S1, S2, SU = last(d1.points), last(d2.points), last(union)
    out = {"points": [len(d1.points), len(d2.points), len(union)], "degrees": []}
    ok_all = True
    for p in range(cfg.top + 1):
        HU = homology(SU.complex, p)
        row = {"degree": p}
        for name, S in (("first", S1), ("second", S2)):
            H = homology(S.complex, p)
            M = map_matrix(S.complex, SU.complex, p)
            chain = is_chain_map(S.complex, SU.complex,
                                 {q: map_matrix(S.complex, SU.complex, q) for q in (p, p + 1)})
            F = induced(M, H, HU, kind)
            src, tgt = (H, HU) if kind == "chain" else (HU, H)
            iso = chain and is_iso(F, Group.of(src), Group.of(tgt))
            row[name] = bool(iso)
            if stable is None or p in stable:
                ok_all = ok_all and iso
        out["degrees"].append(row)
    out["unstabilized"] = [] if stable is None else [p for p in range(cfg.top + 1) if p not in stable]
    out["isomorphic"] = ok_all
    return out


def compute_coarsified(X: CoarseSpace, ring: Ring = ZZ, kind: str = "chain", config: PipelineConfig | None = None,
                       action: GroupAction | None = None) -> CoarsifiedReport:
    """Coarsified (co)homology of X through the window (or level) tower."""
    cfg = config or PipelineConfig()
    if kind in ("homology", "Homology"):
        kind = "chain"
    elif kind in ("cohomology", "Cohomology"):
        kind = "cochain"
    t0 = time.perf_counter()
    windowed = X.is_window
    big = X.regenerate(max(cfg.windows)) if windowed else X
    gate = _gate(big, action, cfg.equivariant) if (cfg.equivariant or action is not None) else {}
    report = CoarsifiedReport(X.name, str(ring), kind, [], {}, {}, gate=gate)
    try:
        act = action if cfg.equivariant else None
        d1 = discretize(big, cfg.sep, act, seed=cfg.seeds[0])
        stages = (_window_stages if windowed else _level_stages)(big, d1.points, cfg, ring, kind)
        degrees, towers, chain_ok, groups = _run_towers(stages, windowed, kind, cfg.top)
        report.degrees = degrees
        report.tower = {"kind": "window" if windowed else "level", "keys": [s.key for s in stages],
                        "chain_maps_ok": chain_ok, "maps": towers}
        if len(cfg.seeds) > 1:
            d2 = discretize(big, cfg.sep, act, seed=cfg.seeds[1])
            stable = {d["degree"] for d in degrees if d["stabilized_at"] is not None}
            report.independence = _independence(big, d1, d2, cfg, ring, kind, windowed, stable)
        if cfg.oracle:
            report.oracle = tuple_oracle(big, stages[-1], cfg, ring, kind, groups)
    except CapExceeded as exc:
        report.partial = True
        report.notes.append(str(exc))
    report.notes.append("stabilization is read off a finite tower; it is evidence, not proof")
    report.seconds = time.perf_counter() - t0
    return report


def tuple_oracle(X: CoarseSpace, stage: Stage, cfg: PipelineConfig, ring: Ring, kind: str, groups=None) -> dict:
    """Ordered-tuple coarse complex on the same points, rel the same collar."""
    from .chains import assemble
    cx = assemble(X, stage.level, ring, kind, collar=stage.collar, top=cfg.top + 1, points=stage.points)
    out = {"degrees": [], "agree": True}
    for p in range(cfg.top + 1):
        b, t = betti_torsion_sparse(cx, p)
        ref = groups[p][-1] if groups else homology(stage.complex, p)
        same = b == ref.betti and tuple(t) == tuple(ref.torsion)
        out["degrees"].append({"degree": p, "betti": b, "torsion": list(t), "agrees": same})
        out["agree"] = out["agree"] and same
    return out


def oracle_relative(X: CoarseSpace, radius: int, level: int, ring: Ring = ZZ, kind: str = "chain",
                    collar: int | None = None, top: int = 2) -> list:
    """Brute-force reference: (co)homology of the Rips pair (window, collar) at one radius."""
    W = X.regenerate(radius) if X.is_window else X
    wp = window_pair(W, level + 1 if collar is None else collar)
    K = build_rips(W, None, level, max_dim=top + 1)
    cx = K.chains(ring, kind, collar=wp.collar)
    return [betti_torsion_sparse(cx, p) for p in range(top + 1)]
