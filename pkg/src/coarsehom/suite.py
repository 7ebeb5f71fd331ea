"""Axiom verification suites over an annotated corpus of example spaces.

Each check yields a row ``{"axiom", "item", "status", "witness"}`` with status
``pass``, ``fail`` or ``inconclusive``.  Negative controls pass when the
check they exercise rejects its input.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .chains import CoarseChain, assemble, boundary, flasque_contraction
from .core import CoarseSpace, check_excisive
from .homology import Group, is_zero_map
from .homotopy import (FlasqueData, Profile, build_homotopy_domains, flasque_check, lift_classical,
                       validate_homotopy)
from .linalg import Ring
from .maps import FAIL, CloseAt, are_close, check_action, check_map_properties
from .pipeline import GateRejected, PipelineConfig, compute_coarsified
from .rips import build_rips, window_pair
from .sequences import (HomologyCache, check_excision, induced, is_chain_map, map_matrix, mayer_vietoris,
                        pair_complexes, pair_les)
from .spaces import ExampleSpec, generate

AXIOMS = ("exactness", "excision", "mayer_vietoris", "homotopy", "flasqueness", "coronality", "domains",
          "equivariant", "independence", "negative")


@dataclass
class SuiteConfig:
    axioms: tuple = AXIOMS
    level: int = 1
    ring: str = "Z"
    kinds: tuple = ("chain", "cochain")
    windows: tuple = (6, 9, 12)
    equivariant: bool = True

    @classmethod
    def from_json(cls, d: dict) -> "SuiteConfig":
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**kw)


@dataclass
class SuiteReport:
    rows: list = field(default_factory=list)
    seconds: float = 0.0
    timings: dict = field(default_factory=dict)  # wall seconds per stage, kept out of to_json

    def add(self, axiom, item, ok, witness=None, inconclusive=False):
        status = "inconclusive" if inconclusive else ("pass" if ok else "fail")
        self.rows.append({"axiom": axiom, "item": item, "status": status, "witness": _plain(witness)})

    @property
    def failures(self) -> list:
        return [r for r in self.rows if r["status"] == "fail"]

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> dict:
        out: dict = {}
        for r in self.rows:
            out.setdefault(r["axiom"], {"pass": 0, "fail": 0, "inconclusive": 0})[r["status"]] += 1
        return out

    def to_json(self) -> dict:
        return {"ok": self.ok, "summary": self.summary(), "rows": self.rows}


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    return x


# ---------------------------------------------------------------------------
# Subset mini-language


def _coord(lab, axis):
    return lab[axis] if isinstance(lab, tuple) else lab


def subset(X: CoarseSpace, expr) -> frozenset:
    """Evaluate a subset description against the point labels of X.

    Forms: {"all": true}, {"labels": [...]}, {"le": v}, {"ge": v}, {"abs_le": v},
    {"abs_ge": v} (all with optional "axis"), {"and": [...]}, {"or": [...]},
    {"not": e}, {"minus": [e1, e2]}.
    """
    if expr is None or expr == "all" or expr.get("all"):
        return frozenset(range(X.size))
    if "labels" in expr:
        labs = [tuple(l) if isinstance(l, list) else l for l in expr["labels"]]
        return frozenset(X.index[l] for l in labs if l in X.index)
    if "and" in expr:
        parts = [subset(X, e) for e in expr["and"]]
        return frozenset.intersection(*parts)
    if "or" in expr:
        return frozenset().union(*(subset(X, e) for e in expr["or"]))
    if "not" in expr:
        return frozenset(range(X.size)) - subset(X, expr["not"])
    if "minus" in expr:
        a, b = expr["minus"]
        return subset(X, a) - subset(X, b)
    axis = expr.get("axis", 0)
    tests = {"le": lambda c, v: c <= v, "ge": lambda c, v: c >= v,
             "abs_le": lambda c, v: abs(c) <= v, "abs_ge": lambda c, v: abs(c) >= v}
    for key, test in tests.items():
        if key in expr:
            return X.select(lambda lab: test(_coord(lab, axis), expr[key]))
    raise ValueError(f"unknown subset expression {expr!r}")


# ---------------------------------------------------------------------------
# Corpus


@dataclass
class Corpus:
    raw: dict
    spaces: dict  # name -> (CoarseSpace, action or None, spec dict)

    @classmethod
    def load(cls, data: dict) -> "Corpus":
        spaces = {}
        for name, d in data.get("spaces", {}).items():
            spec = ExampleSpec.from_json(dict(d, name=d.get("name", name)))
            X, act = generate(spec)
            spaces[name] = (X, act, d)
        return cls(data, spaces)

    def space(self, name) -> CoarseSpace:
        return self.spaces[name][0]


def default_corpus_path():
    return resources.files("coarsehom") / "data" / "axioms.json"


def load_suite(path=None) -> tuple[SuiteConfig, Corpus]:
    text = default_corpus_path().read_text() if path is None else open(path).read()
    data = json.loads(text)
    return SuiteConfig.from_json(data.get("config", {})), Corpus.load(data)


def _collar(X: CoarseSpace, level: int) -> frozenset:
    return window_pair(X, level + 1).collar if X.is_window else frozenset()


def _level(item: dict, cfg: SuiteConfig) -> int:
    return int(item.get("level", cfg.level))


# ---------------------------------------------------------------------------
# Axiom runners


def run_exactness(corpus, cfg, rep, ring):
    for item in corpus.raw.get("pairs", []):
        X = corpus.space(item["space"])
        A = subset(X, item["A"])
        lv = _level(item, cfg)
        for kind in cfg.kinds:
            pc = pair_complexes(X, A, lv, ring, kind, _collar(X, lv), top=item.get("top", 3))
            seq = pair_les(pc)
            rep.add("exactness", f"{item['space']}:{_name(item)}:{kind}", seq.exact,
                    {"groups": [(l, list(g.orders)) for l, g in zip(seq.labels, seq.groups)]})


def _name(item):
    return item.get("name") or json.dumps({k: v for k, v in item.items() if k in ("A", "B", "C")}, sort_keys=True)


def run_triples(corpus, cfg, rep, ring, axioms):
    for item in corpus.raw.get("triples", []):
        X = corpus.space(item["space"])
        A, B = subset(X, item["A"]), subset(X, item["B"])
        lv = _level(item, cfg)
        col = _collar(X, lv)
        tag = f"{item['space']}:{_name(item)}"
        exc = check_excisive(X, A, B)
        if "excision" in axioms:
            rep.add("excision", f"{tag}:excisive", exc.ok, {"witness": exc.witness})
        C = frozenset(range(X.size)) - B
        for kind in cfg.kinds:
            cache = HomologyCache()
            if "excision" in axioms:
                er = check_excision(X, A, C, lv, ring, kind, col, top=item.get("top", 3), cache=cache)
                same = all(d["src"] == d["tgt"] for d in er.degrees.values())
                rep.add("excision", f"{tag}:{kind}", er.ok and same, er.to_json())
            if "mayer_vietoris" in axioms:
                try:
                    mv = mayer_vietoris(X, A, B, lv, ring, kind, col, top=item.get("top", 3), cache=cache)
                except ValueError as exc_err:
                    rep.add("mayer_vietoris", f"{tag}:{kind}", False, {"error": str(exc_err)})
                    continue
                wit = {"groups": [(l, list(g.orders)) for l, g in zip(mv.labels, mv.groups)]}
                ok = mv.exact
                want = item.get("connecting_iso")
                if want is not None and kind == "chain":
                    ok = ok and _connecting_iso(mv, want)
                    wit["connecting_iso"] = want
                rep.add("mayer_vietoris", f"{tag}:{kind}", ok, wit)


def _connecting_iso(mv, degree: int) -> bool:
    """The map H_degree(X) -> H_{degree-1}(AnB) in the chain MV sequence is an isomorphism."""
    from .homology import is_iso
    src = mv.labels.index(f"H{degree}(X)")
    tgt = mv.labels.index(f"H{degree - 1}(AnB)")
    if tgt != src + 1:
        return False
    return bool(is_iso(np.asarray(mv.maps[src], dtype=object), mv.groups[src], mv.groups[tgt]))


HOMOTOPIES = {
    # name -> (H(x, n), rho-, rho+, target radius factor, target offset)
    "translate": lambda p: (lambda x, n: x + p.get("step", 1) * min(max(n, 0), 1),
                            Profile.constant(0), Profile.constant(1)),
    "stretch": lambda p: (lambda x, n: x + (1 if x > 0 else -1 if x < 0 else 0) * min(max(n, 0), abs(x)),
                          Profile.constant(0), Profile(lambda x: abs(x), None, "|x|")),
    "rotate": lambda p: (lambda x, n: (x + p.get("step", 1) * min(max(n, 0), 1)) % p.get("n", 8),
                         Profile.constant(0), Profile.constant(1)),
    "constant": lambda p: (lambda x, n: x if n <= 0 else _parse_label(p["to"]),
                           Profile.constant(0), Profile.constant(1)),
}


def _parse_label(v):
    return tuple(v) if isinstance(v, list) else v


def run_homotopies(corpus, cfg, rep, ring):
    for item in corpus.raw.get("homotopies", []):
        X = corpus.space(item["space"])
        kind = item["kind"]
        H_rule, rm, rp = HOMOTOPIES[kind](item)
        tag = f"{item['space']}:{kind}"
        Y = _target_space(X, item)
        lift = lift_classical(X, Y, H_rule, rm, rp, name=kind)
        vrep = validate_homotopy(lift.H, lift.f, lift.g)
        ok = all(v.ok for v in vrep.verdicts.values())
        rep.add("homotopy", f"{tag}:valid", ok, {k: v.status for k, v in vrep.verdicts.items()},
                inconclusive=not ok and all(v.status != FAIL for v in vrep.verdicts.values()))
        close = are_close(lift.f, lift.g)
        eq = induced_maps_agree(X, H_rule, rm, rp, item, ring)
        rep.add("homotopy", f"{tag}:equal-induced", eq["ok"],
                dict(eq, close_level=close.level if isinstance(close, CloseAt) else None))


def _target_space(X: CoarseSpace, item: dict) -> CoarseSpace:
    """Target window for a homotopy: another radius and possibly deeper scales."""
    tr = item.get("target_radius")
    if not (X.is_window and tr):
        return X
    if "target_scales" in item:
        spec = ExampleSpec(X.ambient.family, int(tr), tuple(item["target_scales"]), dict(X.ambient.params))
        return generate(spec)[0]
    return X.regenerate(tr)


def induced_maps_agree(X: CoarseSpace, H_rule, rm: Profile, rp: Profile, item: dict, ring: Ring) -> dict:
    """f_* = g_* from level ``level`` on a large source window into a target
    window at level ``target_level``, both rel collars (proper pushforward)."""
    lv = int(item.get("level", 1))
    tl = int(item.get("target_level", lv + 1))
    top = int(item.get("top", 2))
    f = lambda lab: H_rule(lab, rm.rule(lab))  # noqa: E731
    g = lambda lab: H_rule(lab, rp.rule(lab))  # noqa: E731
    if X.is_window:
        S = int(item.get("target_window", 6))
        T = X.regenerate(S)
        tcol = window_pair(T, tl + 1).collar
        # source large enough that the images of its collar miss the target interior
        R = int(item.get("source_window", 2 * S + 4))
        W = X.regenerate(R)
        scol = window_pair(W, lv + 1).collar
    else:
        T, W, tcol, scol = X, X, frozenset(), frozenset()
    src = assemble(W, lv, ring, "chain", collar=scol, top=top + 1)
    tgt = assemble(T, tl, ring, "chain", collar=tcol, top=top + 1)
    out = {"ok": True, "degrees": {}}
    cache = HomologyCache()
    for name, rule in (("f", f), ("g", g)):
        arr = np.array([T.index.get(rule(lab), -1) for lab in W.labels], dtype=np.int64)
        mats = {p: map_matrix(src, tgt, p, arr) for p in range(top + 2)}
        if not is_chain_map(src, tgt, mats):
            out["ok"] = False
            out["chain_map"] = name
            return out
        out[name] = mats
    for p in range(top + 1):
        Hs, Ht = cache(src, p), cache(tgt, p)
        Ff = induced(out["f"][p], Hs, Ht, "chain")
        Fg = induced(out["g"][p], Hs, Ht, "chain")
        diff = np.asarray(Ff, dtype=object) - np.asarray(Fg, dtype=object)
        same = bool(is_zero_map(diff, Group.of(Ht))) if diff.size else True
        out["degrees"][str(p)] = {"equal": same, "source": list(Hs.orders), "target": list(Ht.orders)}
        out["ok"] = out["ok"] and same
    del out["f"], out["g"]
    return out


FLASQUE_MAPS = {
    "shift": lambda lab: lab + 1,
    "shift_last": lambda lab: lab[:-1] + (lab[-1] + 1,),
}


def run_flasque(corpus, cfg, rep, ring):
    for item in corpus.raw.get("flasque", []):
        X = corpus.space(item["space"])
        phi = FLASQUE_MAPS[item.get("phi", "shift")]
        tag = item["space"]
        fr = flasque_check(FlasqueData(phi), X)
        rep.add("flasqueness", f"{tag}:conditions", all(v.ok for v in fr.verdicts.values()),
                {k: v.status for k, v in fr.verdicts.items()})
        rep.add("flasqueness", f"{tag}:contraction", _contraction_identity(X, phi, _level(item, cfg), ring))
        r = compute_coarsified(X, ring, "chain", PipelineConfig(level=_level(item, cfg),
                                                                  windows=tuple(item.get("windows", cfg.windows)),
                                                                  seeds=(None,)))
        vanish = all(d["betti"] == 0 and not d["torsion"] for d in r.degrees)
        rep.add("flasqueness", f"{tag}:groups-vanish", vanish,
                {"degrees": [(d["betti"], d["torsion"], d["stabilized_at"]) for d in r.degrees]})


def _contraction_identity(X: CoarseSpace, phi, level: int, ring: Ring) -> bool:
    """d s + s d = id rel collar on every basis chain of degree <= 2 at ``level``.

    The window is regenerated large enough to carry the trajectories; the
    horizon pushes the support into the collar of the original window.
    """
    col = window_pair(X, level + 1).collar
    horizon = X.ambient.radius + 1
    big = X.regenerate(X.ambient.radius + horizon + level + 2)
    emb = np.array([big.index[lab] for lab in X.labels])
    interior = frozenset(range(X.size)) - col
    bigcol = frozenset(range(big.size)) - frozenset(int(emb[i]) for i in interior)
    step = lambda i: big.index.get(phi(big.labels[i]), -1)  # noqa: E731
    cx = assemble(X, level, ring, "chain", collar=col, top=2)
    for p in range(3):
        for orb in cx.bases[p]:
            (t, _j), _s = orb[0]
            c = CoarseChain(p, {tuple(int(emb[x]) for x in t): 1}, ring)
            s = flasque_contraction(c, step, horizon, collar=bigcol)
            lhs = boundary(s) + flasque_contraction(boundary(c), step, horizon, collar=bigcol) if p else \
                boundary(s)
            diff = lhs - c
            # everything left over must live in the collar or outside the window
            for tup, v in diff.coeffs.items():
                if v and not all(x in bigcol for x in tup):
                    return False
    return True


def run_coronality(corpus, cfg, rep, ring):
    for name in corpus.raw.get("coronality", []):
        X = corpus.space(name)
        top_level = X.diameter_level()
        if top_level is None:
            rep.add("coronality", name, False, {"error": "space is not bounded within depth"}, inconclusive=True)
            continue
        K = build_rips(X, None, top_level, max_dim=3)
        full = all(K.count(d) == _binom(X.size, d + 1) for d in range(min(4, X.size)))
        r = compute_coarsified(X, ring, "chain", PipelineConfig(level=1, seeds=(None,)))
        vals = [(d["betti"], d["torsion"]) for d in r.degrees]
        ok = full and vals[0] == (1, []) and all(v == (0, []) for v in vals[1:])
        rep.add("coronality", name, ok, {"full_simplex": full, "degrees": vals, "level": top_level})


def _binom(n, k):
    from math import comb
    return comb(n, k)


def run_domains(corpus, cfg, rep, ring):
    for item in corpus.raw.get("domains", []):
        X = corpus.space(item["space"])
        prof = {"abs": Profile(lambda x: abs(x) // item.get("divide", 1), None, "|x|"),
                "const": Profile.constant(item.get("value", 1))}[item.get("rho", "abs")]
        D = build_homotopy_domains(X, prof)
        S = D.sets
        parts_ok = (S["X_rho"] | S["X^rho"]) == frozenset(range(D.ambient.size)) and \
            (S["X_rho"] & S["X^rho"]) == S["X_rho^rho"]
        exc = check_excisive(D.ambient, S["X_rho"], S["X^rho"])
        inc = check_map_properties(D.inclusion("X_rho^rho", "X_0^rho"))
        proj = check_map_properties(D.projection("X_rho^rho", X))
        ok = parts_ok and exc.ok and inc["controlled"].ok and proj["controlled"].ok
        rep.add("domains", f"{item['space']}:{prof.name}", ok,
                {"sizes": {k: len(v) for k, v in S.items()}, "excisive": exc.ok,
                 "inclusion": inc["controlled"].status, "projection": proj["controlled"].status})


def run_equivariant(corpus, cfg, rep):
    for item in corpus.raw.get("actions", []):
        X, act, _ = corpus.spaces[item["space"]]
        ring = Ring.parse(item.get("ring", "Q"))
        tag = f"{item['space']}:{act.name}"
        gate = check_action(act, X)
        gate_ok = gate["proper"].ok and gate["isocoarse"].ok
        rep.add("equivariant", f"{tag}:gate", gate_ok, {k: v.status for k, v in gate.verdicts.items()})
        if not gate_ok:
            continue
        lv = _level(item, cfg)
        col = _collar(X, lv)
        A = subset(X, item["A"])
        for variant, kind in (("invariant", "chain"), ("coinvariant", "cochain")):
            pc = pair_complexes(X, A, lv, ring, kind, col, top=item.get("top", 3), variant=variant, action=act)
            seq = pair_les(pc)
            rep.add("equivariant", f"{tag}:{variant}:exactness", seq.exact,
                    {"groups": [(l, list(g.orders)) for l, g in zip(seq.labels, seq.groups)]})
            if "C" in item:
                C = subset(X, item["C"])
                er = check_excision(X, A, C, lv, ring, kind, col, top=item.get("top", 3), variant=variant,
                                    action=act)
                rep.add("equivariant", f"{tag}:{variant}:excision", er.ok, er.to_json())


def run_independence(corpus, cfg, rep, ring):
    for name, (X, _act, d) in corpus.spaces.items():
        pc = d.get("pipeline", {})
        conf = PipelineConfig(level=pc.get("level", cfg.level), sep=pc.get("sep", 1),
                              windows=tuple(pc.get("windows", cfg.windows)), seeds=tuple(pc.get("seeds", (None, 7))),
                              top=pc.get("top", 2))
        r = compute_coarsified(X, ring, "chain", conf)
        ind = r.independence
        rep.add("independence", name, bool(ind.get("isomorphic")) and r.tower.get("chain_maps_ok", False),
                {"points": ind.get("points"), "unstabilized": ind.get("unstabilized"), "degrees": [(g["betti"], g["torsion"], g["stabilized_at"])
                                                          for g in r.degrees]})


def run_negative(corpus, cfg, rep):
    for item in corpus.raw.get("negative", []):
        kind = item["kind"]
        X, act, _ = corpus.spaces[item["space"]]
        if kind == "gate":
            try:
                compute_coarsified(X, Ring.parse("Z"), "chain",
                                   PipelineConfig(equivariant=True, windows=tuple(item.get("windows", (3, 4)))), act)
                rep.add("negative", f"{item['space']}:gate-rejects", False, {"error": "action was accepted"})
            except GateRejected as exc:
                rep.add("negative", f"{item['space']}:gate-rejects", True, {"reason": str(exc)})
        elif kind == "non_excisive":
            exc = check_excisive(X, subset(X, item["A"]), subset(X, item["B"]))
            rep.add("negative", f"{item['space']}:non-excisive", not exc.ok,
                    {"fails_at": exc.fails_at, "point": None if exc.counterexample is None
                     else X.labels[exc.counterexample]})
        elif kind == "flasque_escape":
            fr = flasque_check(FlasqueData(FLASQUE_MAPS[item.get("phi", "shift")]), X)
            rep.add("negative", f"{item['space']}:not-flasque", fr["escape"].status == FAIL,
                    {k: v.status for k, v in fr.verdicts.items()})
        else:
            raise ValueError(f"unknown negative control {kind!r}")


def verify_suite(config: SuiteConfig | None = None, corpus: Corpus | None = None) -> SuiteReport:
    if corpus is None:
        c2, corpus = load_suite()
        config = config or c2
    cfg = config or SuiteConfig()
    ring = Ring.parse(cfg.ring)
    rep = SuiteReport()
    t0 = time.perf_counter()
    ax = set(cfg.axioms)
    stages = [
        ("exactness", "exactness" in ax, lambda: run_exactness(corpus, cfg, rep, ring)),
        ("triples", bool(ax & {"excision", "mayer_vietoris"}), lambda: run_triples(corpus, cfg, rep, ring, ax)),
        ("homotopy", "homotopy" in ax, lambda: run_homotopies(corpus, cfg, rep, ring)),
        ("flasqueness", "flasqueness" in ax, lambda: run_flasque(corpus, cfg, rep, ring)),
        ("coronality", "coronality" in ax, lambda: run_coronality(corpus, cfg, rep, ring)),
        ("domains", "domains" in ax, lambda: run_domains(corpus, cfg, rep, ring)),
        ("equivariant", "equivariant" in ax and cfg.equivariant, lambda: run_equivariant(corpus, cfg, rep)),
        ("independence", "independence" in ax, lambda: run_independence(corpus, cfg, rep, ring)),
        ("negative", "negative" in ax, lambda: run_negative(corpus, cfg, rep)),
    ]
    for name, wanted, run in stages:
        if wanted:
            t = time.perf_counter()
            run()
            rep.timings[name] = time.perf_counter() - t
    rep.seconds = time.perf_counter() - t0
    return rep
