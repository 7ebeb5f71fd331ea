"""Example families of coarse spaces and the actions used by the harness."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .core import Ambient, CoarseSpace, from_metric, lattice_metric, register_family
from .maps import GroupAction

DEFAULT_SCALES = (0.0, 1.0, 2.0, 3.0)


def _scales(scales):
    return tuple(DEFAULT_SCALES if scales is None else scales)


def lattice(radius: int, scales=None, dim: int = 1, spacing: int = 1, name: str | None = None) -> CoarseSpace:
    """Z^dim (or spacing*Z^dim) inside [-radius, radius]^dim with the max metric."""
    coords = [c for c in range(-radius, radius + 1) if c % spacing == 0]
    if dim == 1:
        labels = tuple(coords)
        pts = np.array(coords)
    else:
        labels = tuple(itertools.product(coords, repeat=dim))
        pts = np.array(labels)
    amb = Ambient("window", "zn", radius, (("dim", dim), ("spacing", spacing)))
    nm = name or (f"Z^{dim}" if dim > 1 else "Z") + (f"[{spacing}]" if spacing != 1 else "")
    return from_metric(labels, lattice_metric(pts), _scales(scales), nm, amb, check=False)


def ray(radius: int, scales=None) -> CoarseSpace:
    labels = tuple(range(0, radius + 1))
    return from_metric(labels, lattice_metric(np.array(labels)), _scales(scales), "N",
                       Ambient("window", "ray", radius, ()), check=False)


def flasque_cylinder(radius: int, scales=None, base: int = 2) -> CoarseSpace:
    """{0..base-1} x N with the max metric; the shift along N makes it flasque."""
    labels = tuple((b, k) for b in range(base) for k in range(radius + 1))
    pts = np.array(labels)
    return from_metric(labels, lattice_metric(pts), _scales(scales), f"B{base}xN",
                       Ambient("window", "cylinder", radius, (("base", base),)), check=False)


def _tree_words(radius, branching):
    words = [()]
    frontier = [()]
    for _ in range(radius):
        frontier = [w + (c,) for w in frontier for c in range(branching)]
        words.extend(frontier)
    return words


def _prefix_metric(words, reduce_len=len):
    n = len(words)
    D = np.zeros((n, n))
    for i, u in enumerate(words):
        for j in range(i + 1, n):
            v = words[j]
            k = 0
            while k < min(len(u), len(v)) and u[k] == v[k]:
                k += 1
            D[i, j] = D[j, i] = len(u) + len(v) - 2 * k
    return D


def tree(radius: int, scales=None, branching: int = 2) -> CoarseSpace:
    """Ball of the given radius around the root of a rooted ``branching``-ary tree."""
    words = _tree_words(radius, branching)
    labels = tuple("".join(map(str, w)) or "e" for w in words)
    return from_metric(labels, _prefix_metric(words), _scales(scales), f"T{branching}",
                       Ambient("window", "tree", radius, (("branching", branching),)), check=False)


def free_group_ball(radius: int, scales=None, rank: int = 2) -> CoarseSpace:
    """Word-metric ball in the free group; letters a,b,... and inverses A,B,..."""
    letters = [chr(ord("a") + i) for i in range(rank)]
    alphabet = letters + [c.upper() for c in letters]
    inv = {c: (c.upper() if c.islower() else c.lower()) for c in alphabet}
    words = [""]
    frontier = [""]
    for _ in range(radius):
        frontier = [w + c for w in frontier for c in alphabet if not (w and inv[c] == w[-1])]
        words.extend(frontier)
    labels = tuple(w or "e" for w in words)
    return from_metric(labels, _prefix_metric([tuple(w) for w in words]), _scales(scales), f"F{rank}",
                       Ambient("window", "freegroup", radius, (("rank", rank),)), check=False)


def two_points_far(radius: int = 0, scales=None) -> CoarseSpace:
    D = np.array([[0.0, np.inf], [np.inf, 0.0]])
    return from_metric(("a", "b"), D, _scales(scales), "TwoPoints", Ambient("finite", "twopoints", 0, ()))


def cycle(radius: int = 0, scales=None, n: int = 8) -> CoarseSpace:
    """Path metric on an n-cycle (a bounded space with a visible 1-cycle)."""
    idx = np.arange(n)
    d = np.abs(idx[:, None] - idx[None, :])
    D = np.minimum(d, n - d).astype(float)
    return from_metric(tuple(range(n)), D, _scales(scales), f"C{n}", Ambient("finite", "cycle", 0, (("n", n),)))


def custom(points, metric, scales=None, name="Custom") -> CoarseSpace:
    labels = tuple(tuple(p) if isinstance(p, list) else p for p in points)
    return from_metric(labels, np.asarray(metric, dtype=float), _scales(scales), name)


FAMILIES = {
    "zn": lambda radius, scales=None, dim=1, spacing=1: lattice(radius, scales, dim, spacing),
    "ray": lambda radius, scales=None: ray(radius, scales),
    "cylinder": lambda radius, scales=None, base=2: flasque_cylinder(radius, scales, base),
    "tree": lambda radius, scales=None, branching=2: tree(radius, scales, branching),
    "freegroup": lambda radius, scales=None, rank=2: free_group_ball(radius, scales, rank),
    "twopoints": lambda radius=0, scales=None: two_points_far(radius, scales),
    "cycle": lambda radius=0, scales=None, n=8: cycle(radius, scales, n),
}
for _name, _builder in FAMILIES.items():
    register_family(_name, _builder)

ALIASES = {"latticezn": "zn", "lattice": "zn", "ray": "ray", "flasquecylinder": "cylinder",
           "freegroupball": "freegroup", "twopointsfar": "twopoints", "group": "freegroup"}


# ---------------------------------------------------------------------------
# Actions


def reflection(dim: int = 1) -> GroupAction:
    """Z/2 acting by x -> -x on the first coordinate."""
    if dim == 1:
        rule = lambda x: -x  # noqa: E731
    else:
        rule = lambda x: (-x[0],) + tuple(x[1:])  # noqa: E731
    return GroupAction({"r": rule}, {"r": rule}, relations=("rr",), name="Z/2-reflection")


def cyclic_rotation(k: int, dim: int = 2, n: int | None = None) -> GroupAction:
    """Z/k by rotation: quarter/half turns of Z^2, or steps of n/k on an n-cycle."""
    if n is not None:
        step = n // k
        rule = lambda x: (x + step) % n  # noqa: E731
        inv = lambda x: (x - step) % n  # noqa: E731
    elif dim == 1 and k == 2:
        rule = inv = lambda x: -x  # noqa: E731
    elif dim == 2 and k == 4:
        rule = lambda p: (-p[1], p[0])  # noqa: E731
        inv = lambda p: (p[1], -p[0])  # noqa: E731
    elif dim == 2 and k == 2:
        rule = inv = lambda p: (-p[0], -p[1])  # noqa: E731
    else:
        raise ValueError(f"unsupported rotation Z/{k} on dimension {dim}")
    return GroupAction({"c": rule}, {"c": inv}, relations=("c" * k,), name=f"Z/{k}-rotation")


def swap() -> GroupAction:
    def rule(p):
        if isinstance(p, tuple):
            return (p[1], p[0]) + tuple(p[2:])
        return {"a": "b", "b": "a"}.get(p, p)

    return GroupAction({"s": rule}, {"s": rule}, relations=("ss",), name="swap")


def twisted_shift() -> GroupAction:
    """Z acting on Z^2 by (x, y) -> (x+1, 2y): proper but not isocoarse."""
    fwd = lambda p: (p[0] + 1, 2 * p[1])  # noqa: E731
    back = lambda p: (p[0] - 1, p[1] // 2) if p[1] % 2 == 0 else None  # noqa: E731
    return GroupAction({"t": fwd}, {"t": back}, name="twisted-Z")


def translation(step: int = 1) -> GroupAction:
    fwd = lambda x: x + step  # noqa: E731
    return GroupAction({"t": fwd}, {"t": lambda x: x - step}, name="Z-translation")


ACTIONS = {
    "reflection": lambda dim=1, **_: reflection(dim),
    "cyclicrotation": lambda k=2, dim=2, n=None, **_: cyclic_rotation(k, dim, n),
    "swap": lambda **_: swap(),
    "twistedshift": lambda **_: twisted_shift(),
    "translation": lambda step=1, **_: translation(step),
}


@dataclass
class ExampleSpec:
    family: str
    radius: int = 6
    scales: tuple | None = None
    params: dict = field(default_factory=dict)
    action: str | None = None
    action_params: dict = field(default_factory=dict)
    name: str | None = None

    @classmethod
    def from_json(cls, d: dict) -> "ExampleSpec":
        fam = d.get("family") or d.get("ambient", {}).get("family")
        if fam is None and "points" in d:
            fam = "custom"
        params = dict(d.get("params", {}))
        if fam == "custom":
            params.setdefault("points", d.get("points"))
            params.setdefault("metric", d.get("metric"))
        amb = d.get("ambient", {})
        radius = d.get("radius", amb.get("radius", 6))
        scales = d.get("scales")
        act = d.get("action")
        aparams = {}
        if isinstance(act, dict):
            aparams = {k: v for k, v in act.items() if k != "kind"}
            act = act.get("kind")
        return cls(fam, int(radius), tuple(scales) if scales is not None else None, params, act, aparams, d.get("name"))

    def to_json(self) -> dict:
        out = {"family": self.family, "radius": self.radius, "params": self.params}
        if self.scales is not None:
            out["scales"] = list(self.scales)
        if self.action:
            out["action"] = {"kind": self.action, **self.action_params}
        if self.name:
            out["name"] = self.name
        return out


def generate(spec: ExampleSpec):
    """Build (space, action or None) for an example description."""
    fam = spec.family.lower().replace("_", "").replace("-", "")
    fam = ALIASES.get(fam, fam)
    if fam == "custom":
        X = custom(spec.params["points"], spec.params["metric"], spec.scales, spec.name or "Custom")
    elif fam in FAMILIES:
        params = {k: v for k, v in spec.params.items()}
        X = FAMILIES[fam](spec.radius, spec.scales, **params)
    else:
        raise ValueError(f"unknown family {spec.family!r}")
    act = None
    if spec.action:
        key = spec.action.lower().replace("_", "").replace("-", "")
        if key not in ACTIONS:
            raise ValueError(f"unknown action {spec.action!r}")
        ap = dict(spec.action_params)
        if key in ("reflection", "cyclicrotation") and fam == "zn":
            ap.setdefault("dim", spec.params.get("dim", 1))
        if key == "cyclicrotation" and fam == "cycle":
            ap.setdefault("n", spec.params.get("n", 8))
        act = ACTIONS[key](**ap)
        if fam == "zn" and key == "twistedshift" and spec.params.get("dim", 1) != 2:
            raise ValueError("the twisted shift acts on Z^2")
    if spec.name and fam != "custom":
        object.__setattr__(X, "name", spec.name)
    return X, act
