"""Reading and writing: example specs, complexes as matrix-market files, reports."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .chains import GradedComplex
from .spaces import ExampleSpec, generate


def load_spec(path) -> ExampleSpec:
    with open(path) as fh:
        return ExampleSpec.from_json(json.load(fh))


def load_space(path):
    """(space, action or None) from a JSON example description."""
    return generate(load_spec(path))


def _key_json(key, labels=None):
    tup, j = key
    pts = [labels[x] if labels is not None else x for x in tup]
    return {"tuple": [list(p) if isinstance(p, tuple) else p for p in pts], "coeff": j}


def complex_manifest(cx: GradedComplex, labels=None) -> dict:
    """Bases, ring and variant of a complex, in a JSON-ready form."""
    return {
        "kind": cx.kind,
        "ring": str(cx.ring),
        "variant": cx.variant,
        "level": cx.level,
        "simplicial": cx.simplicial,
        "ranks": [cx.rank(p) for p in range(cx.top + 1)],
        "bases": [[[{**_key_json(k, labels), "sign": s} for k, s in orbit] for orbit in basis]
                  for basis in cx.bases],
        "flags": {k: v for k, v in cx.flags.items() if isinstance(v, (bool, int, float, str))},
    }


def export_complex(cx: GradedComplex, outdir, labels=None, stem: str = "d") -> dict:
    """Write ``d_p`` (chain-direction boundary C_p -> C_{p-1}) per degree plus manifest.json.

    Cochain complexes are written in the same chain convention; their
    coboundary is the transpose, as recorded in the manifest.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    man = complex_manifest(cx, labels)
    files = {}
    for p in range(1, cx.top + 1):
        M = cx.d[p]
        M = sp.coo_matrix(M if sp.issparse(M) else np.asarray(M, dtype=np.int64), dtype=np.int64)
        name = f"{stem}{p}.mtx"
        scipy.io.mmwrite(out / name, M, field="integer")
        files[p] = name
    man["matrices"] = files
    man["convention"] = "d_p maps C_p to C_{p-1}; the coboundary C^p -> C^{p+1} is d_{p+1} transposed"
    (out / "manifest.json").write_text(json.dumps(man, sort_keys=True, indent=2))
    return man


def read_matrix(path) -> np.ndarray:
    return np.asarray(scipy.io.mmread(path).todense()).astype(np.int64)


def dump_json(obj, path=None) -> str:
    text = json.dumps(obj, sort_keys=True, indent=2)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text
