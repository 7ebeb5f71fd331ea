import json

import pytest

from coarsehom.spaces import lattice
from coarsehom.suite import AXIOMS, SuiteConfig, SuiteReport, load_suite, subset, verify_suite


def labels(X, S):
    return sorted(X.labels[i] for i in S)


def test_subset_language():
    X = lattice(3)
    assert labels(X, subset(X, {"le": 0})) == [-3, -2, -1, 0]
    assert labels(X, subset(X, {"abs_ge": 2})) == [-3, -2, 2, 3]
    assert labels(X, subset(X, {"and": [{"ge": -1}, {"le": 1}]})) == [-1, 0, 1]
    assert labels(X, subset(X, {"minus": ["all", {"abs_le": 2}]})) == [-3, 3]
    assert labels(X, subset(X, {"not": {"ge": 0}})) == [-3, -2, -1]
    assert labels(X, subset(X, {"labels": [1, 7]})) == [1]
    Y = lattice(1, dim=2)
    assert len(subset(Y, {"ge": 1, "axis": 1})) == 3
    with pytest.raises(ValueError):
        subset(X, {"between": 2})


def test_default_corpus_sizes():
    cfg, corpus = load_suite()
    raw = corpus.raw
    assert len(corpus.spaces) >= 10
    assert len(raw["pairs"]) >= 6 and len(raw["triples"]) >= 4
    assert len(raw["homotopies"]) >= 3 and len(raw["flasque"]) >= 2 and len(raw["actions"]) >= 2
    assert set(cfg.axioms) <= set(AXIOMS)


def test_report_bookkeeping():
    rep = SuiteReport()
    rep.add("exactness", "a", True)
    rep.add("exactness", "b", False, {"why": (1, 2)})
    rep.add("excision", "c", False, inconclusive=True)
    assert not rep.ok and len(rep.failures) == 1
    assert rep.summary()["exactness"] == {"pass": 1, "fail": 1, "inconclusive": 0}
    json.dumps(rep.to_json())


def test_small_suite_runs(tmp_path):
    suite = {
        "config": {"axioms": ["exactness", "excision", "mayer_vietoris", "negative"], "level": 1},
        "spaces": {"Z": {"family": "zn", "radius": 5}},
        "pairs": [{"space": "Z", "A": {"le": 0}}],
        "triples": [{"space": "Z", "A": {"le": 0}, "B": {"ge": 0}}],
        "negative": [{"kind": "non_excisive", "space": "Z", "A": {"le": 0}, "B": {"ge": 1}}],
    }
    path = tmp_path / "suite.json"
    path.write_text(json.dumps(suite))
    cfg, corpus = load_suite(path)
    rep = verify_suite(cfg, corpus)
    assert rep.ok, rep.failures
    assert {r["axiom"] for r in rep.rows} == {"exactness", "excision", "mayer_vietoris", "negative"}


def test_broken_triple_is_reported(tmp_path):
    suite = {
        "config": {"axioms": ["excision"], "level": 1, "kinds": ["chain"]},
        "spaces": {"Z": {"family": "zn", "radius": 5}},
        # excision runs on C = X minus B; this cover has no overlap, so nothing survives
        "triples": [{"space": "Z", "A": {"le": 0}, "B": {"ge": 1}}],
    }
    path = tmp_path / "suite.json"
    path.write_text(json.dumps(suite))
    rep = verify_suite(*load_suite(path))
    assert {r["item"].rsplit(":", 1)[1] for r in rep.failures} == {"excisive", "chain"}
