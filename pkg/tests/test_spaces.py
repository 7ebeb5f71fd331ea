import pytest

from coarsehom.maps import check_action
from coarsehom.spaces import ExampleSpec, generate


def test_ray_window():
    X, _ = generate(ExampleSpec("Ray", 20, (0, 1, 2, 3)))
    assert X.labels == tuple(range(21)) and X.depth == 3
    assert X.is_window and X.regenerate(25).size == 26


def test_plane_window():
    X, _ = generate(ExampleSpec("LatticeZn", 6, params={"dim": 2}))
    assert X.size == 169
    # max metric: diagonal neighbours are at scale 1
    assert X.chain.level_of((X.index[(0, 0)], X.index[(1, 1)])) == 1


def test_reflection_passes_gate():
    X, act = generate(ExampleSpec.from_json({"family": "zn", "radius": 5, "action": "reflection"}))
    rep = check_action(act, X)
    assert rep["proper"].ok and rep["isocoarse"].ok


def test_json_roundtrip():
    d = {"family": "cycle", "params": {"n": 6}, "action": {"kind": "cyclic_rotation", "k": 3}, "name": "C6"}
    spec = ExampleSpec.from_json(d)
    assert ExampleSpec.from_json(spec.to_json()) == spec
    X, act = generate(spec)
    assert X.size == 6 and X.name == "C6" and act is not None


def test_custom_and_errors():
    X, _ = generate(ExampleSpec.from_json({"points": ["a", "b"], "metric": [[0, 2], [2, 0]], "scales": [0, 2]}))
    assert X.chain.level_of((0, 1)) == 1
    with pytest.raises(ValueError):
        generate(ExampleSpec("moebius"))
    with pytest.raises(ValueError):
        generate(ExampleSpec("zn", 3, action="twisted_shift"))
