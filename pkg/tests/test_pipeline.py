import pytest

from coarsehom.core import CapExceeded
from coarsehom.linalg import QQ, ZZ
from coarsehom.pipeline import GateRejected, PipelineConfig, compute_coarsified, oracle_relative
from coarsehom.spaces import cycle, lattice, ray, reflection, twisted_shift, two_points_far

SMALL = PipelineConfig(windows=(4, 6, 8), oracle=True)


def summary(rep):
    return [(d["betti"], tuple(d["torsion"])) for d in rep.degrees]


@pytest.mark.parametrize("kind", ["homology", "cohomology"])
def test_line(kind):
    rep = compute_coarsified(lattice(8), ZZ, kind, SMALL)
    assert summary(rep) == [(0, ()), (1, ()), (0, ())]
    assert rep.oracle["agree"] and rep.tower["chain_maps_ok"]
    assert rep.independence["isomorphic"]
    assert all(d["stabilized_at"] == 0 for d in rep.degrees)


def test_ray_vanishes():
    rep = compute_coarsified(ray(8), ZZ, "chain", SMALL)
    assert summary(rep) == [(0, ())] * 3


def test_finite_spaces_use_levels():
    rep = compute_coarsified(two_points_far(), ZZ, "chain", PipelineConfig())
    assert rep.tower["kind"] == "level"
    assert summary(rep)[0] == (2, ())
    circle = compute_coarsified(cycle(n=8), ZZ, "chain", PipelineConfig(oracle=True))
    # the circle fills in at large scale: its coarse type is a point
    assert summary(circle) == [(1, ()), (0, ()), (0, ())]
    assert circle.oracle["agree"]


def test_matches_brute_force_relative_oracle():
    rep = compute_coarsified(lattice(8), ZZ, "chain", SMALL)
    ref = oracle_relative(lattice(8), 8, 1)
    assert summary(rep) == [(b, tuple(t)) for b, t in ref]


def test_report_serialization_is_deterministic():
    a = compute_coarsified(lattice(6), ZZ, "chain", PipelineConfig(windows=(4, 6)))
    b = compute_coarsified(lattice(6), ZZ, "chain", PipelineConfig(windows=(4, 6)))
    assert a.dumps() == b.dumps()
    assert a.to_csv().splitlines()[0] == "degree,betti,torsion,stabilized_at"
    assert "seconds" not in a.to_json() and "seconds" in a.to_json(timing=True)


def test_gate():
    rep = compute_coarsified(lattice(6), QQ, "chain", PipelineConfig(windows=(4, 6), equivariant=True), reflection())
    assert rep.gate["isocoarse"] == "pass"
    with pytest.raises(GateRejected):
        compute_coarsified(lattice(3, dim=2), ZZ, "chain", PipelineConfig(windows=(2, 3), equivariant=True),
                           twisted_shift())


def test_cap_gives_partial_report(monkeypatch):
    monkeypatch.setenv("COARSEHOM_CAP", "10")
    rep = compute_coarsified(lattice(6), ZZ, "chain", PipelineConfig(windows=(4, 6)))
    assert rep.partial
    assert "COARSEHOM_CAP" in rep.notes[0]
