import math

import pytest

import qcavity


def test_single_bond_methods_agree():
    inst = qcavity.Instance(2, [(0, 1, 1.0)], [0.5, 0.5])
    exact = qcavity.exact_ground_state(inst)
    assert exact["energy"] == pytest.approx(-math.sqrt(2.0), abs=1e-10)
    assert qcavity.ss_solve(inst)["energy"] == pytest.approx(-math.sqrt(2.0), abs=1e-3)
    gs = qcavity.gs_solve(inst, {"rounds": 4})
    assert gs["energy"] == pytest.approx(-math.sqrt(2.0), abs=1e-3)


def test_product_state_bounds_the_ground_energy():
    inst = qcavity.chain(8, "gaussian", 1.0, seed=3)
    mf = qcavity.mf_solve(inst)
    assert mf["energy"] >= qcavity.exact_ground_state(inst)["energy"] - 1e-8
    obs = qcavity.ansatz_observables(inst, mf["B"], [0.0] * len(inst.edges))
    assert obs["energy"] == pytest.approx(mf["energy"], abs=1e-9)


def test_instances_round_trip_through_json():
    inst = qcavity.rrg(10, 3, "pm_one", 0.7, seed=4)
    again = qcavity.Instance.from_json(inst.to_json())
    assert again.edges == inst.edges
    assert again.h == inst.h
    assert len(inst.edges) == 15


def test_runner_returns_records_in_method_order():
    records = qcavity.run("graph=chain\nn=6\nmethods=mf,exact\nh=0.5,1.5\n")
    assert [r["method"] for r in records] == ["mf", "mf", "exact", "exact"]
    for mf, ex in zip(records[:2], records[2:]):
        assert mf["E_per_spin"] >= ex["E_per_spin"] - 1e-8


def test_homogeneous_critical_fields():
    scan = qcavity.homog_scan(3, 1.5, 3.5, 0.1)
    assert 2.24 <= scan["ising"]["h_c"] <= 2.34
    assert scan["mean_field"]["h_c"] == pytest.approx(3.0, abs=0.01)


def test_errors_map_to_value_error():
    with pytest.raises(ValueError):
        qcavity.rrg(5, 3)
    with pytest.raises(ValueError):
        qcavity.run("methods=nope\n")
    with pytest.raises(ValueError):
        qcavity.exact_ground_state(qcavity.chain(30, h=1.0))
