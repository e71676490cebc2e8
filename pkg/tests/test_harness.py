"""Experiment plans, sweeps, reports and file formats."""
import json
import math

import numpy as np
import pytest
from conftest import periodic_nodes

from mkmesh import formats
from mkmesh.harness import ExperimentPlan, PDE_SYSTEMS, convergence_cell, fit_slope, run_convergence, run_plan
from mkmesh.schemes import SchemeSpec, build_bundle

PLAN = """
[plan]
kind = convergence
method = rbf-fd
orders = 1, 2
spacings = 1/8, 1/12, 1/16
seeds = 1, 2
k_m = convergence
operators = ddx
"""


def test_plan_parsing():
    plan = ExperimentPlan.from_string(PLAN)
    assert plan.orders == (1, 2) and plan.seeds == (1, 2)
    assert plan.spacings == (0.125, 1 / 12, 0.0625)
    assert plan.kernels == ("gaussian-rbf", "inverse-multiquadric")
    assert plan.operators == ("ddx",)
    pde = ExperimentPlan.from_string("[plan]\nkind = pde\nspacings = 1/10\n[pde]\nsystems = burgers\n"
                                     "burgers_re = 5\nfiltered = yes\n")
    assert pde.systems == ("burgers",) and pde.burgers_re == 5.0 and pde.filtered


@pytest.mark.parametrize("text", [
    "[plan]\nkind = sweep\nspacings = 0.1\n",
    "[plan]\nkind = convergence\n",
    "[plan]\nkind = convergence\nspacings = 0.1\nmethod = fem\n",
    "[plan]\nkind = convergence\nspacings = 0.1\nmethod = sph\nkernels = gaussian-rbf, inverse-multiquadric\n",
    "[plan]\nkind = convergence\nspacings = 0.1\nk_m = 1.5\n",
    "[plan]\nkind = pde\nspacings = 0.1\n[pde]\nsystems = taylor-green\n",
    "[other]\nkind = pde\n",
])
def test_plan_errors(text):
    with pytest.raises(ValueError):
        ExperimentPlan.from_string(text)


def test_no_three_dimensional_system():
    assert all("taylor" not in s for s in PDE_SYSTEMS)


def test_fit_slope():
    s = np.array([0.1, 0.05, 0.025, 0.0125])
    slope, resid = fit_slope(s, 3.0 * s ** 4)
    assert slope == pytest.approx(4.0) and resid < 1e-12
    assert all(math.isnan(v) for v in fit_slope(s[:2], s[:2]))
    slope, _ = fit_slope(s, np.array([1e-2, np.nan, 1e-4, 2.5e-5]))
    assert np.isfinite(slope)


def test_convergence_cell_shapes():
    recs = convergence_cell("labfm", 4, 1 / 15, 1)
    assert [r.operator for r in recs] == ["ddx", "laplacian"]
    for r in recs:
        assert 0 < r.l2_sk1 < 1 and r.l2_mk > 0 and r.R == pytest.approx(r.l2_mk / r.l2_sk1)


def test_run_convergence_outputs_are_reproducible(tmp_path):
    plan = ExperimentPlan.from_string(PLAN)
    a = run_convergence(plan, tmp_path / "a")
    run_convergence(plan, tmp_path / "b")
    for name in ("convergence.csv", "slopes.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["plan_hash"] == formats.config_hash(plan.to_dict())
    for entry in manifest["artifacts"]:
        assert entry["config_hash"] == formats.config_hash(entry["config"])
    assert len(a.records) == 2 * 3 * 2
    assert len(a.ratios("rbf-fd", 2, "ddx")) == 3


def test_failed_cells_are_recorded(tmp_path):
    plan = ExperimentPlan("convergence", "rbf-fd", (3,), (1 / 4, 1 / 10), (1,), operators=("ddx",))
    result = run_convergence(plan, tmp_path)
    errors = [r for r in result.records if r.error]
    assert len(errors) == 1 and errors[0].s == 0.25
    header, rows = formats.read_rows(tmp_path / "convergence.csv")
    assert len(rows) == 2


def test_respower_and_stability_reports(tmp_path):
    plan = ExperimentPlan.from_string("[plan]\nkind = respower\nmethod = labfm\norders = 4\nspacings = 1/15\n")
    eps = run_plan(plan, tmp_path / "r")
    assert set(eps) == {("labfm-m4", "ddx"), ("labfm-m4", "laplacian")}
    header, rows = formats.read_rows(tmp_path / "r" / "raycurve_labfm-m4_ddx_mk.csv")
    assert header == ["k_hat", "re_keff_mean", "im_keff_mean", "ray_slope"] and len(rows) == 150
    stab = ExperimentPlan.from_string("[plan]\nkind = stability\nmethod = sph\nspacings = 1/12\nseeds = 7\n")
    summary = run_plan(stab, tmp_path / "s")
    assert len(summary) == 6
    assert (tmp_path / "s" / "stability_summary.csv").exists()


def test_pde_suite_cells(tmp_path):
    plan = ExperimentPlan.from_string("[plan]\nkind = pde\norders = 4\nspacings = 1/10\n[pde]\n"
                                      "systems = poisson-periodic, burgers\nburgers_t_end = 0.02\n")
    results = run_plan(plan, tmp_path)
    assert [cfg["system"] for cfg, _ in results] == ["poisson-periodic", "burgers"]
    for _, rep in results:
        assert not isinstance(rep, str)
    names = {e["path"] for e in json.loads((tmp_path / "manifest.json").read_text())["artifacts"]}
    assert any(n.startswith("errors_burgers") for n in names)
    assert any(n.startswith("field_poisson-periodic") and n.endswith("_exact.csv") for n in names)


def test_weight_dump_round_trip(tmp_path):
    nodes = periodic_nodes(1 / 12, 3)
    ws = build_bundle(nodes, SchemeSpec("rbf-fd", 2), ops=("laplacian",)).get("laplacian", "mk")
    path = formats.write_weights(tmp_path / "w.csv", ws)
    back = formats.read_weights(path, nodes)
    assert np.array_equal(back.weights, ws.weights)
    assert np.array_equal(back.stencils.indices, ws.stencils.indices)
    assert np.allclose(back.stencils.offsets, ws.stencils.offsets, atol=1e-15)
    assert str(back.operator) == "laplacian" and back.m == 2
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        formats.read_weights(tmp_path / "bad.csv", nodes)


def test_config_hash_is_canonical():
    assert formats.config_hash({"a": 1, "b": 0.1}) == formats.config_hash({"b": 0.1, "a": 1})
    assert formats.config_hash({"a": 1}) != formats.config_hash({"a": 2})
