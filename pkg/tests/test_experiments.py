import csv
import json
from fractions import Fraction as F

import pytest

from floydkit.cli import main
from floydkit.experiments import (
    DRIVERS,
    ExperimentConfig,
    ExperimentError,
    UsageError,
    run_experiment,
    translated_side_distance,
    triangle_thinness,
    triangle_thinness_scan,
)
from floydkit.functions import exponential
from floydkit.groups import FreeAbelianGroup, FreeGroup, build_ball, load_group

HALF = exponential(F(1, 2))
Z2 = FreeAbelianGroup(2)

SMALL = {
    "floyd-dist": {"group": "Z2", "radius": 4, "params": {"pair_radius": 1}},
    "karlsson-scan": {"group": "F2", "radius": 4, "params": {"r": [1, 2]}},
    "hull": {"group": "Z2", "radius": 3, "c": "1", "params": {"M": ["1", "x y"]}},
    "qi-check": {"f": "invpow:2", "radius": 3, "params": {
        "map": {"source": "Z", "target": "F2", "rule": "subgroup-inclusion",
                "images": {"a": "a"}, "c": "1"}, "margin": 6}},
    "shortcut": {"group": "F2", "radius": 3, "params": {
        "points": ["1", "a", "b", "a a"], "classes": [0, 1, 1, 2]}},
    "triangles": {"group": "Z2", "radius": 3, "params": {"sample_budget": 500}},
    "quasiconvexity": {"group": "Z2*Z", "radius": 3, "params": {
        "map": {"source": "Z2", "target": "Z2*Z", "rule": "subgroup-inclusion",
                "images": {"x": "x", "y": "y"}, "c": "1"}}},
}


def test_every_driver_has_a_small_config():
    assert set(SMALL) == set(DRIVERS)


# -- triangles ----------------------------------------------------------------------


def test_tree_triangles_are_tripods():
    for R in range(1, 4):
        rep = triangle_thinness_scan(build_ball(FreeGroup(2), R))
        assert rep.max_thinness == 0
        # 53 vertices at radius 3 give more triples than the default budget
        assert rep.exhaustive == (R < 3)


def test_lattice_triangle_thinness():
    L = build_ball(Z2, 4)
    w = triangle_thinness(L, ["1", "x x x x", "y y y y"], choice="exhaustive")
    assert w.thinness == 2
    assert str(L.vertices[w.point]) == "x x y y"
    lex = triangle_thinness(L, ["1", "x x x x", "y y y y"], choice="lex")
    assert lex.thinness <= w.thinness


def test_thinness_is_the_distance_from_the_other_sides():
    L = build_ball(Z2, 3)
    w = triangle_thinness(L, ["1", "x x", "y y"])
    side = w.sides[w.side]
    others = w.sides[(w.side + 1) % 3] + w.sides[(w.side + 2) % 3]
    assert w.point in side
    assert w.thinness == min(L.group_distance(w.point, q) for q in others)


def test_exhaustive_choice_respects_the_cap():
    L = build_ball(Z2, 4)
    assert triangle_thinness(L, ["X X", "x x", "y y"], choice="exhaustive", combo_cap=1) is None


def test_sampled_scan_is_seeded():
    L = build_ball(Z2, 3)
    a = triangle_thinness_scan(L, sample_budget=200, seed=5)
    b = triangle_thinness_scan(L, sample_budget=200, seed=5)
    assert not a.exhaustive
    assert a.to_dict(L) == b.to_dict(L)


def test_translated_side_is_short():
    L = build_ball(Z2, 4)
    w = triangle_thinness(L, ["1", "x x x x", "y y y y"], choice="exhaustive")
    tr = translated_side_distance(Z2, w, L, HALF, margin=6)
    assert tr.lower <= tr.upper
    assert all(e.length <= 4 for e in tr.endpoints)


# -- configuration and drivers ----------------------------------------------------------


def test_empty_config_is_a_usage_error():
    with pytest.raises(UsageError, match="empty"):
        ExperimentConfig.from_dict({})
    with pytest.raises(UsageError):
        ExperimentConfig.from_dict({"driver": "nope"})


def test_missing_params_are_usage_errors(tmp_path):
    with pytest.raises(UsageError, match="params.M"):
        run_experiment({"driver": "hull", "out": str(tmp_path)})


def test_module_errors_name_the_stage(tmp_path):
    with pytest.raises(ExperimentError, match="stage 'hull'"):
        run_experiment({"driver": "hull", "group": "F2", "radius": 2, "out": str(tmp_path),
                        "params": {"M": ["a a a a"]}})
    with pytest.raises(ExperimentError, match="stage 'build ball'"):
        run_experiment({"driver": "triangles", "group": "F3", "radius": 9, "budget": 50,
                        "out": str(tmp_path)})


@pytest.mark.parametrize("driver", DRIVERS)
def test_driver_outputs(driver, tmp_path):
    cfg = dict(SMALL[driver], driver=driver, out=str(tmp_path))
    doc = run_experiment(cfg)
    lines = (tmp_path / f"{driver}.csv").read_text().splitlines()
    assert lines[0].startswith("# config: ")
    assert json.loads(lines[0][len("# config: "):]) == doc["config"]
    rows = list(csv.reader(lines[1:]))
    assert rows[0] == doc["columns"]
    assert len(rows) - 1 == len(doc["rows"]) > 0
    assert json.loads((tmp_path / f"{driver}.json").read_text()) == doc


@pytest.mark.parametrize("driver", DRIVERS)
def test_drivers_are_deterministic(driver, tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / str(k)
        run_experiment(dict(SMALL[driver], driver=driver, out=str(out)))
        outs.append(((out / f"{driver}.csv").read_bytes(), (out / f"{driver}.json").read_bytes()))
    # the output directory is part of the config line, so compare with it normalised
    norm = [tuple(b.replace(str(tmp_path / str(k)).encode(), b"OUT") for b in pair)
            for k, pair in enumerate(outs)]
    assert norm[0] == norm[1]


def test_driver_results():
    import tempfile
    with tempfile.TemporaryDirectory() as out:
        doc = run_experiment(dict(SMALL["karlsson-scan"], driver="karlsson-scan", out=out))
        assert doc["summary"] == {"mode": "exhaustive", "passed": True}
        assert [r["empirical_max"] for r in doc["rows"]] == ["3/4", "1/4"]
        doc = run_experiment(dict(SMALL["hull"], driver="hull", out=out))
        assert sorted(r["member"] for r in doc["rows"]) == ["1", "x", "x y", "y"]
        doc = run_experiment(dict(SMALL["shortcut"], driver="shortcut", out=out))
        by_pair = {(r["point_i"], r["point_j"]): r["shortcut"] for r in doc["rows"]}
        assert by_pair["a", "b"] == "0/1"
        assert by_pair["1", "a a"] == "1/1"
        doc = run_experiment(dict(SMALL["qi-check"], driver="qi-check", out=out))
        assert doc["summary"]["passed"] is True
        doc = run_experiment(dict(SMALL["quasiconvexity"], driver="quasiconvexity", out=out))
        assert doc["rows"][0]["max_deviation"] == 0


# -- command line -------------------------------------------------------------------------


def test_cli_runs_a_driver(tmp_path, capsys):
    code = main(["triangles", "--group", "F2", "--radius", "2", "--out", str(tmp_path)])
    assert code == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["summary"] == {"max_thinness": 0}
    assert (tmp_path / "triangles.csv").exists()


def test_cli_params_and_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"driver": "hull", "group": "Z2", "radius": 3, "out": str(tmp_path)}))
    code = main(["hull", "--config", str(cfg), "--radius", "9", "--param", 'M=["1", "x x"]'])
    assert code == 0
    doc = json.loads((tmp_path / "hull.json").read_text())
    assert doc["config"]["radius"] == 3
    assert sorted(r["member"] for r in doc["rows"]) == ["1", "x", "x x"]


def test_cli_exit_codes(tmp_path, capsys):
    empty = tmp_path / "empty.json"
    empty.write_text("{}")
    assert main(["hull", "--config", str(empty)]) == 2
    assert "empty experiment configuration" in capsys.readouterr().err
    assert main(["hull", "--group", "F2", "--radius", "2", "--out", str(tmp_path),
                 "--param", 'M=["a a a a"]']) == 1
    assert "stage 'hull'" in capsys.readouterr().err
