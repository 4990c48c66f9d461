import json

import pytest

from framelab.errors import InvalidConfig
from framelab.experiments import (
    PRESET_BUDGETS,
    PRESETS,
    Check,
    ExperimentConfig,
    build_config,
    evaluate_check,
    parse_set_values,
    recheck_report,
    run_pipeline,
    run_preset,
)
from framelab.settings import config


# ---------- Config ----------
def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.measure == "uniform(0,1)"
    assert cfg.grid == 256
    assert cfg.power == 2
    assert cfg.k_values == [2, 4, 8, 16, 32]
    assert cfg.checks == []


def test_text_format_round_trip():
    cfg = ExperimentConfig(measure="bernoulli(0.7)", pipeline=["tile", "cover"], half_open=True,
                           h_values=[25.0, 50.5], checks=["tile.verdict==Tile", "cover.lebesgue_est<=1"])
    assert ExperimentConfig.from_text(cfg.to_text()) == cfg


def test_from_text_parses_lists():
    cfg = ExperimentConfig.from_text("measure=triangle\nk_values=2,4\nchecks='a.b>=1;c.d<2'\n")
    assert cfg.k_values == [2, 4]
    assert cfg.checks == ["a.b>=1", "c.d<2"]


@pytest.mark.parametrize("text", [
    "colour=blue\n",
    "power=3\n",
    "grid=0\n",
    "grid\n",
    "pipeline=frame_bounds,teleport\n",
    "eigen_method=qr\n",
])
def test_invalid_text(text):
    with pytest.raises(InvalidConfig):
        ExperimentConfig.from_text(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(InvalidConfig):
        ExperimentConfig.from_file(tmp_path / "absent.cfg")


def test_packaged_example_config_loads():
    from pathlib import Path

    cfg = ExperimentConfig.from_file(Path(config.SETTINGS_FILE).parent / "example.cfg")
    assert cfg.measure == "triangle"
    assert "frame_verdict" in cfg.pipeline


def test_preset_default_precedence():
    cfg = build_config({"preset": "landau"})
    assert cfg.measure == "uniform(0,2)"
    assert cfg.grid == 128
    assert build_config({"preset": "landau", "grid": "32"}).grid == 32
    assert build_config({"preset": "landau", "grid": "32"}, {"grid": 64}).grid == 64


def test_unknown_preset():
    with pytest.raises(InvalidConfig):
        build_config({"preset": "fourier-magic"})
    with pytest.raises(InvalidConfig):
        run_preset("fourier-magic", out_dir=False)


def test_presets_are_listed_in_settings():
    assert list(PRESETS) == config.PRESETS
    assert set(PRESET_BUDGETS) == set(PRESETS)


def test_parse_set_values():
    assert parse_set_values(["grid=512", " measure = triangle "]) == {"grid": "512", "measure": "triangle"}
    assert parse_set_values(None) == {}
    with pytest.raises(InvalidConfig):
        parse_set_values(["grid"])


# ---------- Checks ----------
@pytest.mark.parametrize("value,op,threshold,expected", [
    (1.0, "<=", 1.0, True),
    (1.0, "<", 1.0, False),
    (2.0, ">", 1.0, True),
    ("Tile", "==", "Tile", True),
    (1.5, "in", [1.0, 2.0], True),
    (2.5, "in", [1.0, 2.0], False),
    (float("nan"), "<=", 1.0, False),
    (None, ">=", 0.0, False),
    (1.0, "~", 1.0, False),
])
def test_evaluate_check(value, op, threshold, expected):
    assert evaluate_check(value, op, threshold) is expected


def test_check_to_dict():
    record = Check("A_est", 0.5, ">=", 0.25).to_dict()
    assert record == {"name": "A_est", "value": 0.5, "op": ">=", "threshold": 0.25, "passed": True}


# ---------- Presets ----------
def test_parseval_is_tight():
    report = run_preset("parseval", out_dir=False)
    assert report.passed
    assert report.results["frame_bounds"]["A_est"] == pytest.approx(1.0, abs=1e-8)
    assert report.results["frame_bounds"]["B_est"] == pytest.approx(1.0, abs=1e-8)


def test_reports_are_byte_identical(tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    run_preset("parseval", out_dir=first)
    run_preset("parseval", out_dir=second)
    for name in ("report.json", "frame_trace.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    timing = json.loads((first / "timing.json").read_text())
    assert timing["budget_s"] == PRESET_BUDGETS["parseval"]


def test_recheck_written_report():
    report = json.loads(run_preset("parseval", out_dir=False).to_json())
    assert recheck_report(report) == {"passed": True, "consistent": True,
                                      "checks": {"A_est_minus_1": True, "B_est_minus_1": True}}
    report["checks"][0]["value"] = 1.0
    rechecked = recheck_report(report)
    assert not rechecked["passed"]
    assert not rechecked["consistent"]


def test_recheck_report_from_file(tmp_path):
    run_preset("parseval", out_dir=tmp_path)
    rechecked = recheck_report(tmp_path / "report.json")
    assert rechecked["passed"]
    assert rechecked["consistent"]


def test_example51_scan():
    report = run_preset("example51", out_dir=False)
    assert report.passed
    assert report.results["scan_min"] == pytest.approx(1 / 3, abs=1e-3)
    assert report.results["scan_argmin"] == pytest.approx(0.5, abs=1 / 512)


def test_bernoulli_tile_preset():
    report = run_preset("bernoulli-tile", out_dir=False)
    assert report.passed
    assert report.results["cantor"]["verdict"] == "Singular"
    assert set(report.tables) == {"tile_verdicts", "lower_density"}


def test_seip_lower_bound_is_stable():
    report = run_preset("seip", out_dir=False)
    assert report.passed, [c.to_dict() for c in report.checks if not c.passed]
    trace = report.tables["frame_trace"]
    assert list(trace["grid_n"]) == [80, 160, 320]
    assert list(trace["spectrum_size"]) == [96, 192, 384]


def test_preset_overrides_change_the_outcome():
    overrides = {"spectrum": "lattice(1,0,window=[0,127])", "grid": 128}
    report = run_preset("parseval", overrides, out_dir=False)
    assert report.inputs["spectrum"] == "lattice(1,0,window=[0,127])"
    assert report.inputs["grid"] == 128
    assert report.passed

    # fewer frequencies than grid cells leave the frame operator singular
    report = run_preset("parseval", {"grid": 512}, out_dir=False)
    assert not report.passed
    assert report.results["frame_bounds"]["A_est"] == pytest.approx(0.0, abs=1e-8)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["oversample", "landau", "triangle-noframe",
                                  "invsqrt-noframe", "prop24", "mass-decay", "translate"])
def test_remaining_presets_pass(name):
    report = run_preset(name, out_dir=False)
    assert report.passed, [c.to_dict() for c in report.checks if not c.passed]


# ---------- Custom pipelines ----------
def test_custom_mass_decay_pipeline():
    cfg = ExperimentConfig(measure="bernoulli(0.7)", pipeline=["mass_decay", "tile"], mc_samples=20000)
    report = run_pipeline(cfg, out_dir=False)
    assert set(report.results["mass_decay"]["ratios"].values()) == {0.5}
    assert report.results["tile"]["verdict"] == "NotTile_ContractionMismatch"
    assert report.experiment_id == "pipeline"


def test_tile_step_takes_the_regime_flag():
    cfg = ExperimentConfig(measure="bernoulli(0.7)", pipeline=["tile"], absolutely_continuous=False)
    report = run_pipeline(cfg, out_dir=False)
    assert report.results["tile"]["verdict"] == "Singular"
    assert report.results["tile"]["evidence"]["regime_source"] == "flag"


def test_custom_checks():
    passing = ExperimentConfig(pipeline=["frame_bounds"], spectrum="lattice(1,0,window=[0,255])", grid=256,
                               checks=["frame_bounds.A_est>=0.99", "frame_bounds.B_est<=1.01"])
    report = run_pipeline(passing, out_dir=False)
    assert report.passed
    assert [c.name for c in report.checks] == passing.checks

    failing = passing.model_copy(update={"checks": ["frame_bounds.A_est>=2"]})
    assert not run_pipeline(failing, out_dir=False).passed


def test_custom_check_on_missing_result():
    cfg = ExperimentConfig(pipeline=["epsilon"], checks=["frame_bounds.A_est>=0.5"])
    with pytest.raises(InvalidConfig):
        run_pipeline(cfg, out_dir=False)


def test_pipeline_needs_steps():
    with pytest.raises(InvalidConfig):
        run_pipeline(ExperimentConfig(), out_dir=False)


def test_self_similar_step_rejects_density():
    with pytest.raises(InvalidConfig):
        run_pipeline(ExperimentConfig(pipeline=["tile"]), out_dir=False)
