"""Config validation, boundary expressions, runs, and bundle writing."""

import copy
import json

import numpy as np
import pytest

from aplab.core import build_grid
from aplab.experiment import (
    CSV_COLUMNS,
    ConfigError,
    build_problem,
    config_digest,
    eval_boundary_expression,
    load_config,
    run_experiment,
    validate_config,
    write_bundle,
)


def tiny_config():
    return {
        "seed": 0,
        "problem": {
            "p": 2.0,
            "gamma": 1.0,
            "lambda_plus": 0.5,
            "lambda_minus": 0.5,
            "delta": 1.0,
            "extents": [[-1.0, 1.0]],
            "resolution": [129],
            "boundary": "0.25 * pow(max(x, 0), 2)",
        },
        "diagnostics": {
            "growth": {"center": [0.0], "radii": [0.125, 0.25, 0.5]},
            "density": {"center": [0.0], "radii": [0.125, 0.25]},
            "replacement": {"center": [0.0], "radius": 0.25},
            "scaling": {"center": [0.0], "r_values": [0.5], "radius": 0.25},
            "inequalities": {
                "names": ["sum"],
                "p_values": [2.0],
                "n_pairs": 500,
                "eps": 1.0,
            },
        },
    }


# ---------------------------------------------------------------------------
# validation


def test_valid_config_passes():
    validate_config(tiny_config())


@pytest.mark.parametrize(
    "mutate,fragment",
    [
        (lambda c: c.update(extra=1), "extra"),
        (lambda c: c.pop("problem"), "problem"),
        (lambda c: c["problem"].update(p=1.0), "p"),
        (lambda c: c["problem"].update(resolution=[129, 129]), "equal length"),
        (lambda c: c["problem"].update(extents=[[1.0, -1.0]]), "not increasing"),
        (lambda c: c.pop("seed"), "seed is required"),
        (
            lambda c: c["diagnostics"]["growth"].update(center=[0.0, 0.0]),
            "center",
        ),
        (
            lambda c: c["diagnostics"]["growth"].update(fit_window=[0.5, 0.25]),
            "fit_window",
        ),
        (
            lambda c: c["diagnostics"].update(minkowski={"eps_ladder": []}),
            "minkowski",
        ),
        (
            lambda c: c["diagnostics"]["inequalities"].update(names=["triangle"]),
            "names",
        ),
    ],
)
def test_invalid_configs_rejected(mutate, fragment):
    cfg = tiny_config()
    mutate(cfg)
    with pytest.raises(ConfigError, match=fragment):
        validate_config(cfg)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="root must be"):
        load_config(arr)


def test_load_config_round_trip(tmp_path):
    cfg = tiny_config()
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    assert load_config(path) == cfg


def test_config_digest_is_key_order_independent():
    cfg = tiny_config()
    reordered = json.loads(json.dumps(cfg, sort_keys=True))
    assert config_digest(cfg) == config_digest(reordered)
    changed = copy.deepcopy(cfg)
    changed["problem"]["p"] = 3.0
    assert config_digest(changed) != config_digest(cfg)


# ---------------------------------------------------------------------------
# boundary expressions


def test_expression_evaluates_on_nodes():
    grid = build_grid(((-1.0, 1.0),), (9,))
    out = eval_boundary_expression("0.25 * pow(max(x, 0), 2)", grid)
    np.testing.assert_allclose(out, 0.25 * np.clip(grid.axes[0], 0, None) ** 2)


def test_expression_2d_and_broadcasting():
    grid = build_grid(((0.0, 1.0), (0.0, 2.0)), (5, 5))
    X, Y = np.meshgrid(grid.axes[0], grid.axes[1], indexing="ij")
    np.testing.assert_allclose(
        eval_boundary_expression("x * y + 1", grid), X * Y + 1.0
    )
    constant = eval_boundary_expression("2.5", grid)
    assert constant.shape == grid.shape
    np.testing.assert_array_equal(constant, 2.5)


@pytest.mark.parametrize(
    "expr",
    [
        "z",  # name beyond the grid dimension
        "sin(x)",  # disallowed function
        "x < 1",  # comparisons are not arithmetic
        "__import__('os')",
        "max(x)",  # needs two arguments
        "pow(x, 2, 3)",  # modular pow not supported
        "max(x, other=1)",  # keywords rejected
        "'abs'",  # non-numeric constant
        "1 / x",  # hits the node at x = 0
        "pow(x, 0.5)",  # nan on the negative half
        "x +",  # syntax error
    ],
)
def test_expression_rejections(expr):
    grid = build_grid(((-1.0, 1.0),), (9,))
    with pytest.raises(ConfigError):
        eval_boundary_expression(expr, grid)


# ---------------------------------------------------------------------------
# problem building


def test_build_problem_pins_faces_and_keeps_expression_values():
    fld, params, solver_cfg = build_problem(tiny_config())
    grid = fld.grid
    expected = 0.25 * np.clip(grid.axes[0], 0, None) ** 2
    np.testing.assert_allclose(fld.values, expected)
    np.testing.assert_array_equal(fld.boundary_mask, grid.boundary_face_mask)
    assert params.p == 2.0
    assert solver_cfg.max_iters == 400


def test_build_problem_error_paths():
    cfg = tiny_config()
    cfg["problem"]["p"] = 3.0  # alpha_p then has no default
    with pytest.raises(ConfigError, match="alpha_p"):
        build_problem(cfg)
    cfg2 = tiny_config()
    cfg2["solver"] = {"step_floor": 2.0}
    with pytest.raises(ConfigError, match="step_floor"):
        build_problem(cfg2)


# ---------------------------------------------------------------------------
# running


@pytest.fixture(scope="module")
def tiny_result():
    return run_experiment(tiny_config())


def test_run_report_structure(tiny_result):
    rep = tiny_result.report
    assert rep["solve"]["converged"] is True
    assert not tiny_result.stalled and rep["stalled"] is False
    assert rep["params"]["tau"] == 1.0
    assert rep["grid"]["resolution"] == [129]
    assert rep["solve"]["n_stages"] == 9
    assert len(rep["solve"]["stage_energies"]) == 9
    for key in ("growth", "density", "replacement", "scaling", "inequalities"):
        assert key in rep["diagnostics"]


def test_run_growth_section(tiny_result):
    growth = tiny_result.report["diagnostics"]["growth"]
    assert growth["radii"] == [0.125, 0.25, 0.5]
    assert growth["target_exponent"] == 2.0
    fit = growth["fits"]["sup_pos"]
    assert fit is not None
    assert fit["exponent"] == pytest.approx(2.0, abs=0.1)
    assert growth["nondegeneracy"]["positive"] > 0.0


def test_run_scaling_section(tiny_result):
    scaling = tiny_result.report["diagnostics"]["scaling"]
    assert scaling["rel_error"][0] <= 1e-3


def test_run_replacement_section(tiny_result):
    rep = tiny_result.report["diagnostics"]["replacement"]
    assert rep["distance"] >= 0.0
    assert rep["energy_gap"] >= -1e-12
    assert abs(rep["nonlinearity_gap"]) <= rep["nonlinearity_bound"]


def test_run_inequality_section(tiny_result):
    sweeps = tiny_result.report["diagnostics"]["inequalities"]
    assert len(sweeps) == 1
    assert sweeps[0]["name"] == "sum"
    assert sweeps[0]["min_margin"] >= -1e-12


def test_run_rows_are_csv_ready(tiny_result):
    assert tiny_result.rows, "diagnostics produced no rows"
    sections = set()
    for row in tiny_result.rows:
        assert tuple(row.keys()) == CSV_COLUMNS
        sections.add(row["section"])
        assert all(isinstance(v, str) for v in row.values())
        if row["value"]:
            float(row["value"])  # repr round-trip
    assert {"solve", "growth", "density", "replacement", "scaling"} <= sections


def test_run_is_deterministic(tiny_result):
    again = run_experiment(tiny_config())
    assert json.dumps(again.report, sort_keys=True) == json.dumps(
        tiny_result.report, sort_keys=True
    )
    assert again.rows == tiny_result.rows
    assert again.manifest == tiny_result.manifest


def test_run_marks_stall_and_still_reports():
    cfg = tiny_config()
    del cfg["diagnostics"]["scaling"]  # keep the partial-field pass fast
    cfg["solver"] = {"armijo_c1": 0.999, "step_floor": 0.5}
    out = run_experiment(cfg)
    assert out.stalled
    assert out.report["stalled"] is True
    assert out.report["solve"]["converged"] is False
    assert "growth" in out.report["diagnostics"]


def test_run_rejects_unsatisfiable_diagnostics():
    cfg = tiny_config()
    cfg["diagnostics"]["growth"]["radii"] = [0.001]  # below grid resolution
    with pytest.raises(ConfigError, match="not satisfiable"):
        run_experiment(cfg)


def test_run_auto_center_lands_on_interface():
    cfg = tiny_config()
    del cfg["diagnostics"]["growth"]["center"]
    out = run_experiment(cfg)
    center = out.report["diagnostics"]["growth"]["center"]
    # the detected anchor sits near the takeoff point x = 0
    assert len(center) == 1
    assert abs(center[0]) <= 0.1


# ---------------------------------------------------------------------------
# bundles


def test_write_bundle_files_and_determinism(tmp_path, tiny_result):
    one = tmp_path / "one"
    two = tmp_path / "two"
    write_bundle(tiny_result, one)
    write_bundle(run_experiment(tiny_config()), two)
    names = ["field.apf", "report.json", "diagnostics.csv", "manifest.json"]
    for name in names:
        assert (one / name).is_file()
        assert (one / name).read_bytes() == (two / name).read_bytes()
    report = json.loads((one / "report.json").read_text())
    assert report == tiny_result.report
    header = (one / "diagnostics.csv").read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)
    manifest = json.loads((one / "manifest.json").read_text())
    assert manifest["config_sha256"] == config_digest(tiny_config())
    assert manifest["seed"] == 0
    assert manifest["outputs"] == ["field.apf", "report.json", "diagnostics.csv"]
