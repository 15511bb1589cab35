import hashlib
import json

import pytest

from qarrival.cli import main, parse_config, run_scenario
from qarrival.errors import ParseError, ValidationError

MINIMAL = """
[analyses.arrival]
tau = 2.0
"""

SMALL_SCENARIO = """
output_dir = "ignored"

[packet]
q0 = 6.0
p0 = -2.0
sigma = 1.0

[potential]
v0 = 0.4

[grid]
x_min = -40.0
x_max = 40.0
n_points = 2048

[evolution]
dt = 0.005

[analyses.arrival]
tau = 8.0

[analyses.histories]
tau = 8.0
n_intervals = 2
mode = "simplified"

[analyses.backflow]
t_min = 1.0
t_max = 6.0
windows = 3
"""


def test_parse_minimal_applies_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.packet["q0"] == 10.0
    assert cfg.potential["v0"] == 0.2
    assert cfg.grid["n_points"] == 4096
    assert list(cfg.analyses) == ["arrival"]


def test_parse_rejects_empty_analyses():
    with pytest.raises(ValidationError) as err:
        parse_config("[packet]\nq0 = 5.0\n")
    assert any("at least one analysis" in v for v in err.value.violations)


def test_parse_rejects_unnormalized_weights():
    text = """
[[packet.components]]
weight = 0.6
q0 = 5.0
p0 = -2.0
sigma = 1.0

[[packet.components]]
weight = 0.6
q0 = 15.0
p0 = -2.0
sigma = 1.0

[analyses.arrival]
tau = 2.0
"""
    with pytest.raises(ValidationError) as err:
        parse_config(text)
    assert any("sum to 1.2" in v for v in err.value.violations)


def test_parse_collects_multiple_violations():
    text = """
[packet]
q0 = -4.0
p0 = 2.0
sigma = 1.0

[grid]
x_min = 1.0
x_max = 5.0
n_points = 64
"""
    with pytest.raises(ValidationError) as err:
        parse_config(text)
    assert len(err.value.violations) >= 2


def test_parse_error_on_bad_toml():
    with pytest.raises(ParseError):
        parse_config("analyses = [unclosed")


def test_parse_unknown_analysis():
    with pytest.raises(ValidationError) as err:
        parse_config("[analyses.frobnicate]\nx = 1\n")
    assert any("unknown analysis" in v for v in err.value.violations)


@pytest.fixture(scope="module")
def scenario_outputs(tmp_path_factory):
    out = tmp_path_factory.mktemp("scenario")
    cfg = parse_config(SMALL_SCENARIO)
    report = run_scenario(cfg, out_dir=out)
    return out, report


def test_run_emits_expected_files(scenario_outputs):
    out, report = scenario_outputs
    for name in ("N.csv", "Pi.csv", "J.csv", "RconvJ.csv",
                 "decoherence_matrix.json", "backflow.json", "report.json"):
        assert (out / name).exists()
    assert report.analyses["arrival"]["error"] is None
    assert all(a["passed"] for a in report.analyses["arrival"]["assertions"])


def test_manifest_hashes_match(scenario_outputs):
    out, report = scenario_outputs
    for fname, digest in report.manifest.items():
        assert hashlib.sha256((out / fname).read_bytes()).hexdigest() == digest
    data = json.loads((out / "report.json").read_text())
    assert data["manifest"] == report.manifest


def test_decoherence_json_is_well_formed(scenario_outputs):
    out, _ = scenario_outputs
    payload = json.loads((out / "decoherence_matrix.json").read_text())
    n = len(payload["labels"])
    assert len(payload["entries_row_major"]) == n * n
    assert all(len(entry) == 2 for entry in payload["entries_row_major"])
    assert payload["max_offdiag_measure"] >= 0.0


def test_runs_are_byte_identical(tmp_path):
    cfg = parse_config(SMALL_SCENARIO)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    run_scenario(cfg, out_dir=out1)
    run_scenario(cfg, out_dir=out2, threads=3)
    files1 = sorted(p.name for p in out1.iterdir())
    files2 = sorted(p.name for p in out2.iterdir())
    assert files1 == files2
    for name in files1:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_failed_analysis_is_isolated(tmp_path):
    text = """
[grid]
x_min = -20.0
x_max = 20.0
n_points = 1024

[analyses.arrival]
tau = 2.0

[analyses.scattering]
tau = 40.0
"""
    cfg = parse_config(text)
    report = run_scenario(cfg, out_dir=tmp_path)
    assert report.analyses["scattering"]["error"] is not None  # spills/regime
    assert report.analyses["arrival"]["error"] is None
    assert not report.all_passed


def test_cli_run_exit_codes(tmp_path):
    cfg_path = tmp_path / "s.toml"
    cfg_path.write_text(SMALL_SCENARIO)
    assert main(["run", str(cfg_path), "--out", str(tmp_path / "o")]) == 0
    bad = tmp_path / "bad.toml"
    bad.write_text("not toml [")
    assert main(["run", str(bad)]) == 2


def test_cli_selftest_single_criterion(capsys):
    code = main(["selftest", "--criteria", "3"])
    out = capsys.readouterr().out
    assert "criterion  3" in out
    assert code == 0
