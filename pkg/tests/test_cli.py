import json

import pytest

from harness.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, build_parser, main


def _write(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
    args = build_parser().parse_args(["selftest", "--full"])
    assert args.command == "selftest" and args.full


def test_check_curve_writes_report(tiny_config, tmp_path):
    report = tmp_path / "kt.txt"
    code = main(["check-curve", "--config", str(tiny_config), "--report", str(report)])
    assert code in (EXIT_OK, EXIT_FAILED)
    assert "encompassing: true" in report.read_text()


def test_single_circle_check_fails(tmp_path):
    path = _write(tmp_path, {"curve": {"kind": "planar-circle", "radius": 2.0}})
    assert main(["check-curve", "--config", path]) == EXIT_FAILED


@pytest.mark.parametrize("data", [
    {"unknown": 1},
    {"curve": {"kind": "three-circles", "radius": 1.5}},
    {"curve": {"kind": "spiral"}},
    {"family": "vector", "phantom": {"order": 2}},
])
def test_bad_configs_exit_with_config_code(tmp_path, data):
    assert main(["check-curve", "--config", _write(tmp_path, data)]) == EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_validate_missing_files(tmp_path):
    code = main(["validate", "--truth", str(tmp_path / "t.grid"), "--estimate", str(tmp_path / "e.grid"),
                 "--report", str(tmp_path / "r.txt")])
    assert code == EXIT_FAILED


def test_simulate_uses_config_output_dir(tiny_config):
    assert main(["simulate", "--config", str(tiny_config)]) == EXIT_OK
    assert (tiny_config.parent / "out" / "dataset.grid").exists()


def test_reconstruct_without_data_fails(tiny_config, tmp_path):
    code = main(["reconstruct", "--config", str(tiny_config), "--data", str(tmp_path / "nothing"),
                 "--out", str(tmp_path / "recon")])
    assert code == EXIT_FAILED


@pytest.mark.slow
def test_selftest_command(tmp_path, capsys):
    report = tmp_path / "selftest.txt"
    assert main(["selftest", "--report", str(report)]) == EXIT_OK
    assert "passed: true" in capsys.readouterr().out
    assert report.read_text().endswith("passed: true\n")


def test_unwritable_output_exits_failed(tiny_config, tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    code = main(["simulate", "--config", str(tiny_config), "--out", str(blocker / "out")])
    assert code == EXIT_FAILED
