import json

import pytest

from tvdimex.cli import build_parser, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_certify_builtin(capsys):
    code, out, _ = run(capsys, "certify", "--tableau", "TVD3_4")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "feasible=true"
    assert float(lines[1].split("=")[1]) == pytest.approx(0.5471, abs=1e-4)


def test_certify_above_lambda_max(capsys, tmp_path):
    code, out, _ = run(capsys, "certify", "--tableau", "TVD3", "--lam", "0.9",
                       "--out", str(tmp_path / "c.json"))
    assert code == 0 and out.startswith("feasible=false")
    data = json.loads((tmp_path / "c.json").read_text())
    assert data["lambda_max"] == pytest.approx(32 / 37, rel=1e-7)
    assert (tmp_path / "c.json.timing.json").exists()


def test_export_then_certify(capsys, tmp_path):
    path = tmp_path / "tvd3_4.json"
    assert main(["export", "TVD3_4", "--out", str(path)]) == 0
    data = json.loads(path.read_text())
    assert len(data["theta"]) == 5 and "A_ex" in data["tableau"]
    code, out, _ = run(capsys, "certify", "--tableau", str(path))
    assert out.splitlines()[0] == "feasible=true"


def test_error_lines_csv(capsys):
    code, out, _ = run(capsys, "error-lines", "--schemes", "TVD3", "--dx0", "0.2",
                       "--levels", "2", "--eps", "1")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "N,scheme,L1,L1o" and len(lines) == 3
    assert lines[1].split(",")[1] == "TVD3"


def test_outputs_are_byte_identical(tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"a{k}.csv"
        assert main(["advect", "--scheme", "MOOD3_4", "--dx", "0.2", "--eps", "0.1",
                     "--out", str(path), "--summary", str(tmp_path / f"s{k}.json")]) == 0
        outs.append((path.read_bytes(), (tmp_path / f"s{k}.json").read_bytes()))
    assert outs[0] == outs[1]
    summary = json.loads(outs[0][1])
    assert summary["scheme"] == "MOOD3_4" and summary["t"] == pytest.approx(1.0)


@pytest.mark.parametrize("fmt", ["toml", "json"])
def test_config_file_sets_defaults(tmp_path, capsys, fmt):
    cfg = tmp_path / f"cfg.{fmt}"
    if fmt == "toml":
        cfg.write_text('[error-lines]\nschemes = "IMEX1"\ndx0 = 0.2\nlevels = 1\n')
    else:
        cfg.write_text(json.dumps({"error-lines": {"schemes": "IMEX1", "dx0": 0.2,
                                                   "levels": 1}}))
    code, out, _ = run(capsys, "--config", str(cfg), "error-lines")
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 2 and lines[1].split(",")[1] == "IMEX1"


def test_errors_return_two(capsys, tmp_path):
    code, _, err = run(capsys, "certify", "--tableau", str(tmp_path / "missing.json"))
    assert code == 2 and err.startswith("error:")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"tableau": {"A_ex": [[0]], "A_im": [[1]], "b_ex": [1],
                                           "b_im": [1]}}))
    code, _, err = run(capsys, "certify", "--tableau", str(bad))
    assert code == 2


def test_parser_lists_presets():
    sub = build_parser()._subparsers._group_actions[0].choices
    for name in ("advect", "euler", "certify", "optimize", "error-lines", "spacetime-table",
                 "flexibility-table", "vortex", "double-shear", "explosion", "acoustic-rp"):
        assert name in sub


def test_euler_binary_snapshot(tmp_path):
    from tvdimex.euler2d import read_binary
    path = tmp_path / "e.bin"
    assert main(["euler", "--case", "explosion", "--N", "16", "--steps", "2",
                 "--binary", str(path), "--out", str(tmp_path / "e.csv"),
                 "--summary", str(tmp_path / "e.json")]) == 0
    head, U = read_binary(path)
    assert head["case"] == "explosion" and U.shape == (3, 16, 16)
