import csv
import io
import json
import math

import pytest

from fluxon import cli


def run(argv, capsys):
    code = cli.run(argv)
    out, err = capsys.readouterr()
    return code, out, err


def parse_csv(text):
    lines = text.splitlines()
    assert lines[0].startswith("#schema=1")
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def test_eval_on_sphere_axis(capsys):
    code, out, _ = run(["eval", "--surface", "sphere:a=1", "--point", "0,0,-0.5"], capsys)
    assert code == 0
    (row,) = parse_csv(out)
    assert float(row["psi1r"]) == 0.0
    assert row["psi1r"] == "0"
    assert float(row["psi0"]) == pytest.approx(1 / math.pi, rel=1e-15)
    assert float(row["k_x"]) == float(row["k_y"]) == 1.0


def test_eval_plane_golden(capsys):
    code, out, _ = run(["eval", "--surface", "plane", "--point", "0,0,-2"], capsys)
    assert code == 0
    assert out == (
        "#schema=1 command=eval\n"
        "x,y,z,r,theta,phi,k_x,k_y,d,psi0,psi1s,psi1r,total\n"
        "0,0,-2,2,3.1415926535897931,0,0,0,1,0.079577471545947673,0,0,0.079577471545947673\n"
    )
    assert float(parse_csv(out)[0]["total"]) == 1 / (4 * math.pi)


def test_eval_json_and_multiple_points(capsys):
    code, out, _ = run(["eval", "--surface", "paraboloid:k_x=1,k_y=-0.5", "--point", "0.1,0,-1",
                        "--point", "0,0.2,-0.3", "--format", "json", "--d", "2"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == 1 and len(doc["rows"]) == 2
    assert doc["config"]["d"] == 2.0


def test_si_units(capsys):
    code, out, _ = run(["eval", "--surface", "plane", "--units", "si", "--point", "0,0,-1"], capsys)
    assert code == 0
    assert float(parse_csv(out)[0]["psi0"]) == pytest.approx(2.067833848e-15 / (2 * math.pi), rel=1e-9)


def test_field(capsys):
    code, out, _ = run(["field", "--surface", "sphere:a=2", "--point", "0.1,0.2,-0.3"], capsys)
    assert code == 0
    row = parse_csv(out)[0]
    B = [float(row[k]) for k in ("B_x", "B_y", "B_z")]
    assert math.hypot(*B) == pytest.approx(math.hypot(*[float(row[k]) for k in ("B_r", "B_theta", "B_phi")]))


def test_check_hankel_passes(capsys):
    code, out, _ = run(["check", "hankel"], capsys)
    assert code == 0
    assert parse_csv(out)[0]["passed"] == "true"


def test_check_all_json(capsys, monkeypatch):
    monkeypatch.setenv("FLUXON_THREADS", "3")
    code, out, _ = run(["check", "--format", "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["passed"] and [r["name"] for r in doc["reports"]] == list(cli.checks.SUITES)


def test_failed_check_exit_code(capsys, monkeypatch):
    def failing():
        return cli.checks.CheckReport("hankel", False, 1.0, 1e-8, worst_point=[1.0, 0.0, -1.0])
    monkeypatch.setattr(cli.checks, "run_hankel", failing)
    code, _, err = run(["check", "hankel"], capsys)
    assert code == 1
    assert "worst point [1.0, 0.0, -1.0]" in err


def test_sphere_compare(capsys):
    code, out, err = run(["sphere-compare", "--theta", "2.5", "--n", "5"], capsys)
    assert code == 0
    rows = parse_csv(out)
    assert len(rows) == 5
    assert abs(float(rows[0]["remainder"])) < 1e-6
    assert "cauchy slope" in err


def test_smear_origin_is_finite(capsys):
    code, out, _ = run(["smear", "--surface", "plane", "--w", "0.1", "--point", "0,0,0"], capsys)
    assert code == 0
    row = parse_csv(out)[0]
    assert float(row["smeared"]) == pytest.approx(math.sqrt(math.pi / 2) / (2 * math.pi * 0.1), rel=1e-10)
    assert row["point"] == "nan"


def test_output_file_and_determinism(tmp_path, capsys):
    argv = ["eval", "--surface", "biquadratic:k_x=0.5,k_y=0.1,c30=0.2", "--point", "0.1,0.1,-0.1"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.run(argv + ["--output", str(a)]) == 0
    assert cli.run(argv + ["--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert capsys.readouterr().out == ""


@pytest.mark.parametrize("argv", [
    ["eval", "--point", "0,0,-1", "--units", "si", "--phi0", "2"],
    ["eval", "--point", "0,0"],
    ["eval"],
    ["eval", "--point", "0,0,0"],
    ["eval", "--point", "0,0,-1", "--nu", "2"],
    ["eval", "--point", "0,0,-1", "--d", "0"],
    ["eval", "--point", "0,0,-1", "--surface", "torus"],
    ["eval", "--point", "nan,0,-1"],
    ["check", "bogus"],
    ["sphere-compare", "--theta", "1.0"],
    ["sphere-compare", "--r-min", "0.1", "--r-max", "0.01"],
    ["smear", "--point", "0,0,0", "--w", "-1"],
    ["frobnicate"],
])
def test_usage_errors(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2
    assert err


@pytest.mark.parametrize("value", ["0", "x", "-2"])
def test_bad_thread_count(value, capsys, monkeypatch):
    monkeypatch.setenv("FLUXON_THREADS", value)
    code, _, err = run(["check", "hankel"], capsys)
    assert code == 2 and "FLUXON_THREADS" in err


def test_config_roundtrip():
    cfg = cli.RunConfig(command="eval", points=[[0.0, 0.0, -1.0]], d=2.0, surface="plane")
    again = cli.RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    again.validate()
    with pytest.raises(cli.UsageError):
        cli.RunConfig.from_dict({"command": "eval", "colour": "red"})


def test_runtime_error_exit_code(capsys):
    # the singular expansion is undefined on the positive axis
    code, _, err = run(["eval", "--surface", "plane", "--point", "0,0,1"], capsys)
    assert code == 1 and "OnSingularAxis" in err
