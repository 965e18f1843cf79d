import subprocess
import sys

import numpy as np
import pytest

from algebroids.cli import main
from algebroids.specfile import fixture_path


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def fx(name):
    return str(fixture_path(name))


@pytest.mark.parametrize("name,code", [
    ("so3.json", 0), ("tangent2.json", 0), ("tangent-atlas.json", 0),
    ("straight.json", 0), ("separable.json", 0), ("transform.json", 0),
    ("so3-rotation.json", 0), ("so3-broken.json", 1), ("so3-scale.json", 1),
])
def test_verify_exit_codes(name, code, capsys):
    got, out, _ = run(["verify", fx(name)], capsys)
    assert got == code
    assert out.splitlines()[-1].startswith("SUMMARY")
    assert all(line.startswith("CHECK ") for line in out.splitlines()[:-1])


def test_broken_fixture_fails_where_expected(capsys):
    _, out, _ = run(["verify", fx("so3-broken.json")], capsys)
    failed = {line.split()[1] for line in out.splitlines() if line.endswith("FAIL") and line.startswith("CHECK")}
    assert "jacobi[U]" in failed
    assert any(name.startswith("d_squared[") for name in failed)
    assert not any(name.startswith("bracket_antisymmetry") for name in failed)


def test_tangent_includes_anchor_hom(capsys):
    _, out, _ = run(["verify", fx("tangent2.json")], capsys)
    assert "CHECK anchor_hom[U]" in out


def test_load_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"base_dim": 1}')
    assert run(["verify", str(bad)], capsys)[0] == 2
    assert run(["verify", str(tmp_path / "missing.json")], capsys)[0] == 2


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["verify"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["verify", fx("so3.json"), "--samples", "0"])
    assert info.value.code == 2


def test_tol_scale_can_flip_the_verdict(capsys):
    assert run(["verify", fx("so3-broken.json"), "--tol-scale", "1e9"], capsys)[0] == 0


def test_reports_are_byte_identical():
    cmd = [sys.executable, "-m", "algebroids", "verify", fx("tangent-atlas.json"), "--seed", "7"]
    first = subprocess.run(cmd, capture_output=True, check=False)
    second = subprocess.run(cmd, capture_output=True, check=False)
    assert first.returncode == 0
    assert first.stdout == second.stdout and first.stdout


def test_seed_changes_samples(capsys):
    _, a, _ = run(["verify", fx("tangent2.json"), "--seed", "1"], capsys)
    _, b, _ = run(["verify", fx("tangent2.json"), "--seed", "2"], capsys)
    assert a != b


def test_morphism_command(capsys):
    assert run(["morphism", fx("so3-rotation.json")], capsys)[0] == 0
    code, out, _ = run(["morphism", fx("so3-scale.json")], capsys)
    assert code == 1 and "FAIL" in out
    code, _, err = run(["morphism", fx("so3.json")], capsys)
    assert code == 2 and "no morphism" in err


def _report(text):
    return dict(line.split(" ", 1) for line in text.splitlines())


def test_integrate_straight(tmp_path, capsys):
    out_csv = tmp_path / "line.csv"
    code, out, _ = run(["integrate", fx("straight.json"), "--start", "0,1", "--steps", "100",
                        "--out", str(out_csv)], capsys)
    assert code == 0
    data = np.loadtxt(out_csv, delimiter=",", skiprows=1)
    assert abs(data[-1, 1] - 1.0) < 1e-9
    lines = out.splitlines()
    assert float(lines[1].split("max_defect=")[1]) < 1e-5


def test_integrate_separable_to_stdout(capsys):
    code, out, err = run(["integrate", fx("separable.json"), "--start", "0,1", "--steps", "1000"], capsys)
    assert code == 0
    rows = out.splitlines()
    assert rows[0] == "t,x1,u1" and len(rows) == 1002
    t, x, w = map(float, rows[-1].split(","))
    assert abs(x - np.log(2)) < 1e-7 and abs(w - 0.5) < 1e-7
    assert "CONVERGENCE" in err
    ratio = float(err.split("ratio=")[1].split()[0])
    assert 3.5 <= ratio <= 4.5


def test_integrate_is_deterministic(tmp_path, capsys):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        run(["integrate", fx("separable.json"), "--start", "0.1,0.7", "--steps", "50", "--out", str(p)], capsys)
    assert paths[0].read_bytes() == paths[1].read_bytes()


@pytest.mark.parametrize("argv", [
    ["integrate", "separable.json", "--start", "0,1,2"],
    ["integrate", "separable.json", "--start", "50,1"],
    ["integrate", "separable.json", "--start", "0,1", "--t1", "-1"],
    ["integrate", "so3.json", "--start", "1,0,0"],
    ["integrate", "separable.json", "--start", "0,1", "--chart", "V"],
])
def test_integrate_usage_errors(argv, capsys):
    assert run(argv, capsys)[0] == 2


def test_bad_start_vector(capsys):
    with pytest.raises(SystemExit) as info:
        main(["integrate", "separable.json", "--start", "a,b"])
    assert info.value.code == 2
