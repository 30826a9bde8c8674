import json
import math

import pytest

from spectruss import load_truss
from spectruss.cli import main


@pytest.fixture
def bridge_file(tmp_path):
    from spectruss import builtin_structure, truss_to_json

    path = tmp_path / "bridge.json"
    path.write_text(truss_to_json(builtin_structure("bridge")))
    return str(path)


@pytest.fixture
def square_file(tmp_path):
    from spectruss import builtin_structure, truss_to_json

    path = tmp_path / "square.json"
    path.write_text(truss_to_json(builtin_structure("square")))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_example_round_trip(capsys):
    code, out, _ = run(capsys, "example", "square")
    assert code == 0
    truss = load_truss(out)
    assert len(truss.rods) == 5


def test_example_unknown_name(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["example", "pyramid"])
    assert exc.value.code == 2  # argparse rejects the choice


def test_freqs_bridge_csv(capsys, bridge_file):
    code, out, _ = run(capsys, "freqs", bridge_file, "--method", "laplacian",
                       "--omega-max", "3.2")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "index,omega,kind"
    rows = [line.split(",") for line in lines[1:]]
    assert len(rows) == 6
    kinds = [r[2] for r in rows]
    assert kinds.count("resonant") == 1
    assert float(rows[-1][1]) == pytest.approx(math.pi, abs=1e-9)


def test_freqs_json_format(capsys, bridge_file):
    code, out, _ = run(capsys, "freqs", bridge_file, "--format", "json",
                       "--omega-max", "3.2")
    assert code == 0
    doc = json.loads(out)
    assert len(doc) == 6
    assert {"omega", "kind"} <= set(doc[0])


def test_freqs_fem_count(capsys, square_file):
    code, out, _ = run(capsys, "freqs", square_file, "--method", "fem-consistent",
                       "--divisions", "8", "--count", "5", "--omega-max", "4.8")
    assert code == 0
    assert len(out.strip().splitlines()) == 6  # header + 5 rows


def test_freqs_reverberation_method(capsys, bridge_file):
    code, out, _ = run(capsys, "freqs", bridge_file, "--method", "reverberation",
                       "--omega-max", "3.2")
    assert code == 0
    rows = out.strip().splitlines()[1:]
    assert len(rows) == 6
    assert float(rows[-1].split(",")[1]) == pytest.approx(math.pi, abs=1e-8)


def test_threads_env_fallback(monkeypatch):
    from spectruss.cli import _default_threads

    monkeypatch.setenv("TRUSS_THREADS", "3")
    assert _default_threads() == 3
    monkeypatch.setenv("TRUSS_THREADS", "junk")
    assert _default_threads() >= 1


def test_freqs_missing_file(capsys):
    code, out, err = run(capsys, "freqs", "/no/such/file.json")
    assert code == 2
    assert out == ""
    assert "error" in err


def test_modes_resonant_flag(capsys, square_file):
    code, out, _ = run(capsys, "modes", square_file, "--omega", str(math.pi))
    assert code == 0
    doc = json.loads(out)
    assert doc and all(m["kind"] == "resonant" for m in doc)
    assert all(m["resonant_order"] == 1 for m in doc)


def test_modes_bridge_minus_third(capsys, bridge_file):
    omega = math.acos(-1.0 / 3.0)
    code, out, _ = run(capsys, "modes", bridge_file, "--omega", repr(omega))
    assert code == 0
    doc = json.loads(out)
    u3 = doc[0]["displacements"]["3"]
    assert abs(u3[1]) < 1e-8
    assert set(doc[0]["anchor_forces"]) == {"1", "5"}


def test_modes_between_roots(capsys, bridge_file):
    code, _, err = run(capsys, "modes", bridge_file, "--omega", "1.5")
    assert code == 3
    assert "nearest root" in err


def test_compare_row_count(capsys, square_file):
    code, out, _ = run(capsys, "compare", square_file, "--divisions", "1,2,4,8",
                       "--count", "5")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "method,divisions,index,omega,rel_error_vs_laplacian"
    assert len(lines) - 1 >= 5 * (2 * 4 + 1)
    lap_rows = [l for l in lines[1:] if l.startswith("laplacian")]
    by_div = {}
    for row in lap_rows:
        _, d, i, w, err = row.split(",")
        by_div.setdefault(d, []).append(w)
        assert err == "0"
    values = list(by_div.values())
    assert all(v == values[0] for v in values)  # replicated straight lines


def test_freqs_square_golden(capsys, square_file):
    # the unit square's spectrum is evenly spaced at multiples of pi/(2+sqrt 2)
    code, out, _ = run(capsys, "freqs", square_file)
    assert code == 0
    rows = [line.split(",") for line in out.strip().splitlines()[1:]]
    step = math.pi / (2.0 + math.sqrt(2.0))
    expected = [step, 2 * step, 3 * step, math.pi, 4 * step]
    assert [float(r[1]) for r in rows] == pytest.approx(expected, abs=1e-8)
    assert [r[2] for r in rows] == ["regular"] * 3 + ["resonant", "regular"]


def test_compare_bridge(capsys, bridge_file):
    code, out, _ = run(capsys, "compare", bridge_file, "--divisions", "1,2",
                       "--count", "6")
    assert code == 0
    lines = out.strip().splitlines()[1:]
    fem_rows = [l for l in lines if l.startswith("fem-")]
    assert fem_rows
    # every error entry is a sane nonnegative relative deviation
    assert all(0.0 <= float(l.split(",")[4]) < 1.0 for l in fem_rows)


def test_bench_csv(capsys, square_file):
    code, out, _ = run(capsys, "bench", square_file, "--divisions", "1,2",
                       "--grid-points", "400")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "divisions,laplacian_s,reverberation_s,fem_consistent_s,fem_lumped_s"
    assert len(lines) == 3
    for line in lines[1:]:
        cells = line.split(",")
        assert all(float(c) > 0.0 for c in cells[1:])


def test_simulate_events_and_snapshots(capsys, square_file, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, out, err = run(
        capsys, "simulate", square_file, "--impulse", "12:1:-1.0", "--t-max", "2.5",
        "--snapshot", "0.5", "--bins", "10",
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "time,joint,rod_in,rod_out,amplitude"
    first = lines[1].split(",")
    assert first[1] == "2" and float(first[0]) == pytest.approx(1.0)
    snap = (tmp_path / "snapshot_0.5.csv").read_text().strip().splitlines()
    assert snap[0] == "rod,z_over_L,stress"
    assert len(snap) == 1 + 10 * 5


def test_simulate_zero_horizon(capsys, square_file):
    code, out, _ = run(capsys, "simulate", square_file, "--impulse", "12:1:-1.0",
                       "--t-max", "0")
    assert code == 0
    assert out.strip() == "time,joint,rod_in,rod_out,amplitude"


def test_simulate_explosion_exit(capsys, square_file, tmp_path):
    h = 1.6180339887498949
    joints = [
        {"id": "1", "position": [0.0, 0.0]},
        {"id": "2", "position": [1.0, 0.0]},
        {"id": "3", "position": [0.0, h]},
        {"id": "4", "position": [1.0, h]},
    ]
    doc = {
        "dimension": 2,
        "materials": {"m": {"youngs_modulus": 1.0, "density": 1.0}},
        "joints": joints,
        "rods": [
            {"joints": ["1", "2"], "area": 1.0, "material": "m"},
            {"joints": ["1", "3"], "area": 1.0, "material": "m"},
            {"joints": ["2", "4"], "area": 1.0, "material": "m"},
            {"joints": ["3", "4"], "area": 1.0, "material": "m"},
            {"joints": ["2", "3"], "area": 1.0, "material": "m"},
        ],
    }
    path = tmp_path / "rect.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(capsys, "simulate", str(path), "--impulse", "12:1:-1.0",
                       "--t-max", "80", "--front-cap", "200")
    assert code == 3
    assert "min_amplitude" in err


def test_simulate_bad_impulse(capsys, square_file):
    code, _, err = run(capsys, "simulate", square_file, "--impulse", "99:1:-1.0")
    assert code == 2
    assert "99" in err


def test_verify_builtins(capsys):
    for name in ("square", "bridge"):
        code, out, _ = run(capsys, "verify", "--builtin", name)
        assert code == 0
        assert "FAIL" not in out


def test_verify_user_truss_generic_only(capsys, bridge_file):
    code, out, _ = run(capsys, "verify", bridge_file)
    assert code == 0
    assert "Taylor" in out
    assert "reference table" not in out
