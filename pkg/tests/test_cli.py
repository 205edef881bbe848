import csv
import json
import math
import time

import numpy as np
import pytest

from qpwalk import cli
from qpwalk.cocycle import SingularSamplingError
from qpwalk.model import GOLDEN
from qpwalk.output import matrix_from_json, matrix_to_json, read_config, write_csv, write_json


def run(tmp_path, *args):
    return cli.main(list(args) + ["--out", str(tmp_path)])


def test_verify_quick(tmp_path, capsys):
    t0 = time.perf_counter()
    assert run(tmp_path, "verify", "--quick") == 0
    assert time.perf_counter() - t0 < 60
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines and all(l.startswith("PASS") for l in lines)
    rows = list(csv.reader((tmp_path / "verify.csv").open()))
    assert rows[0] == ["check", "observed", "tolerance", "passed"]
    assert len(rows) == len(lines) + 1


def test_lyapunov_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(d, "lyapunov", "--lambda1", "0.3", "--lambda2", "0.7", "--t", "0",
                   "--steps", "5000", "--phases", "3", "--z-arg", "0.5", "--seed", "4") == 0
    assert (a / "lyapunov.json").read_bytes() == (b / "lyapunov.json").read_bytes()
    d = json.loads((a / "lyapunov.json").read_text())
    assert d["closed_form_LE"] == pytest.approx(math.log(0.7 * math.sqrt(0.91) / (0.3 * math.sqrt(0.51))))


def test_manifest_fields(tmp_path):
    assert run(tmp_path, "spectrum", "--window", "32", "--seed", "9") == 0
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["command"] == "spectrum"
    assert m["seed"] == 9
    assert m["parameters"]["window"] == 32
    assert m["parameters"]["phi"] == pytest.approx(GOLDEN)
    assert any(o.endswith("spectrum.csv") for o in m["outputs"])
    assert m["tool_version"] and m["wall_time_s"] >= 0
    rows = list(csv.reader((tmp_path / "spectrum.csv").open()))
    assert rows[0] == ["re", "im", "arg"] and len(rows) == 33


def test_config_then_flags(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sample\nlambda1 = 0.3\nlambda2=0.6  # trailing\nz-arg = 0.25\nwindow=16\n")
    out = tmp_path / "o"
    assert cli.main(["spectrum", "--config", str(cfg), "--lambda1", "0.4", "--out", str(out)]) == 0
    p = json.loads((out / "manifest.json").read_text())["parameters"]
    assert p["lambda1"] == 0.4 and p["lambda2"] == 0.6 and p["z_arg"] == 0.25 and p["window"] == 16


def test_exit_codes(tmp_path, monkeypatch, capsys):
    assert run(tmp_path, "spectrum", "--lambda1", "1.5") == cli.EXIT_VALIDATION
    assert run(tmp_path, "lyapunov", "--steps", "10", "--z-arg", "0.1") == cli.EXIT_VALIDATION

    def boom(cfg, out):
        raise SingularSamplingError("f vanished")

    monkeypatch.setitem(cli.COMMANDS, "spectrum", boom)
    assert run(tmp_path, "spectrum") == cli.EXIT_NUMERIC
    monkeypatch.setitem(cli.COMMANDS, "spectrum", lambda cfg, out: ([], cli.EXIT_INVARIANT))
    assert run(tmp_path, "spectrum") == cli.EXIT_INVARIANT


def test_green_and_evolve_outputs(tmp_path):
    assert run(tmp_path, "green", "--window", "8", "--z-arg", "0.4") == 0
    G = matrix_from_json(json.loads((tmp_path / "green.json").read_text())["G"])
    assert G.shape == (8, 8)
    assert run(tmp_path, "evolve", "--T", "128") == 0
    d = json.loads((tmp_path / "transport.json").read_text())
    assert d["norm_drift"] < 1e-10


def test_phase_diagram_small_grid():
    rows = cli.phase_diagram(0.5, grid=3, quick=True, steps=5000)
    assert len(rows) == 9
    assert {r[7] for r in rows} <= {"subcritical", "supercritical", "critical", "inconclusive",
                                    "uniformly_hyperbolic_suspect"}
    # grid values are 0.05, 0.5, 0.95: the diagonal is sampled
    assert sorted({r[0] for r in rows}) == [0.05, 0.5, 0.95]


def test_distance_to_boundary():
    thr = 0.6
    assert cli.distance_to_boundary(0.3, 0.3, thr) == 0.0
    assert cli.distance_to_boundary(0.6, 0.9, thr) == 0.0
    assert cli.distance_to_boundary(0.1, 0.3, thr) == pytest.approx(0.2 / math.sqrt(2))
    # nearest is the corner line lambda2 = thr (lambda1 >= thr) at distance 0.4
    assert cli.distance_to_boundary(0.9, 0.2, thr) == pytest.approx(0.4)


def test_parse_phi():
    assert cli.parse_phi("golden") == GOLDEN
    assert cli.parse_phi("0.25") == 0.25


def test_matrix_json_round_trip(tmp_path):
    M = np.arange(6).reshape(2, 3) + 1j * np.arange(6, 12).reshape(2, 3)
    d = matrix_to_json(M)
    assert d["re"][:2] == [0.0, 3.0]  # column-major
    write_json(tmp_path / "m.json", d)
    back = matrix_from_json(json.loads((tmp_path / "m.json").read_text()))
    assert np.array_equal(back, M)


def test_writers_are_plain(tmp_path):
    write_json(tmp_path / "c.json", {"z": 1 + 2j, "a": np.arange(2), "f": np.float64(0.5)})
    assert json.loads((tmp_path / "c.json").read_text()) == {"a": [0, 1], "f": 0.5, "z": {"im": 2.0, "re": 1.0}}
    write_csv(tmp_path / "c.csv", ["x"], [(0.1,), (np.float64(1 / 3),)])
    assert (tmp_path / "c.csv").read_text() == "x\n0.1\n0.3333333333333333\n"
    (tmp_path / "bad.cfg").write_text("novalue\n")
    with pytest.raises(ValueError):
        read_config(tmp_path / "bad.cfg")
