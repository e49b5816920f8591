import csv
import json

import numpy as np

from ialign.channel import InterferenceChannel
from ialign.cli import main


def gen(tmp_path, *extra):
    path = tmp_path / "ch.json"
    assert main(["gen-channel", "--out", str(path), *extra]) == 0
    return path


def test_gen_channel(tmp_path, capsys):
    path = gen(tmp_path, "--K", "3", "--M", "2", "--N", "2,2,1", "--p", "2.0", "--seed", "4")
    data = json.loads(path.read_text())
    assert set(data) == {"K", "M", "N", "sigma2", "p", "H"}
    ch = InterferenceChannel.load(path)
    assert ch.K == 3 and list(ch.N) == [2, 2, 1] and ch.H[2][0].shape == (1, 2)
    assert main(["gen-channel", "--K", "3", "--M", "2", "--N", "2,2,1", "--p", "2.0", "--seed", "4"]) == 0
    assert InterferenceChannel.loads(capsys.readouterr().out).dumps() == ch.dumps()


def test_check_dof(tmp_path, capsys):
    path = gen(tmp_path, "--K", "3", "--seed", "1")
    assert main(["check-dof", "--channel", str(path), "--dof", "1,1,1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["verdict"] == "achievable" and "certificate" in out
    assert isinstance(out["clauses_emitted"], int) and isinstance(out["tags"], list)
    path = gen(tmp_path, "--K", "4", "--seed", "1")
    assert main(["check-dof", "--channel", str(path), "--dof", "1,1,1,1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["verdict"] == "infeasible" and "certificate" not in out


def test_reduce(tmp_path):
    g = tmp_path / "g.json"
    g.write_text(json.dumps({"n": 3, "edges": [[0, 1], [1, 2]]}))
    out = tmp_path / "mis.json"
    assert main(["reduce", "mis", "--graph", str(g), "--out", str(out)]) == 0
    ch = InterferenceChannel.load(out)
    assert ch.K == 3 and ch.H[0][2][0, 0] == 0 and ch.H[0][1][0, 0] == 1
    out = tmp_path / "col.json"
    assert main(["reduce", "3col", "--graph", str(g), "--out", str(out)]) == 0
    assert InterferenceChannel.load(out).K == 36


def test_optimize_all_algorithms(tmp_path, capsys):
    path = gen(tmp_path, "--K", "3", "--p", "10", "--seed", "2")
    for alg in ("sum-rate", "unselfish", "leakage"):
        trace = tmp_path / f"{alg}.csv"
        res = tmp_path / f"{alg}.json"
        assert main(["optimize", "--channel", str(path), "--alg", alg, "--dof", "1,1,1", "--alpha", "1,1,1",
                     "--relax", "1.0", "--tol", "1e-6", "--max-iter", "50", "--trace", str(trace),
                     "--out", str(res)]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["alg"] == alg and summary["sum_rate_bits"] > 0
        assert 1 <= summary["iterations"] <= 50
        with open(trace, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0])[:4] == ["iter", "psi1", "wsr_nats", "dq_fro"]
        assert "per_user_residuals" in rows[0]
        assert np.isfinite(float(rows[-1]["psi1"]))
        assert json.loads(res.read_text())["alg"] == alg


def test_sweep(tmp_path):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({"K": 2, "M": 2, "N": 2, "snr_db": [0, 10], "realizations": 2,
                               "algorithms": ["sum-rate", "leakage"], "seed": 3}))
    out = tmp_path / "res.csv"
    assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["alg", "snr_db", "mean_sumrate_bits", "stderr", "realizations", "seed"]
    assert len(rows) == 4


def test_errors_return_two(tmp_path, capsys):
    assert main(["check-dof", "--channel", str(tmp_path / "missing.json"), "--dof", "1"]) == 2
    assert "error:" in capsys.readouterr().err
    path = gen(tmp_path, "--K", "2")
    assert main(["check-dof", "--channel", str(path), "--dof", "1"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"K": 1}))
    assert main(["optimize", "--channel", str(bad)]) == 2
