import json

import numpy as np
import pytest

from eqsynth import io
from eqsynth.errors import ParameterError
from eqsynth.preprocess import preprocess
from eqsynth.problems import ConvexityProfile, OracleObjective, Problem, make_problem
from eqsynth.solvers import run


def test_fmt_roundtrips_exactly(rng):
    for x in np.concatenate([rng.standard_normal(200) * 10.0 ** rng.integers(-300, 300, 200),
                             [0.0, 1.0, -2.0, 1e-320]]):
        s = io.fmt(x)
        assert float(s) == x
    assert io.fmt(3.0) == "3.0"
    with pytest.raises(ParameterError):
        io.fmt(np.nan)


def test_dumps_is_valid_json():
    obj = {"a": [1.5, 2], "b": {"c": True, "d": None}, "e": np.array([[1.0, 2.0]]),
           "f": float("inf"), "g": []}
    back = json.loads(io.dumps(obj))
    assert back == {"a": [1.5, 2], "b": {"c": True, "d": None}, "e": [[1.0, 2.0]], "f": None, "g": []}


def test_problem_roundtrip(tmp_path):
    p = make_problem(7, 0.5, 30.0, 4, 0.2, 1.0, seed=3, d=5)
    path = tmp_path / "p.json"
    io.save_problem(path, p)
    q = io.load_problem(path)
    assert np.array_equal(q.objective.Q, p.objective.Q)
    assert np.array_equal(q.E, p.E) and np.array_equal(q.q, p.q)
    assert q.profile == p.profile and q.meta["seed"] == 3
    d = json.loads(path.read_text())
    assert set(d) == {"n", "d", "quadratic", "constraint", "meta"}
    assert {"m", "L", "seed", "generator"} <= set(d["meta"])
    io.save_problem(tmp_path / "p2.json", q)
    assert (tmp_path / "p2.json").read_bytes() == path.read_bytes()


def test_problem_errors(tmp_path):
    obj = OracleObjective(lambda x: x, 2, ConvexityProfile(1.0, 1.0))
    with pytest.raises(ParameterError):
        io.problem_to_dict(Problem(obj, np.eye(2), np.zeros(2)))
    with pytest.raises(ParameterError):
        io.problem_from_dict({"n": 2, "d": 1, "quadratic": {}, "constraint": {}, "meta": {}})
    d = io.problem_to_dict(make_problem(4, 1.0, 2.0, 2, 0.5, 1.0))
    d["d"] = 3
    with pytest.raises(ParameterError):
        io.problem_from_dict(json.loads(io.dumps(d)))


def test_preprocessed_schema():
    p = make_problem(6, 1.0, 10.0, 3, 0.4, 2.0, seed=1)
    d = json.loads(io.dumps(io.preprocessed_to_dict(preprocess(p))))
    pre = d["preprocess"]
    assert {"x_bar", "scale", "mode", "rank", "sigma_min", "sigma_max"} <= set(pre)
    assert pre["rank"] == 3 and abs(pre["scale"] - 2.0) <= 1e-13 and pre["sigma_max"] == 1.0


def test_run_csv_and_sidecar(tmp_path):
    pre = preprocess(make_problem(8, 1.0, 10.0, 5, 0.5, 1.0, seed=2))
    rec = run(pre, "synth", max_iter=30)
    csv_path, json_path = io.write_run(tmp_path, "r", rec, seed=2)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "k,residual,residual_rel,grad_calls,matvecs"
    assert len(lines) == 32
    back = io.read_run_csv(csv_path)
    np.testing.assert_array_equal(back["residual"], rec.residuals)
    np.testing.assert_array_equal(back["matvecs"], rec.matvecs)
    meta = json.loads(json_path.read_text())
    assert meta["algorithm"] == "synth" and meta["seed"] == 2
    assert meta["stop_reason"] == "max_iter" and "eta" in meta["stepsizes"]
    assert meta["rho_syn"] == rec.meta["rho_syn"]
    rec2 = run(pre, "gda-inc", max_iter=5)
    meta2 = io.run_metadata(rec2)
    assert set(meta2["stepsizes"]) == {"alpha1", "alpha2"} and "rho_gda" in meta2


def test_read_run_csv_header_check(tmp_path):
    f = tmp_path / "x.csv"
    f.write_text("a,b\n1,2\n")
    with pytest.raises(ParameterError):
        io.read_run_csv(f)
