"""JSON and CSV serialization with 17 significant digits."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .problems import ConvexityProfile, Problem, QuadraticInstance


def fmt(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ParameterError(f"cannot serialize non-finite number {x}")
    s = format(x, ".17g")
    # keep floats recognisably floating point on reload
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def dumps(obj, indent: int = 1, _level: int = 0) -> str:
    """Deterministic JSON with fixed-precision floats; non-finite floats become null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    return json.dumps(str(obj))


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def problem_to_dict(problem: Problem, extra: dict = None) -> dict:
    obj = problem.objective
    if not isinstance(obj, QuadraticInstance):
        raise ParameterError("only quadratic problems can be serialized")
    meta = {"m": obj.profile.m, "L": obj.profile.L, "seed": problem.meta.get("seed"),
            "generator": problem.meta.get("generator", "user")}
    for k, v in problem.meta.items():
        meta.setdefault(k, v)
    out = {
        "n": problem.n,
        "d": problem.d,
        "quadratic": {"Q": obj.Q, "p": obj.p},
        "constraint": {"E": problem.E, "q": problem.q},
        "meta": meta,
    }
    if extra:
        out.update(extra)
    return out


def preprocessed_to_dict(pre) -> dict:
    sp = pre.spectral
    return problem_to_dict(pre.problem, {"preprocess": {
        "x_bar": pre.x_bar, "scale": pre.scale, "mode": pre.scaling_mode, "rank": sp.r,
        "sigma_min": sp.sigma_min, "sigma_max": sp.sigma_max,
        "symmetrized": pre.was_symmetrized, "homogenized": pre.was_homogenized,
        "kappa_raw": pre.kappa_raw, "kappa_norm": pre.kappa_norm,
    }})


def problem_from_dict(data: dict) -> Problem:
    try:
        meta = dict(data.get("meta", {}))
        quad = data["quadratic"]
        con = data["constraint"]
        Q = np.asarray(quad["Q"], dtype=float)
        p = np.asarray(quad["p"], dtype=float)
        E = np.asarray(con["E"], dtype=float)
        q = np.asarray(con["q"], dtype=float)
        profile = ConvexityProfile(float(meta["m"]), float(meta["L"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParameterError(f"malformed problem file: {exc}") from exc
    if E.shape != (int(data["d"]), int(data["n"])):
        raise ParameterError(f"E has shape {E.shape}, header says d={data['d']}, n={data['n']}")
    return Problem(QuadraticInstance(Q, p, profile), E, q, meta)


def load_problem(path) -> Problem:
    return problem_from_dict(json.loads(Path(path).read_text()))


def save_problem(path, problem: Problem) -> None:
    write_json(path, problem_to_dict(problem))


RUN_CSV_HEADER = "k,residual,residual_rel,grad_calls,matvecs"


def run_to_csv(record) -> str:
    lines = [RUN_CSV_HEADER]
    for k in range(record.residuals.size):
        lines.append(f"{k},{fmt(record.residuals[k])},{fmt(record.residual_rel[k])},"
                     f"{int(record.grad_calls[k])},{int(record.matvecs[k])}")
    return "\n".join(lines) + "\n"


def run_metadata(record, seed=None) -> dict:
    meta = dict(record.meta)
    out = {
        "algorithm": record.algorithm,
        "stepsizes": ({"eta": meta.get("eta")} if record.algorithm == "synth"
                      else {"alpha1": meta.get("alpha1"), "alpha2": meta.get("alpha2")}),
        "stop_reason": record.stop_reason,
        "iterations": record.iterations,
        "wall_time": record.wall_time,
        "seed": seed,
    }
    if record.algorithm == "synth":
        out["rho_syn"] = meta.get("rho_syn")
    else:
        out["rho_gda"] = meta.get("rho_gda")
    out["meta"] = meta
    return out


def write_run(directory, label: str, record, seed=None) -> tuple:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{label}.csv"
    json_path = directory / f"{label}.json"
    csv_path.write_text(run_to_csv(record))
    write_json(json_path, run_metadata(record, seed))
    return csv_path, json_path


def read_run_csv(path) -> dict:
    rows = Path(path).read_text().strip().splitlines()
    if rows[0] != RUN_CSV_HEADER:
        raise ParameterError(f"unexpected header in {path}: {rows[0]!r}")
    data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    return {name: data[:, i] for i, name in enumerate(RUN_CSV_HEADER.split(","))}
