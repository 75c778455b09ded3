"""Iterative solvers: the synthesized three-sequence recursion and (incremental) GDA.

Both work on the homogenized problem ``min f(x~ + x_bar)  s.t.  E x~ = 0``
produced by :func:`eqsynth.preprocess.preprocess`.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError, ParameterError, RateConditionError
from .preprocess import PreprocessedProblem
from .problems import QuadraticInstance, kkt_solve
from .synthesis import gda_stepsizes, rho_gda, rho_syn

log = logging.getLogger(__name__)

ALGORITHMS = ("synth", "gda", "gda-inc")
DIVERGENCE_FACTOR = 1e12


class ConstraintOperator:
    """Applies ``E_norm`` (and ``W = I - E_norm``) as a dense matrix or via raw products.

    In ``operator`` mode ``E_norm v = E_raw'(E_raw v) / scale`` is computed
    without forming ``E_raw' E_raw``.
    """

    def __init__(self, pre: PreprocessedProblem, mode: str = "dense"):
        if mode not in ("dense", "operator"):
            raise ParameterError(f"unknown W mode {mode!r}")
        self.mode = mode if pre.was_symmetrized else "dense"
        self._E = pre.E_norm
        self._raw = pre.problem.E
        self._c = pre.scale
        self.count = 0

    def E(self, v):
        if self.mode == "dense":
            return self._E @ v
        return self._raw.T @ (self._raw @ v) / self._c

    def W(self, v):
        self.count += 1
        return v - self.E(v)


@dataclass
class SynthState:
    x: np.ndarray
    y_prev: np.ndarray
    u_prev: np.ndarray
    rho: float
    eta: float

    @classmethod
    def initial(cls, x0, rho: float, eta: float) -> "SynthState":
        x0 = np.asarray(x0, dtype=float)
        return cls(x0.copy(), np.zeros_like(x0), np.zeros_like(x0), rho, eta)


def synth_step(state: SynthState, grad, apply_W: Callable, k: int = 0) -> SynthState:
    """One step of the synthesized recursion.

        u   = x - eta grad
        y   = W (y_prev + u) - rho^2 u_prev
        x+  = rho^2 x + y - y_prev
    """
    r2 = state.rho * state.rho
    u = state.x - state.eta * grad
    y = apply_W(state.y_prev + u) - r2 * state.u_prev
    x_next = r2 * state.x + y - state.y_prev
    if not np.all(np.isfinite(x_next)):
        raise DivergenceError(f"non-finite iterate at k={k}", k)
    return SynthState(x_next, y, u, state.rho, state.eta)


@dataclass
class GDAState:
    x: np.ndarray
    y: np.ndarray
    alpha1: float
    alpha2: float
    mode: str = "incremental"

    @classmethod
    def initial(cls, x0, d: int, alpha1: float, alpha2: float, mode: str = "incremental"):
        if mode not in ("simultaneous", "incremental"):
            raise ParameterError(f"unknown GDA mode {mode!r}")
        return cls(np.asarray(x0, dtype=float).copy(), np.zeros(d), alpha1, alpha2, mode)


def gda_step(state: GDAState, grad, E, k: int = 0) -> GDAState:
    """``x+ = x - a1 (grad + E'y)``; ``y+ = y + a2 E x`` (or ``E x+`` when incremental)."""
    x_next = state.x - state.alpha1 * (grad + E.T @ state.y)
    src = x_next if state.mode == "incremental" else state.x
    y_next = state.y + state.alpha2 * (E @ src)
    if not (np.all(np.isfinite(x_next)) and np.all(np.isfinite(y_next))):
        raise DivergenceError(f"non-finite iterate at k={k}", k)
    return replace(state, x=x_next, y=y_next)


# run loop ---------------------------------------------------------------------


@dataclass(frozen=True)
class Stop:
    """Stopping rule: ``max_iter``, ``residual_below`` or ``stalled``."""

    kind: str = "max_iter"
    eps: float = 0.0
    window: int = 100

    @classmethod
    def residual_below(cls, eps: float) -> "Stop":
        return cls("residual_below", eps)

    @classmethod
    def stalled(cls, eps: float, window: int = 100) -> "Stop":
        return cls("stalled", eps, window)


@dataclass(eq=False)
class RunRecord:
    algorithm: str
    residuals: np.ndarray
    residual_rel: np.ndarray
    step_norms: np.ndarray
    grad_calls: np.ndarray
    matvecs: np.ndarray
    wall_time: float
    stop_reason: str
    x_final: np.ndarray
    x_star: Optional[np.ndarray]
    meta: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.residuals) - 1


def _resolve_gda(pre: PreprocessedProblem, alpha1, alpha2):
    E = pre.E_homogeneous
    s = pre.raw_sigma
    kE = float(s[0] / s[-1])
    if kE - 1.0 <= 1e-9:
        kE = 1.0
    a1, a2 = gda_stepsizes(pre.profile, float(s[0]), kE)
    if kE == 1.0 and alpha1 is None:
        log.warning("kappa_E = 1 gives a zero primal stepsize for GDA")
    return E, (a1 if alpha1 is None else alpha1), (a2 if alpha2 is None else alpha2), kE


def run(pre: PreprocessedProblem, algorithm: str = "synth", max_iter: int = 50_000,
        stop: Optional[Stop] = None, x0=None, alpha1: Optional[float] = None,
        alpha2: Optional[float] = None, strict_paper: bool = False, force: bool = False,
        w_mode: str = "dense", x_star=None) -> RunRecord:
    """Iterate ``algorithm`` on ``pre`` and log one residual per iteration.

    ``x0`` is given in original coordinates (default zero).  For quadratic
    objectives the reference solution comes from :func:`kkt_solve`; for
    oracle objectives pass ``x_star`` or the step norm is logged instead.
    """
    if algorithm not in ALGORITHMS:
        raise ParameterError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")
    stop = stop or Stop()
    problem = pre.problem
    profile = pre.profile
    obj = pre.shifted_objective()
    n = pre.n
    if x_star is None and isinstance(problem.objective, QuadraticInstance):
        x_star = kkt_solve(problem.objective, problem.E, problem.q).x
    x_star = None if x_star is None else np.asarray(x_star, dtype=float)
    xs_tilde = None if x_star is None else x_star - pre.x_bar
    x_start = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    if x_start.shape != (n,):
        raise ParameterError(f"x0 has shape {x_start.shape}, expected ({n},)")
    x = x_start - pre.x_bar

    meta = {"algorithm": algorithm, "n": n, "m": profile.m, "L": profile.L}
    counts = {"grad": 0, "mv": 0}
    if algorithm == "synth":
        diag = pre.rate_condition()
        meta["rate_condition"] = diag.status
        if not diag.admissible and not force:
            raise RateConditionError(diag.describe(), diag)
        rho = (profile.L - profile.m) / (profile.L + profile.m)
        eta = (1.0 - rho) if strict_paper else 2.0 / (profile.L + profile.m)
        op = ConstraintOperator(pre, w_mode)
        state = SynthState.initial(x, rho, eta)
        meta.update(rho_syn=rho_syn(profile.kappa_f()), eta=eta, w_mode=op.mode,
                    strict_paper=bool(strict_paper))

        def advance(st, k):
            counts["grad"] += 1
            st = synth_step(st, obj.gradient(st.x), op.W, k)
            counts["mv"] = op.count
            return st
    else:
        E, a1, a2, kE = _resolve_gda(pre, alpha1, alpha2)
        mode = "incremental" if algorithm == "gda-inc" else "simultaneous"
        state = GDAState.initial(x, E.shape[0], a1, a2, mode)
        meta.update(alpha1=a1, alpha2=a2, kappa_E=kE, rho_gda=rho_gda(profile.kappa_f(), kE))

        def advance(st, k):
            counts["grad"] += 1
            counts["mv"] += 1  # one E and one E' product
            return gda_step(st, obj.gradient(st.x), E, k)

    xs_norm = None if xs_tilde is None else float(np.linalg.norm(x_star))
    denom = xs_norm if xs_norm else 1.0

    res = np.empty(max_iter + 1)
    steps = np.empty(max_iter + 1)
    gcalls = np.zeros(max_iter + 1, dtype=np.int64)
    mvs = np.zeros(max_iter + 1, dtype=np.int64)
    res[0] = np.linalg.norm(x - xs_tilde) if xs_tilde is not None else np.nan
    steps[0] = 0.0
    ref0 = res[0] if xs_tilde is not None else None
    reason = "max_iter"
    t0 = time.perf_counter()
    k = 0
    while k < max_iter:
        x_prev = state.x
        state = advance(state, k)
        k += 1
        gcalls[k], mvs[k] = counts["grad"], counts["mv"]
        steps[k] = np.linalg.norm(state.x - x_prev)
        if xs_tilde is not None:
            res[k] = np.linalg.norm(state.x - xs_tilde)
            cur = res[k]
            if ref0 and cur > DIVERGENCE_FACTOR * ref0:
                raise DivergenceError(f"residual blew up at k={k}", k)
        else:
            res[k] = np.nan
            cur = steps[k]
        if stop.kind == "residual_below" and cur / (denom if xs_tilde is not None else 1.0) <= stop.eps:
            reason = "residual_below"
            break
        if stop.kind == "stalled" and k > stop.window:
            hist = res if xs_tilde is not None else steps
            old = hist[k - stop.window]
            if old > 0 and abs(old - cur) <= stop.eps * old:
                reason = "stalled"
                break
    wall = time.perf_counter() - t0
    res, steps = res[: k + 1], steps[: k + 1]
    if xs_tilde is None:
        res = steps.copy()
    rel = res / denom if xs_tilde is not None else res.copy()
    meta.update(stop_reason=reason, iterations=k)
    return RunRecord(algorithm, res, rel, steps, gcalls[: k + 1], mvs[: k + 1], wall, reason,
                     pre.unshift(state.x), x_star, meta)
