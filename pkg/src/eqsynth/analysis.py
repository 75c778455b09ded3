"""Empirical rate fits, exact iteration matrices for quadratics, and run comparison."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientDataError, ParameterError, UnsupportedError
from .preprocess import PreprocessedProblem
from .problems import QuadraticInstance
from .solvers import RunRecord, _resolve_gda
from .synthesis import rho_gda, rho_syn

MIN_FIT_POINTS = 20
THRESHOLDS = (1e-3, 1e-6, 1e-9)


@dataclass(frozen=True)
class RateFit:
    rho_emp: float
    M_emp: float
    window: tuple
    r_squared: float
    policy: str = "auto"


def _auto_window(r: np.ndarray, lower: float, upper: float, trim: float, floor_factor: float):
    r0 = r[0]
    below_upper = np.nonzero(r <= upper * r0)[0]
    if below_upper.size == 0:
        # never left the slow regime: fit the tail after the transient
        start = int(np.ceil(trim * (r.size - 1)))
        return start, r.size - 1, "auto-slow"
    start = int(below_upper[0])
    # stop before the double-precision floor (or the lower threshold)
    floor = np.min(r[r > 0]) if np.any(r > 0) else 0.0
    stop_level = max(lower * r0, floor_factor * floor)
    hits = np.nonzero(r[start:] < stop_level)[0]
    end = start + int(hits[0]) - 1 if hits.size else r.size - 1
    span = end - start
    cut = int(trim * span)
    return start + cut, end - cut, "auto"


def fit_rate(record, window: Optional[tuple] = None, lower: float = 1e-12, upper: float = 1e-2,
             trim: float = 0.1, floor_factor: float = 100.0) -> RateFit:
    """Least-squares fit of ``log r_k = log(M r_0) + k log(rho)``.

    ``record`` is a :class:`RunRecord` or a residual array.  With ``window``
    omitted the fit uses the stretch where ``r_k / r_0`` lies in
    ``[lower, upper]``, ending before any floor (residuals within
    ``floor_factor`` of the smallest value) and trimmed by ``trim`` at both
    ends.  Runs that never drop below ``upper`` are fitted on their tail.
    """
    r = np.asarray(record.residuals if isinstance(record, RunRecord) else record, dtype=float)
    if r.ndim != 1 or r.size < 2 or not r[0] > 0:
        raise InsufficientDataError("need a positive initial residual and at least two points")
    if window is None:
        k0, k1, policy = _auto_window(r, lower, upper, trim, floor_factor)
    else:
        k0, k1 = int(window[0]), int(window[1])
        policy = "explicit"
        if not 0 <= k0 < k1 < r.size:
            raise ParameterError(f"invalid window {window} for {r.size} residuals")
    if k1 - k0 + 1 < MIN_FIT_POINTS:
        raise InsufficientDataError(f"fit window [{k0}, {k1}] has fewer than {MIN_FIT_POINTS} points")
    seg = r[k0:k1 + 1]
    if np.any(seg <= 0) or not np.all(np.isfinite(seg)):
        raise InsufficientDataError("residuals must be positive and finite inside the window")
    k = np.arange(k0, k1 + 1, dtype=float)
    y = np.log(seg)
    # centring k keeps the normal equations well conditioned for long windows
    kc = k.mean()
    slope, icept_c = np.polyfit(k - kc, y, 1)
    intercept = icept_c - slope * kc
    pred = icept_c + slope * (k - kc)
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(np.exp(slope)), float(np.exp(intercept) / r[0]), (k0, k1), r2, policy)


# iteration matrices -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IterationMatrix:
    """Affine update ``s+ = A s + b`` of a solver on a quadratic problem.

    ``layout`` names the state blocks in order.  With ``reduced`` set, the
    accumulator block (``y`` of either algorithm) is projected onto the range
    of the constraint, which removes exactly-unit eigenvalues that never
    reach the iterate.
    """

    A: np.ndarray
    b: np.ndarray
    layout: tuple
    sizes: tuple
    reduced: bool
    projector: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    def trajectory(self, s0, steps: int) -> np.ndarray:
        s = np.asarray(s0, dtype=float)
        out = [s]
        for _ in range(steps):
            s = self.A @ s + self.b
            out.append(s)
        return np.array(out)

    def power_trajectory(self, s0, steps: int) -> np.ndarray:
        """States via explicit powers of the augmented matrix ``[[A, b], [0, 1]]``."""
        N = self.A.shape[0]
        aug = np.zeros((N + 1, N + 1))
        aug[:N, :N] = self.A
        aug[:N, N] = self.b
        aug[N, N] = 1.0
        s0 = np.append(np.asarray(s0, dtype=float), 1.0)
        P = np.eye(N + 1)
        out = []
        for _ in range(steps + 1):
            out.append((P @ s0)[:N])
            P = aug @ P
        return np.array(out)

    def block(self, s, name: str):
        i = self.layout.index(name)
        o = sum(self.sizes[:i])
        return np.asarray(s)[..., o:o + self.sizes[i]]


def iteration_matrix(pre: PreprocessedProblem, algorithm: str = "synth", reduced: bool = True,
                     alpha1: Optional[float] = None, alpha2: Optional[float] = None,
                     strict_paper: bool = False) -> IterationMatrix:
    """Exact affine-update matrix for ``algorithm`` on the homogenized quadratic.

    Synthesized recursion: state ``[x; y_prev; u_prev]`` (3n).  GDA: state
    ``[x; y]`` (n + d).
    """
    obj = pre.shifted_objective()
    if not isinstance(obj, QuadraticInstance):
        raise UnsupportedError("iteration matrix needs a quadratic objective")
    Q, p = obj.Q, obj.p
    n = pre.n
    I = np.eye(n)
    m, L = pre.profile.m, pre.profile.L
    if algorithm == "synth":
        rho = (L - m) / (L + m)
        r2 = rho * rho
        eta = (1.0 - rho) if strict_paper else 2.0 / (L + m)
        E = pre.E_norm
        W = I - E
        C = I - eta * Q
        c = -eta * p
        P = pre.spectral.range_projector() if reduced else I
        A = np.block([
            [r2 * I + W @ C, -E, -r2 * I],
            [P @ W @ C, W @ P, -r2 * P],
            [C, np.zeros((n, n)), np.zeros((n, n))],
        ])
        b = np.concatenate([W @ c, P @ W @ c, c])
        return IterationMatrix(A, b, ("x", "y_prev", "u_prev"), (n, n, n), reduced, P)
    if algorithm not in ("gda", "gda-inc"):
        raise ParameterError(f"unknown algorithm {algorithm!r}")
    E, a1, a2, _ = _resolve_gda(pre, alpha1, alpha2)
    d = E.shape[0]
    Id = np.eye(d)
    if reduced:
        U, s, _ = np.linalg.svd(E, full_matrices=False)
        U = U[:, s > 1e-10 * s[0]]
        P = U @ U.T
    else:
        P = Id
    C = I - a1 * Q
    if algorithm == "gda":
        A = np.block([[C, -a1 * E.T], [a2 * E, P]])
        b = np.concatenate([-a1 * p, np.zeros(d)])
    else:
        A = np.block([[C, -a1 * E.T], [a2 * E @ C, P - a1 * a2 * E @ E.T]])
        b = np.concatenate([-a1 * p, -a1 * a2 * E @ p])
    return IterationMatrix(A, b, ("x", "y"), (n, d), reduced, P)


# comparison ---------------------------------------------------------------------


def theoretical_rate(record: RunRecord) -> float:
    meta = record.meta
    if record.algorithm == "synth":
        return meta.get("rho_syn", rho_syn(meta["L"] / meta["m"]))
    return meta.get("rho_gda", rho_gda(meta["L"] / meta["m"], meta["kappa_E"]))


def iterations_to(record: RunRecord, threshold: float) -> Optional[int]:
    hit = np.nonzero(record.residual_rel <= threshold)[0]
    return int(hit[0]) if hit.size else None


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    algorithm: str
    instance: str
    fit: Optional[RateFit]
    rho_theory: float
    k_to: dict
    error: str = ""


@dataclass(frozen=True, eq=False)
class ComparisonTable:
    rows: list
    pairwise: dict

    def to_csv(self) -> str:
        cols = ["label", "algorithm", "instance", "rho_emp", "M_emp", "rho_theory"]
        cols += [f"k_to_{t:g}" for t in THRESHOLDS]
        lines = [",".join(cols)]
        for row in self.rows:
            vals = [row.label, row.algorithm, row.instance,
                    "" if row.fit is None else f"{row.fit.rho_emp:.17g}",
                    "" if row.fit is None else f"{row.fit.M_emp:.17g}",
                    f"{row.rho_theory:.17g}"]
            vals += ["" if row.k_to[t] is None else str(row.k_to[t]) for t in THRESHOLDS]
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        out = [f"{'label':<20} {'rho_emp':>12} {'rho_theory':>12} {'M_emp':>10} "
               + " ".join(f"{'k@' + format(t, 'g'):>9}" for t in THRESHOLDS)]
        for row in self.rows:
            emp = "n/a" if row.fit is None else f"{row.fit.rho_emp:.8f}"
            M = "n/a" if row.fit is None else f"{row.fit.M_emp:.3g}"
            ks = " ".join(f"{'-' if row.k_to[t] is None else row.k_to[t]:>9}" for t in THRESHOLDS)
            out.append(f"{row.label:<20} {emp:>12} {row.rho_theory:>12.8f} {M:>10} {ks}")
            if row.error:
                out.append(f"  ! {row.error}")
        if self.pairwise:
            out.append("")
            out.append("pairwise |rho_emp difference|:")
            for (a, b), v in self.pairwise.items():
                out.append(f"  {a} vs {b}: {v:.3e}")
        return "\n".join(out) + "\n"


def compare(records: dict, instances: Optional[dict] = None) -> ComparisonTable:
    """Fit every record and tabulate against theory.

    ``records`` maps labels to :class:`RunRecord`; ``instances`` optionally
    maps labels to instance names.  Pairwise rate differences are reported for
    records of the same algorithm.
    """
    if not records:
        raise ParameterError("compare needs at least one record")
    rows = []
    for label, rec in records.items():
        try:
            fit, err = fit_rate(rec), ""
        except InsufficientDataError as exc:
            fit, err = None, str(exc)
        rows.append(ComparisonRow(label, rec.algorithm, (instances or {}).get(label, ""), fit,
                                  theoretical_rate(rec),
                                  {t: iterations_to(rec, t) for t in THRESHOLDS}, err))
    pairwise = {}
    for i, a in enumerate(rows):
        for b in rows[i + 1:]:
            if a.algorithm == b.algorithm and a.fit and b.fit:
                pairwise[(a.label, b.label)] = abs(a.fit.rho_emp - b.fit.rho_emp)
    return ComparisonTable(rows, pairwise)


def reference_lines(k: Sequence[int], rates: dict) -> dict:
    """Columns ``rho**k`` for plotting alongside residual curves."""
    k = np.asarray(k, dtype=float)
    return {name: np.power(rate, k) for name, rate in rates.items()}
