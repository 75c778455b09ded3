"""Problem instances, seeded generators with prescribed spectra, and a KKT oracle.

Randomness comes from numpy's counter-based Philox bit generator keyed by
``(seed, stream)``; the same arguments give bit-identical instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg

from .errors import InfeasibleConstraintError, ParameterError

SPECTRUM_LAWS = ("log-uniform", "uniform")

# independent Philox streams per generated object
_STREAM_QUADRATIC = 0
_STREAM_CONSTRAINT = 1


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator keyed by ``(seed, stream)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


@dataclass(frozen=True)
class ConvexityProfile:
    m: float
    L: float

    def __post_init__(self):
        if not (np.isfinite(self.m) and np.isfinite(self.L)) or self.m <= 0 or self.L < self.m:
            raise ParameterError(f"need 0 < m <= L, got m={self.m}, L={self.L}")

    def kappa_f(self) -> float:
        return self.L / self.m


@dataclass(frozen=True, eq=False)
class QuadraticInstance:
    """``f(x) = 0.5 x'Qx + p'x`` with declared curvature bounds."""

    Q: np.ndarray
    p: np.ndarray
    profile: ConvexityProfile

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or p.shape != (Q.shape[0],):
            raise ParameterError(f"inconsistent shapes Q{Q.shape}, p{p.shape}")
        scale = max(np.max(np.abs(Q)), 1.0)
        if np.max(np.abs(Q - Q.T)) > 1e-12 * scale:
            raise ParameterError("Q is not symmetric")
        Q.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    def value(self, x):
        return 0.5 * x @ self.Q @ x + self.p @ x

    def gradient(self, x):
        return self.Q @ x + self.p


@dataclass(frozen=True, eq=False)
class OracleObjective:
    """Black-box gradient with a declared (trusted, unchecked) profile."""

    grad: Callable[[np.ndarray], np.ndarray]
    n: int
    profile: ConvexityProfile

    def gradient(self, x):
        return np.asarray(self.grad(x), dtype=float)


Objective = Union[QuadraticInstance, OracleObjective]


@dataclass(frozen=True, eq=False)
class Problem:
    objective: Objective
    E: np.ndarray
    q: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        E = np.atleast_2d(np.asarray(self.E, dtype=float))
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        if E.shape[1] != self.objective.n or q.shape != (E.shape[0],):
            raise ParameterError(
                f"constraint shapes E{E.shape}, q{q.shape} do not match n={self.objective.n}"
            )
        E.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "q", q)

    @property
    def n(self) -> int:
        return self.E.shape[1]

    @property
    def d(self) -> int:
        return self.E.shape[0]

    @property
    def profile(self) -> ConvexityProfile:
        return self.objective.profile

    @property
    def is_quadratic(self) -> bool:
        return isinstance(self.objective, QuadraticInstance)


def gradient(problem: Union[Problem, Objective], x) -> np.ndarray:
    obj = problem.objective if isinstance(problem, Problem) else problem
    x = np.asarray(x, dtype=float)
    if x.shape != (obj.n,):
        raise ParameterError(f"x has shape {x.shape}, expected ({obj.n},)")
    return obj.gradient(x)


# generators ---------------------------------------------------------------


def _orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    G = rng.standard_normal((n, n))
    U, R = np.linalg.qr(G)
    # sign fix makes the factorization unique
    return U * np.where(np.diag(R) < 0, -1.0, 1.0)


def _interior(rng, k: int, lo: float, hi: float, law: str) -> np.ndarray:
    u = rng.random(k)
    if law == "log-uniform":
        return np.exp((1.0 - u) * np.log(lo) + u * np.log(hi))
    if law == "uniform":
        return lo + u * (hi - lo)
    raise ParameterError(f"unknown spectrum law {law!r}; expected one of {SPECTRUM_LAWS}")


def _spectrum(rng, k: int, lo: float, hi: float, law: str) -> np.ndarray:
    """Descending values with exact extremes ``hi`` and ``lo``."""
    if k == 1:
        return np.array([hi])
    mid = np.sort(_interior(rng, k - 2, lo, hi, law))[::-1]
    return np.concatenate([[hi], mid, [lo]])


def generate_quadratic(n: int, m: float, L: float, spectrum_law: str = "log-uniform",
                       seed: int = 0) -> QuadraticInstance:
    if int(n) != n or n < 2:
        raise ParameterError(f"need integer n >= 2, got {n}")
    profile = ConvexityProfile(float(m), float(L))
    if spectrum_law not in SPECTRUM_LAWS:
        raise ParameterError(f"unknown spectrum law {spectrum_law!r}")
    rng = make_rng(seed, _STREAM_QUADRATIC)
    U = _orthogonal(rng, n)
    lam = _spectrum(rng, n, m, L, spectrum_law)
    p = rng.standard_normal(n)
    Q = (U * lam) @ U.T
    Q = 0.5 * (Q + Q.T)
    return QuadraticInstance(Q, p, profile)


def generate_constraint(n: int, r: int, sigma_min: float, sigma_max: float, seed: int = 0,
                        d: Optional[int] = None, spectrum_law: str = "log-uniform") -> np.ndarray:
    """Constraint matrix with rank ``r`` and singular values in ``[sigma_min, sigma_max]``.

    With ``d`` omitted (or equal to ``n``) the result is symmetric PSD,
    ``V diag(s, 0) V'``.  Otherwise a ``d x n`` matrix ``U diag(s) V'`` is
    returned.  The largest and smallest nonzero singular values are exact.
    Interior values are drawn from a fixed uniform sample mapped onto the
    interval, so changing only ``sigma_min`` rescales them consistently.
    """
    d = n if d is None else int(d)
    if int(n) != n or n < 1 or d < 1:
        raise ParameterError(f"invalid dimensions n={n}, d={d}")
    if int(r) != r or r < 1 or r > min(n, d):
        raise ParameterError(f"need 1 <= r <= min(n, d), got r={r}")
    if not (sigma_min > 0 and sigma_max >= sigma_min):
        raise ParameterError(f"need 0 < sigma_min <= sigma_max, got {sigma_min}, {sigma_max}")
    if r == 1 and sigma_min != sigma_max:
        raise ParameterError("rank-one constraint needs sigma_min == sigma_max")
    rng = make_rng(seed, _STREAM_CONSTRAINT)
    V = _orthogonal(rng, n)
    s = _spectrum(rng, r, sigma_min, sigma_max, spectrum_law)
    if d == n:
        E = (V[:, :r] * s) @ V[:, :r].T
        return 0.5 * (E + E.T)
    U = _orthogonal(rng, d)
    return (U[:, :r] * s) @ V[:, :r].T


def make_problem(n: int = 100, m: float = 1.0, L: float = 2000.0, rank: int = 80,
                 sigma_min: float = 0.1, sigma_max: float = 1.0, seed: int = 0,
                 d: Optional[int] = None, spectrum_law: str = "log-uniform") -> Problem:
    quad = generate_quadratic(n, m, L, spectrum_law, seed)
    E = generate_constraint(n, rank, sigma_min, sigma_max, seed, d=d, spectrum_law=spectrum_law)
    meta = {"m": float(m), "L": float(L), "seed": int(seed),
            "generator": f"eqsynth.philox/{spectrum_law}",
            "rank": int(rank), "sigma_min": float(sigma_min), "sigma_max": float(sigma_max)}
    return Problem(quad, E, np.zeros(E.shape[0]), meta)


def paper_instances(seed: int = 0, n: int = 100, m: float = 1.0, L: float = 2000.0, rank: int = 80,
                    sigma_mins=(0.1, 0.01, 0.001)) -> dict:
    """The three constraint instances of the rate-comparison study.

    All share the objective and the singular vectors; only the smallest
    singular value differs.
    """
    return {f"E{i + 1}": make_problem(n, m, L, rank, smin, 1.0, seed)
            for i, smin in enumerate(sigma_mins)}


# KKT oracle -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class KKTSolution:
    x: np.ndarray
    y: np.ndarray
    rank: int
    residual: float


def kkt_solve(instance: QuadraticInstance, E, q, rank_tol: float = 1e-10) -> KKTSolution:
    """Solve ``[Q E'; E 0][x; y] = [-p; q]`` by the null-space method.

    A rank-revealing SVD of ``E`` gives the minimum-norm particular solution
    and a null-space basis ``N``; the reduced system ``N'QN w = -N'(Qx_p + p)``
    is solved by Cholesky.  ``y`` is the minimum-norm multiplier.  Singular
    values below ``rank_tol * sigma_max(E)`` count as zero.
    """
    E = np.atleast_2d(np.asarray(E, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    n, d = instance.n, E.shape[0]
    if E.shape[1] != n or q.shape != (d,):
        raise ParameterError(f"constraint shapes E{E.shape}, q{q.shape} do not match n={n}")
    Q, p = instance.Q, instance.p
    U, s, Vt = np.linalg.svd(E)
    r = int(np.sum(s > rank_tol * s[0])) if s.size and s[0] > 0 else 0
    x_p = Vt[:r].T @ ((U[:, :r].T @ q) / s[:r])
    if np.linalg.norm(E @ x_p - q) > 1e-9 * (1.0 + np.linalg.norm(q)) * max(1.0, s[0] if s.size else 1.0):
        raise InfeasibleConstraintError("q is not in the range of E")
    N = Vt[r:].T
    if N.shape[1]:
        H = N.T @ Q @ N
        try:
            w = scipy.linalg.cho_solve(scipy.linalg.cho_factor(H), -N.T @ (Q @ x_p + p))
        except np.linalg.LinAlgError as exc:
            raise InfeasibleConstraintError("reduced Hessian is not positive definite") from exc
        x = x_p + N @ w
    else:
        x = x_p
    grad = Q @ x + p
    # E'y = -grad on range(E'); minimum-norm solution
    y = -(U[:, :r] @ ((Vt[:r] @ grad) / s[:r]))
    res = np.linalg.norm(np.concatenate([grad + E.T @ y, E @ x - q]))
    return KKTSolution(x=x, y=y, rank=r, residual=float(res))


def sector_check(objective: Objective, samples: int = 1000, seed: int = 0, scale: float = 1.0):
    """Sample ``<grad(x)-grad(x'), x-x'> / |x-x'|^2`` over random pairs.

    Returns ``(min_ratio, max_ratio)``; a diagnostic only, never enforced.
    """
    rng = make_rng(seed, 99)
    lo, hi = np.inf, -np.inf
    for _ in range(samples):
        x = scale * rng.standard_normal(objective.n)
        xp = scale * rng.standard_normal(objective.n)
        e = x - xp
        ratio = (objective.gradient(x) - objective.gradient(xp)) @ e / (e @ e)
        lo, hi = min(lo, ratio), max(hi, ratio)
    return float(lo), float(hi)
