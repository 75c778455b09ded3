"""Constraint normalization: symmetric PSD, homogeneous, largest singular value at most one."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractError, InfeasibleConstraintError, ParameterError
from .problems import ConvexityProfile, OracleObjective, Problem, QuadraticInstance

SCALING_MODES = ("trace", "colsum", "sigma_max", "none")

OK_THEOREM = "ok_theorem"
OK_DERIVATION_ONLY = "ok_derivation_only"
VIOLATED = "violated"


@dataclass(frozen=True, eq=False)
class SpectralData:
    r: int
    sigma: np.ndarray
    V1: np.ndarray
    V2: np.ndarray

    @property
    def sigma_max(self) -> float:
        return float(self.sigma[0]) if self.r else 0.0

    @property
    def sigma_min(self) -> float:
        return float(self.sigma[-1]) if self.r else 0.0

    @property
    def kappa_E(self) -> float:
        return self.sigma_max / self.sigma_min if self.r else np.inf

    @property
    def n(self) -> int:
        return self.V1.shape[0]

    def range_projector(self) -> np.ndarray:
        return self.V1 @ self.V1.T

    def reconstruct(self) -> np.ndarray:
        return (self.V1 * self.sigma) @ self.V1.T


def _is_sym_psd(E: np.ndarray, tol: float = 1e-12) -> bool:
    if E.shape[0] != E.shape[1]:
        return False
    scale = max(np.max(np.abs(E)), np.finfo(float).tiny)
    if np.max(np.abs(E - E.T)) > tol * scale:
        return False
    return np.linalg.eigvalsh(0.5 * (E + E.T))[0] >= -tol * np.linalg.norm(E, 2)


def symmetrize(E_raw, q):
    """Return an equivalent symmetric PSD constraint ``(E'E, E'q)``.

    Already symmetric PSD input is returned unchanged.  The third return value
    says whether the product was formed.
    """
    E_raw = np.atleast_2d(np.asarray(E_raw, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if not np.any(E_raw):
        raise ParameterError("constraint matrix is zero")
    if _is_sym_psd(E_raw):
        return E_raw, q, False
    E = E_raw.T @ E_raw
    return 0.5 * (E + E.T), E_raw.T @ q, True


def homogenize(E, q, spectral: Optional[SpectralData] = None):
    """Minimum-norm feasible point ``x_bar`` of ``E x = q`` and the constraint ``(E, 0)``."""
    E = np.asarray(E, dtype=float)
    q = np.asarray(q, dtype=float)
    if not np.any(q):
        return np.zeros(E.shape[1]), E, np.zeros_like(q)
    sp = spectral if spectral is not None else spectral_analysis(E)
    x_bar = sp.V1 @ ((sp.V1.T @ q) / sp.sigma)
    if np.linalg.norm(E @ x_bar - q) > 1e-9 * (1.0 + np.linalg.norm(q)):
        raise InfeasibleConstraintError("q is not in the range of E")
    return x_bar, E, np.zeros_like(q)


def scale_constraint(E, mode: str = "sigma_max"):
    """Divide ``E`` by its trace, max absolute column sum, or largest singular value."""
    E = np.asarray(E, dtype=float)
    if not np.any(E):
        raise ParameterError("cannot scale a zero constraint matrix")
    if mode == "trace":
        c = float(np.trace(E))
    elif mode == "colsum":
        c = float(np.max(np.sum(np.abs(E), axis=0)))
    elif mode == "sigma_max":
        c = float(np.linalg.norm(E, 2))
    elif mode == "none":
        c = 1.0
    else:
        raise ParameterError(f"unknown scaling mode {mode!r}; expected one of {SCALING_MODES}")
    if c <= 0:
        raise ParameterError(f"scaling factor must be positive, got {c}")
    return E / c, c


def spectral_analysis(E, rank_tol: Optional[float] = None) -> SpectralData:
    E = np.asarray(E, dtype=float)
    if E.ndim != 2 or E.shape[0] != E.shape[1]:
        raise ContractError(f"spectral analysis needs a square matrix, got {E.shape}")
    scale = max(np.max(np.abs(E)), np.finfo(float).tiny)
    if np.max(np.abs(E - E.T)) > 1e-9 * scale:
        raise ContractError("constraint matrix is not symmetric")
    lam, V = np.linalg.eigh(0.5 * (E + E.T))
    order = np.argsort(lam)[::-1]
    lam, V = lam[order], V[:, order]
    tol = rank_tol if rank_tol is not None else 1e-10 * max(lam[0], 0.0)
    r = int(np.sum(lam > tol))
    return SpectralData(r=r, sigma=lam[:r].copy(), V1=V[:, :r].copy(), V2=V[:, r:].copy())


@dataclass(frozen=True)
class RateDiagnosis:
    status: str
    sigma_min: float
    sigma_max: float
    theorem_threshold: float
    derivation_threshold: float

    @property
    def admissible(self) -> bool:
        return self.status != VIOLATED

    def describe(self) -> str:
        return (f"{self.status}: sigma_min={self.sigma_min:.6g}, sigma_max={self.sigma_max:.6g}; "
                f"theorem needs sigma_min > 2/kappa_f = {self.theorem_threshold:.6g}, "
                f"derivation needs sigma_min > 2/(kappa_f+1) = {self.derivation_threshold:.6g}, "
                f"and sigma_max <= 1")


def check_rate_condition(spectral, profile: ConvexityProfile) -> RateDiagnosis:
    """Classify ``[sigma_min, sigma_max]`` against both admissibility thresholds.

    ``spectral`` is anything with ``sigma_min`` and ``sigma_max`` attributes.
    """
    kf = profile.kappa_f()
    t_thm = 2.0 / kf
    t_der = 2.0 / (kf + 1.0)
    smin, smax = float(spectral.sigma_min), float(spectral.sigma_max)
    if kf == 1.0:
        # the open interval is empty; its closure point sigma = 1 still gives rho = 0
        status = OK_DERIVATION_ONLY if abs(smin - 1.0) <= 1e-12 and abs(smax - 1.0) <= 1e-12 else VIOLATED
    elif smax > 1.0 + 1e-12 or smin <= t_der:
        status = VIOLATED
    elif smin > t_thm:
        status = OK_THEOREM
    else:
        status = OK_DERIVATION_ONLY
    return RateDiagnosis(status, smin, smax, t_thm, t_der)


@dataclass(frozen=True, eq=False)
class PreprocessedProblem:
    """Normalized constraint ``E_norm x~ = 0`` with ``x = x~ + x_bar``."""

    problem: Problem
    E_norm: np.ndarray
    x_bar: np.ndarray
    scale: float
    spectral: SpectralData
    was_symmetrized: bool
    was_homogenized: bool
    scaling_mode: str
    raw_sigma: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.E_norm.shape[0]

    @property
    def profile(self) -> ConvexityProfile:
        return self.problem.profile

    @property
    def kappa_raw(self) -> float:
        s = self.raw_sigma
        return float(s[0] / s[-1])

    @property
    def kappa_norm(self) -> float:
        return self.spectral.kappa_E

    @property
    def E_homogeneous(self) -> np.ndarray:
        """Raw constraint matrix acting on shifted coordinates (``E_raw x~ = 0``)."""
        return self.problem.E

    def shifted_objective(self):
        """Objective in shifted coordinates, ``x~ -> f(x~ + x_bar)``."""
        obj = self.problem.objective
        if isinstance(obj, QuadraticInstance):
            return QuadraticInstance(obj.Q, obj.p + obj.Q @ self.x_bar, obj.profile)
        x_bar = self.x_bar
        return OracleObjective(lambda x: obj.gradient(x + x_bar), obj.n, obj.profile)

    def unshift(self, x_tilde):
        return np.asarray(x_tilde) + self.x_bar

    def rate_condition(self) -> RateDiagnosis:
        return check_rate_condition(self.spectral, self.profile)


def preprocess(problem: Problem, mode: str = "sigma_max", rank_tol: Optional[float] = None,
               rescale_normalized: bool = False) -> PreprocessedProblem:
    """Symmetrize, homogenize, scale, and analyze the constraint of ``problem``.

    A constraint that is already symmetric PSD with ``sigma_max <= 1`` is left
    unscaled unless ``rescale_normalized`` is set.
    """
    E_raw, q_raw = problem.E, problem.q
    raw_sigma = np.linalg.svd(E_raw, compute_uv=False)
    raw_sigma = raw_sigma[raw_sigma > 1e-10 * raw_sigma[0]]
    E_sym, q_sym, was_sym = symmetrize(E_raw, q_raw)
    sp0 = spectral_analysis(E_sym, rank_tol)
    x_bar, E_h, _ = homogenize(E_sym, q_sym, sp0)
    was_hom = bool(np.any(q_raw))
    if was_hom and np.linalg.norm(E_raw @ x_bar - q_raw) > 1e-9 * (1.0 + np.linalg.norm(q_raw)):
        raise InfeasibleConstraintError("original constraint E x = q is inconsistent")
    if not rescale_normalized and mode != "none" and sp0.sigma_max <= 1.0 + 1e-12:
        mode = "none"
    if mode == "sigma_max":
        # reuse the eigen-decomposition so the normalized spectrum tops out at exactly 1
        c = sp0.sigma_max
        E_norm = E_h / c
    else:
        E_norm, c = scale_constraint(E_h, mode)
    if c == 1.0:
        spectral = sp0
    else:
        sigma = sp0.sigma / c
        if mode == "sigma_max":
            sigma[0] = 1.0
        spectral = SpectralData(sp0.r, sigma, sp0.V1, sp0.V2)
    E_norm = E_norm.copy()
    E_norm.setflags(write=False)
    return PreprocessedProblem(problem, E_norm, x_bar, c, spectral, was_sym, was_hom, mode, raw_sigma)
