"""Transfer-function synthesis of the constrained gradient algorithm and its certification.

Scalar transfer functions are indexed by a constraint singular value
``sigma`` (``sigma = 0`` is the null space of the constraint).  The chain is

    gbar (all-pass interpolant) -> g -> h (algorithm, gradient -> iterate)
                                     -> hbar (loop-transformed h)

and the checks are: causality ``hbar(inf) = 1``, optimality ``hbar(1)``
equal to 1 (or ``L/m`` at ``sigma = 0``), and rho-stability via positive real
part of ``hbar(gamma z)`` outside the unit disk for ``gamma`` in ``(rho, 1]``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import ContractError, ParameterError, RateConditionError, UnsupportedError
from .preprocess import check_rate_condition
from .problems import ConvexityProfile, make_rng
from .tf import RationalTF, Z, poly_roots

ROUND_TRIP_TOL = 1e-10
ROUND_TRIP_RADIUS = 1.5
ROUND_TRIP_POINTS = 64


@dataclass(frozen=True)
class SynthesisParams:
    m: float
    L: float
    sigma_l: Optional[float] = None
    sigma_u: float = 1.0

    def __post_init__(self):
        ConvexityProfile(self.m, self.L)
        if self.sigma_l is not None and not (0.0 < self.sigma_l <= self.sigma_u):
            raise ParameterError(f"need 0 < sigma_l <= sigma_u, got {self.sigma_l}, {self.sigma_u}")
        a = (self.L - self.m) / (self.L + self.m)
        b = 1.0 - 2.0 / (self.kappa_f + 1.0)
        if abs(a - b) > 1e-15 * max(abs(a), 1.0) + 2 * np.finfo(float).eps:
            raise ContractError(f"rate identity failed: {a!r} vs {b!r}")

    @classmethod
    def from_spectral(cls, profile: ConvexityProfile, spectral) -> "SynthesisParams":
        return cls(profile.m, profile.L, spectral.sigma_min, spectral.sigma_max)

    @property
    def profile(self) -> ConvexityProfile:
        return ConvexityProfile(self.m, self.L)

    @property
    def kappa_f(self) -> float:
        return self.L / self.m

    @property
    def rho(self) -> float:
        return (self.L - self.m) / (self.L + self.m)

    @property
    def eta(self) -> float:
        return 2.0 / (self.L + self.m)

    # aliases so params can be passed where spectral data is expected
    @property
    def sigma_min(self) -> float:
        return self.sigma_l

    @property
    def sigma_max(self) -> float:
        return self.sigma_u


def _check_sigma(sigma):
    if not 0.0 <= sigma <= 1.0:
        raise ParameterError(f"sigma must lie in [0, 1], got {sigma}")


# rates ------------------------------------------------------------------------


def rho_syn(kappa_f: float) -> float:
    return 1.0 - 2.0 / (kappa_f + 1.0)


def rho_gda(kappa_f: float, kappa_E: float) -> float:
    """Best known GDA rate; equals 1 when ``kappa_E = 1`` (zero primal step)."""
    return float(np.sqrt(1.0 - (1.0 / kappa_f) * (1.0 / kappa_E - 1.0 / kappa_E**2)))


def gda_stepsizes(profile: ConvexityProfile, sigma_max: float, kappa_E: float):
    alpha1 = (1.0 - 1.0 / kappa_E) / profile.L
    alpha2 = profile.m / sigma_max
    return alpha1, alpha2


# transfer functions -----------------------------------------------------------


def gbar(sigma: float, params: SynthesisParams) -> RationalTF:
    """All-pass interpolant ``-((1-s) z - rho) / (rho z - (1-s))``."""
    _check_sigma(sigma)
    w, rho = 1.0 - sigma, params.rho
    return RationalTF([rho, -w], [-w, rho])


def g_tf(sigma: float, params: SynthesisParams) -> RationalTF:
    """``-((1-s) z - rho^2)(z - 1) / ((z - (1-s))(z - rho^2))`` with cancellations done."""
    _check_sigma(sigma)
    w, r2 = 1.0 - sigma, params.rho**2
    if w == 0.0:
        return RationalTF.from_zpk([1.0], [0.0, r2], r2)
    return RationalTF.from_zpk([1.0, r2 / w], [w, r2], -w)


def h_tf(sigma: float, params: SynthesisParams) -> RationalTF:
    """Algorithm transfer function ``eta g / (z + g)`` (gradient to iterate)."""
    g = g_tf(sigma, params)
    h = RationalTF(params.eta * g.num, Z.num * g.den + g.num)
    if not h.is_strictly_proper():
        raise ContractError(f"h(z, {sigma}) is not strictly proper")
    return h


def h_from_hbar(hbar: RationalTF, params: SynthesisParams) -> RationalTF:
    """Inverse loop transformation ``(hbar - 1) / (m hbar - L)``."""
    return RationalTF(hbar.num - hbar.den, params.m * hbar.num - params.L * hbar.den)


def _round_trip_points(seed: int = 0) -> np.ndarray:
    rng = make_rng(seed, 7)
    return ROUND_TRIP_RADIUS * np.exp(2j * np.pi * rng.random(ROUND_TRIP_POINTS))


def hbar_tf(sigma: float, params: SynthesisParams) -> RationalTF:
    """Loop-transformed transfer function ``(z - rho g) / (z + rho g)``.

    The result is checked against :func:`h_tf` through the inverse loop
    transformation on random points of ``|z| = 1.5``.
    """
    g = g_tf(sigma, params)
    rho = params.rho
    zd = Z.num * g.den
    hbar = RationalTF(zd - rho * g.num, zd + rho * g.num)
    z = _round_trip_points()
    hb = hbar(z)
    err = np.max(np.abs((hb - 1.0) / (params.m * hb - params.L) - h_tf(sigma, params)(z)))
    if not err <= ROUND_TRIP_TOL:
        raise ContractError(f"loop-transformation round trip failed at sigma={sigma}: {err:.3e}")
    return hbar


class KTransfer(NamedTuple):
    k0: RationalTF
    k1: RationalTF
    k2: RationalTF

    def h(self) -> RationalTF:
        return self.k2 / (Z * self.k0 - self.k1)


def k_transfer(params: SynthesisParams, sigma: float, eta: Optional[float] = None) -> KTransfer:
    """Scalar ``(k0, k1, k2)`` with ``k0 = 1``, ``k1 = -g``, ``k2 = eta g``.

    ``eta`` defaults to ``2/(L+m)``; the identity ``h = k2 / (z k0 - k1)`` is
    verified pointwise.
    """
    g = g_tf(sigma, params)
    eta = params.eta if eta is None else eta
    k = KTransfer(RationalTF([1.0]), -g, eta * g)
    if eta == params.eta:
        z = _round_trip_points(1)
        err = np.max(np.abs(k.k2(z) / (z * k.k0(z) - k.k1(z)) - h_tf(sigma, params)(z)))
        if not err <= ROUND_TRIP_TOL:
            raise ContractError(f"(k0, k1, k2) do not reproduce h at sigma={sigma}: {err:.3e}")
    return k


def k1_matrix(z: complex, W: np.ndarray, rho: float) -> np.ndarray:
    """Matrix ``K1(z) = (z-1)/(z-rho^2) (zI - W)^{-1} (W z - rho^2 I)``."""
    n = W.shape[0]
    eye = np.eye(n)
    return (z - 1.0) / (z - rho**2) * np.linalg.solve(z * eye - W, W * z - rho**2 * eye)


def gda_transfer(alpha1: float, alpha2: float, sigma: float, incremental: bool = False) -> RationalTF:
    """GDA gradient-to-iterate map ``alpha1 (1 - z) / den(z)``.

    ``den = z^2 - 2z + 1 + a1 a2 s^2`` for simultaneous updates and
    ``z^2 - (2 - a1 a2 s^2) z + 1`` for the incremental (alternating) variant.
    """
    c = alpha1 * alpha2 * sigma**2
    den = [1.0, -(2.0 - c), 1.0] if incremental else [1.0 + c, -2.0, 1.0]
    return RationalTF([alpha1, -alpha1], den)


# verification -------------------------------------------------------------------


class CheckResult(NamedTuple):
    ok: bool
    value: float
    detail: str = ""


def verify_causality(hbar: RationalTF, tol: float = 1e-10) -> CheckResult:
    if hbar.is_zero() or hbar.relative_degree != 0:
        return CheckResult(False, float(hbar.value_at_infinity()), "degree mismatch")
    ratio = hbar.value_at_infinity()
    return CheckResult(abs(ratio - 1.0) <= tol, ratio)


def verify_optimality(hbar: RationalTF, sigma: float, params: SynthesisParams,
                      tol: float = 1e-9) -> CheckResult:
    """Evaluate ``hbar(1)`` after cancellation and compare with 1 or ``L/m``."""
    h = hbar.cancelled()
    target = params.L / params.m if sigma == 0 else 1.0
    den1 = float(np.polynomial.polynomial.polyval(1.0, h.den.coef))
    if abs(den1) <= 1e-12 * np.sum(np.abs(h.den.coef)):
        return CheckResult(False, np.inf, "uncancelled pole at z = 1")
    value = float(h(1.0).real)
    return CheckResult(abs(value - target) <= tol * max(1.0, abs(target)), value,
                       f"target {target:.17g}")


@dataclass(frozen=True, eq=False)
class SPRResult:
    ok: bool
    min_re: float
    max_pole: float
    poles_ok: bool
    gammas: np.ndarray
    min_re_by_gamma: np.ndarray


def default_gamma_grid(rho: float, n: int = 33) -> np.ndarray:
    lo = rho * (1.0 + 1e-6) if rho > 0 else 1e-6
    return np.geomspace(lo, 1.0, n)


def verify_spr(hbar: RationalTF, gamma_grid, theta_grid=1024, tol: float = 1e-9) -> SPRResult:
    """Grid check of ``hbar(gamma z)`` being strictly positive real for each ``gamma``.

    Checking ``|z| = 1`` suffices: the real part is harmonic outside the disk
    and tends to ``hbar(inf) = 1`` at infinity.
    """
    gammas = np.sort(np.atleast_1d(np.asarray(gamma_grid, dtype=float)))
    if gammas.size == 0:
        raise ParameterError("empty gamma grid")
    n_theta = int(theta_grid) if np.isscalar(theta_grid) else len(theta_grid)
    theta = (np.linspace(0.0, 2 * np.pi, n_theta, endpoint=False)
             if np.isscalar(theta_grid) else np.asarray(theta_grid, dtype=float))
    poles = hbar.poles()
    max_pole = float(np.max(np.abs(poles))) if poles.size else 0.0
    poles_ok = max_pole <= gammas[0] + tol
    z = gammas[:, None] * np.exp(1j * theta)[None, :]
    re = np.real(hbar(z))
    by_gamma = re.min(axis=1)
    min_re = float(by_gamma.min())
    return SPRResult(poles_ok and min_re >= -tol, min_re, max_pole, poles_ok, gammas, by_gamma)


def closed_loop_radius(lam: float, sigma: float, params: SynthesisParams) -> float:
    """Spectral radius of the scalar loop with the gradient replaced by ``lam x``."""
    h = h_tf(sigma, params)
    char = h.den - lam * h.num
    roots = poly_roots(char)
    return float(np.max(np.abs(roots))) if roots.size else 0.0


# certificate ---------------------------------------------------------------------


@dataclass(frozen=True)
class Grids:
    n_gamma: int = 33
    n_sigma: int = 65
    n_theta: int = 1024
    n_lambda: int = 33

    def sigma_values(self, sigma_l: float, sigma_u: float) -> np.ndarray:
        k = max(self.n_sigma - 2, 1)
        interior = np.geomspace(sigma_l, sigma_u, k) if k > 1 else np.array([sigma_l])
        return np.unique(np.concatenate([[0.0], interior, [1.0]]))

    def lambda_values(self, m: float, L: float) -> np.ndarray:
        return np.linspace(m, L, max(self.n_lambda, 2))


@dataclass(frozen=True, eq=False)
class Certificate:
    causality_ok: bool
    optimality_ok: bool
    spr_ok: bool
    poles_ok: bool
    closed_loop_ok: bool
    min_re: float
    min_re_interior: float
    max_pole: float
    max_radius: float
    rho_syn: float
    params: SynthesisParams
    grids: Grids
    diagnosis: object = None
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (self.causality_ok and self.optimality_ok and self.spr_ok and self.poles_ok
                and self.closed_loop_ok)

    def to_dict(self) -> dict:
        p = self.params
        return {
            "causality": bool(self.causality_ok),
            "optimality": bool(self.optimality_ok),
            "spr": {"ok": bool(self.spr_ok), "min_re": self.min_re,
                    "min_re_interior": self.min_re_interior,
                    "max_pole": self.max_pole, "poles_ok": bool(self.poles_ok)},
            "closed_loop": {"ok": bool(self.closed_loop_ok), "max_radius": self.max_radius,
                            "rho_syn": self.rho_syn},
            "grids": {"gamma": self.grids.n_gamma, "sigma": self.grids.n_sigma,
                      "theta": self.grids.n_theta, "lambda": self.grids.n_lambda},
            "params": {"m": p.m, "L": p.L, "sigma_min": p.sigma_l, "sigma_max": p.sigma_u,
                       "rho": p.rho, "eta": p.eta},
            "rate_condition": getattr(self.diagnosis, "status", None),
            "passed": bool(self.passed),
            "failures": list(self.failures),
        }


def _certify_sigma(sigma, params, gammas, grids, lambdas):
    hbar = hbar_tf(sigma, params)
    caus = verify_causality(hbar)
    opt = verify_optimality(hbar, sigma, params)
    spr = verify_spr(hbar, gammas, grids.n_theta)
    radius = max(closed_loop_radius(lam, sigma, params) for lam in lambdas)
    return sigma, caus, opt, spr, radius


def certify(params: SynthesisParams, spectral=None, grids: Optional[Grids] = None,
            workers: int = 1, tol: float = 1e-9) -> Certificate:
    """Run every design-condition check over the (gamma, sigma, lambda) grids.

    Raises :class:`RateConditionError` when the constraint spectrum falls
    outside ``(2/(kappa_f+1), 1]``.
    """
    grids = grids or Grids()
    if spectral is not None:
        params = SynthesisParams(params.m, params.L, spectral.sigma_min, spectral.sigma_max)
    if params.sigma_l is None:
        raise ParameterError("certify needs sigma_min and sigma_max")
    if params.kappa_f == 1.0:
        raise UnsupportedError("kappa_f = 1 makes the loop transformation singular; nothing to certify")
    diag = check_rate_condition(params, params.profile)
    if not diag.admissible:
        raise RateConditionError(diag.describe(), diag)
    if params.sigma_u > 1.0:
        # admissible overshoot is pure rounding
        params = SynthesisParams(params.m, params.L, min(params.sigma_l, 1.0), 1.0)
    rho = params.rho
    gammas = default_gamma_grid(rho, grids.n_gamma)
    sigmas = grids.sigma_values(params.sigma_l, params.sigma_u)
    lambdas = grids.lambda_values(params.m, params.L)
    args = [(s, params, gammas, grids, lambdas) for s in sigmas]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(lambda a: _certify_sigma(*a), args))
    else:
        results = [_certify_sigma(*a) for a in args]

    failures = []
    caus_ok = opt_ok = spr_ok = poles_ok = True
    min_re = min_re_int = np.inf
    max_pole = max_radius = 0.0
    for sigma, caus, opt, spr, radius in results:
        if not caus.ok:
            caus_ok = False
            failures.append(f"causality at sigma={sigma:.6g}: {caus.value}")
        if not opt.ok:
            opt_ok = False
            failures.append(f"optimality at sigma={sigma:.6g}: {opt.value} ({opt.detail})")
        if not spr.ok:
            spr_ok = False
            failures.append(f"spr at sigma={sigma:.6g}: min Re {spr.min_re:.3e}")
        min_re = min(min_re, spr.min_re)
        min_re_int = min(min_re_int, float(spr.min_re_by_gamma[1:].min()) if len(gammas) > 1
                         else spr.min_re)
        max_pole = max(max_pole, spr.max_pole)
        max_radius = max(max_radius, radius)
    if max_pole > rho + tol:
        poles_ok = False
        failures.append(f"pole modulus {max_pole:.17g} exceeds rho {rho:.17g}")
    corners = [(lam, s) for lam in (params.m, params.L)
               for s in (0.0, params.sigma_l, params.sigma_u, 1.0)]
    max_radius = max(max_radius, *(closed_loop_radius(lam, s, params) for lam, s in corners))
    cl_ok = max_radius <= rho_syn(params.kappa_f) + tol
    if not cl_ok:
        failures.append(f"closed-loop radius {max_radius:.17g} exceeds rho_syn")
    return Certificate(caus_ok, opt_ok, spr_ok, poles_ok, cl_ok, float(min_re), float(min_re_int),
                       float(max_pole), float(max_radius), rho_syn(params.kappa_f), params, grids,
                       diag, failures)
