"""Real-coefficient polynomials and rational transfer functions in ``z``.

Polynomials are :class:`numpy.polynomial.Polynomial` objects (ascending
coefficients).  :class:`RationalTF` keeps a numerator/denominator pair with a
monic denominator and no common roots.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import Polynomial
from scipy.signal import lfilter

from .errors import ContractError

TRIM_TOL = 1e-14
CANCEL_TOL = 1e-9

__all__ = [
    "Polynomial",
    "RationalTF",
    "as_poly",
    "poly_roots",
    "trim",
    "Z",
]


def as_poly(p) -> Polynomial:
    if isinstance(p, Polynomial):
        return trim(p)
    coef = np.atleast_1d(np.asarray(p, dtype=float))
    return trim(Polynomial(coef))


def trim(p: Polynomial, tol: float = TRIM_TOL) -> Polynomial:
    """Drop leading coefficients with ``|c| <= tol * max|c|``."""
    c = np.asarray(p.coef, dtype=float)
    scale = np.max(np.abs(c)) if c.size else 0.0
    if scale == 0.0:
        return Polynomial([0.0])
    keep = np.nonzero(np.abs(c) > tol * scale)[0]
    return Polynomial(c[: keep[-1] + 1].copy())


def _is_zero(p: Polynomial) -> bool:
    return not np.any(p.coef)


def poly_roots(p: Polynomial) -> np.ndarray:
    """Roots of ``p``: closed form up to degree 2, companion eigenvalues above."""
    c = np.asarray(trim(p).coef, dtype=float)
    deg = c.size - 1
    if deg <= 0:
        return np.empty(0, dtype=complex)
    if deg == 1:
        return np.array([-c[0] / c[1]], dtype=complex)
    if deg == 2:
        cc, b, a = c
        disc = b * b - 4.0 * a * cc
        if disc >= 0.0:
            q = -0.5 * (b + np.copysign(np.sqrt(disc), b))
            if q == 0.0:
                return np.zeros(2, dtype=complex)
            return np.array([q / a, cc / q], dtype=complex)
        re = -b / (2.0 * a)
        im = np.sqrt(-disc) / (2.0 * abs(a))
        return np.array([re + 1j * im, re - 1j * im])
    comp = np.polynomial.polynomial.polycompanion(c)
    return np.linalg.eigvals(comp).astype(complex)


def _deflate(p: Polynomial, r: complex, tol: float) -> Polynomial:
    if abs(r.imag) > tol:
        factor = Polynomial([abs(r) ** 2, -2.0 * r.real, 1.0])
    else:
        factor = Polynomial([-r.real, 1.0])
    quo, _ = divmod(p, factor)
    return trim(quo)


def _cancel(num: Polynomial, den: Polynomial, tol: float):
    # greedy pairing: remove the closest (zero, pole) pair until none is within tol
    while num.degree() > 0 and den.degree() > 0:
        zr = poly_roots(num)
        pr = poly_roots(den)
        dist = np.abs(zr[:, None] - pr[None, :])
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        if dist[i, j] > tol:
            break
        r = 0.5 * (zr[i] + pr[j])
        num = _deflate(num, r, tol)
        den = _deflate(den, r, tol)
    return num, den


class RationalTF:
    """Scalar rational function ``num(z) / den(z)`` with real coefficients.

    On construction common roots (paired within ``tol``) are cancelled and
    the denominator is scaled to be monic.  Instances are immutable.
    """

    __slots__ = ("_num", "_den")

    def __init__(self, num, den=1.0, *, cancel: bool = True, tol: float = CANCEL_TOL):
        num = as_poly(num)
        den = as_poly(den)
        if _is_zero(den):
            raise ContractError("rational function with zero denominator")
        if _is_zero(num):
            num, den = Polynomial([0.0]), Polynomial([1.0])
        elif cancel:
            num, den = _cancel(num, den, tol)
        lead = den.coef[-1]
        object.__setattr__(self, "_num", Polynomial(num.coef / lead))
        object.__setattr__(self, "_den", Polynomial(den.coef / lead))

    def __setattr__(self, name, value):
        raise AttributeError("RationalTF is immutable")

    @classmethod
    def from_zpk(cls, zeros, poles, gain: float, tol: float = CANCEL_TOL) -> "RationalTF":
        """Build from real-or-conjugate root lists; matching roots cancel exactly."""
        zeros = list(np.atleast_1d(np.asarray(zeros, dtype=complex)))
        poles = list(np.atleast_1d(np.asarray(poles, dtype=complex)))
        for zr in list(zeros):
            for k, pr in enumerate(poles):
                if abs(zr - pr) <= tol:
                    zeros.remove(zr)
                    del poles[k]
                    break
        num = Polynomial.fromroots(zeros).coef.real * gain if zeros else np.array([gain])
        den = Polynomial.fromroots(poles).coef.real if poles else np.array([1.0])
        return cls(num, den, cancel=False)

    @property
    def num(self) -> Polynomial:
        return self._num

    @property
    def den(self) -> Polynomial:
        return self._den

    @property
    def relative_degree(self) -> int:
        return self._den.degree() - self._num.degree()

    def is_zero(self) -> bool:
        return _is_zero(self._num)

    def is_proper(self) -> bool:
        return self.relative_degree >= 0

    def is_strictly_proper(self) -> bool:
        return self.is_zero() or self.relative_degree > 0

    def zeros(self) -> np.ndarray:
        return poly_roots(self._num) if not self.is_zero() else np.empty(0, dtype=complex)

    def poles(self) -> np.ndarray:
        return poly_roots(self._den)

    def value_at_infinity(self) -> float:
        if self.is_zero() or self.relative_degree > 0:
            return 0.0
        if self.relative_degree == 0:
            return float(self._num.coef[-1] / self._den.coef[-1])
        return np.inf

    def __call__(self, z):
        z = np.asarray(z)
        n = np.polynomial.polynomial.polyval(z, self._num.coef)
        d = np.polynomial.polynomial.polyval(z, self._den.coef)
        return n / d

    def cancelled(self, tol: float = CANCEL_TOL) -> "RationalTF":
        return RationalTF(self._num, self._den, cancel=True, tol=tol)

    def scaled_argument(self, gamma: float) -> "RationalTF":
        """Return ``z -> self(gamma * z)``."""
        k = np.arange(self._num.coef.size)
        j = np.arange(self._den.coef.size)
        return RationalTF(self._num.coef * gamma**k, self._den.coef * gamma**j, cancel=False)

    def impulse_response(self, n_steps: int) -> np.ndarray:
        """First ``n_steps`` coefficients ``h_k`` of ``sum_k h_k z^{-k}``."""
        if not self.is_proper():
            raise ContractError("impulse response requires a proper transfer function")
        deg = self._den.degree()
        b = np.zeros(deg + 1)
        b[deg - self._num.degree():] = self._num.coef[::-1]
        a = self._den.coef[::-1]
        u = np.zeros(n_steps)
        u[0] = 1.0
        return lfilter(b, a, u)

    # arithmetic -----------------------------------------------------------

    @staticmethod
    def _coerce(other) -> "RationalTF":
        if isinstance(other, RationalTF):
            return other
        if np.isscalar(other):
            return RationalTF([float(other)])
        return NotImplemented

    def __neg__(self):
        return RationalTF(-self._num.coef, self._den, cancel=False)

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return RationalTF(self._num * other._den + other._num * self._den, self._den * other._den)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return RationalTF(self._num * other._num, self._den * other._den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if other.is_zero():
            raise ZeroDivisionError("division by the zero transfer function")
        return RationalTF(self._num * other._den, self._den * other._num)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __repr__(self):
        return f"RationalTF(num={self._num.coef.tolist()}, den={self._den.coef.tolist()})"

    def to_dict(self) -> dict:
        return {"num": self._num.coef.tolist(), "den": self._den.coef.tolist()}


Z = RationalTF([0.0, 1.0])
