"""Closed-form radial quantities: balls, Dirichlet-Neumann shells, Steklov spectrum.

All functions are pure and take plain value objects.  Lengths are in
arbitrary consistent units; a torsion in dimension ``d`` scales like
``length**(d + 2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Union

import numpy as np

RESONANCE_RTOL = 1e-9


class ResonanceError(ValueError):
    """The Robin torsion problem is ill-posed at this parameter."""


@dataclass(frozen=True)
class DimensionalConstants:
    d: int
    sphere_area: float
    ball_volume: float


@dataclass(frozen=True)
class BallGeometry:
    d: int
    R: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"invalid dimension d={self.d}")
        if not self.R > 0:
            raise ValueError(f"ball radius must be positive, got {self.R}")


@dataclass(frozen=True)
class ShellGeometry:
    """Spherical shell ``B_R2 minus closure(B_R1)``, Dirichlet outside, Neumann inside."""

    d: int
    R1: float
    R2: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"shell needs d >= 2, got d={self.d}")
        if not self.R2 > 0:
            raise ValueError(f"outer radius must be positive, got {self.R2}")
        if not 0 <= self.R1 < self.R2:
            raise ValueError(
                f"degenerate shell: need 0 <= R1 < R2, got R1={self.R1}, R2={self.R2}"
            )

    @property
    def t(self) -> float:
        return self.R1 / self.R2

    @property
    def volume(self) -> float:
        fill = -math.expm1(self.d * math.log(self.t)) if self.R1 > 0 else 1.0
        return dimensional_constants(self.d).ball_volume * self.R2**self.d * fill

    @property
    def outer_area(self) -> float:
        return dimensional_constants(self.d).sphere_area * self.R2 ** (self.d - 1)


@dataclass(frozen=True)
class RobinParameter:
    """Robin coefficient together with its resonance status on a given ball."""

    alpha: float
    resonance_flag: bool = False

    @classmethod
    def on_ball(cls, alpha: float, ball: BallGeometry, rtol: float = RESONANCE_RTOL):
        return cls(float(alpha), is_resonant(ball, alpha, rtol))


Domain = Union[BallGeometry, ShellGeometry]


def _alpha_value(alpha) -> float:
    return float(alpha.alpha if isinstance(alpha, RobinParameter) else alpha)


@lru_cache(maxsize=None)
def dimensional_constants(d: int) -> DimensionalConstants:
    """Surface area of the unit sphere S^{d-1} and volume of the unit ball."""
    if int(d) != d or d < 1:
        raise ValueError(f"invalid dimension d={d}")
    d = int(d)
    sphere = 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)
    ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    return DimensionalConstants(d, sphere, ball)


def is_resonant(ball: BallGeometry, alpha, rtol: float = RESONANCE_RTOL) -> bool:
    """True when ``-alpha`` lies within ``rtol`` of a ball Steklov eigenvalue k/R."""
    a = _alpha_value(alpha)
    if a >= 0:
        return a == 0
    k = round(-a * ball.R)
    return abs(-a * ball.R - k) <= rtol * max(1.0, abs(a * ball.R))


def robin_torsion_ball(ball: BallGeometry, alpha) -> float:
    """Robin torsional rigidity of a ball, ``|S^{d-1}| (R^{d+2}/(d^2(d+2)) + R^{d+1}/(alpha d^2))``.

    The value is returned for every nonzero ``alpha``; use :func:`is_resonant`
    to detect parameters where the boundary value problem itself is ill-posed.
    """
    a = _alpha_value(alpha)
    if a == 0:
        raise ValueError("alpha = 0 is the Neumann problem, which has no solution")
    d, R = ball.d, ball.R
    s = dimensional_constants(d).sphere_area
    # factored form keeps the zero at alpha = -(d+2)/R exact
    return s * R ** (d + 1) / d**2 * (R / (d + 2) + 1.0 / a)


def dirichlet_torsion_ball(ball: BallGeometry) -> float:
    d, R = ball.d, ball.R
    return dimensional_constants(d).sphere_area * R ** (d + 2) / (d**2 * (d + 2))


def critical_alpha(ball: BallGeometry) -> float:
    """Robin parameter at which the torsional rigidity of the ball vanishes."""
    return -(ball.d + 2) / ball.R


def steklov_ball(ball: BallGeometry, k: int) -> float:
    if k < 0:
        raise ValueError(f"invalid Steklov index k={k}")
    return k / ball.R


# --- Dirichlet-Neumann shell -------------------------------------------------


def _planar_bracket(t: float) -> float:
    """``1 - 4t^2 + 3t^4 - 4t^4 log t``, normalised shell torsion in d=2."""
    if t == 0.0:
        return 1.0
    a = (1.0 - t) * (1.0 + t)
    if a > 0.5:
        return 1.0 - 4.0 * t * t + 3.0 * t**4 - 4.0 * t**4 * math.log(t)
    # positive series in a = 1 - t^2, free of cancellation near t = 1
    total = 0.0
    term = a * a * a
    n = 3
    while True:
        inc = 4.0 * term / (n * (n - 1) * (n - 2))
        total += inc
        if inc <= 1e-18 * total:
            return total
        n += 1
        term *= a


@lru_cache(maxsize=None)
def _power_bracket_coeffs(d: int) -> tuple[float, ...]:
    """Coefficients in ``delta = 1 - t`` of the normalised d >= 3 shell torsion."""
    terms = {
        0: Fraction(1, d * d * (d + 2)),
        d + 2: Fraction(1, d * d - 4),
        d: Fraction(-1, d * d),
        2 * d: Fraction(-1, d * d * (d - 2)),
    }
    coeffs = [Fraction(0)] * (2 * d + 1)
    for power, c in terms.items():
        for k in range(power + 1):
            coeffs[k] += c * math.comb(power, k) * (-1) ** k
    # the constant, linear and quadratic coefficients cancel exactly
    assert coeffs[0] == coeffs[1] == coeffs[2] == 0
    return tuple(float(c) for c in coeffs)


def _power_bracket(d: int, t: float) -> float:
    """``1/(d^2(d+2)) + t^{d+2}/(d^2-4) - t^d/d^2 - t^{2d}/(d^2(d-2))``."""
    delta = 1.0 - t
    if delta < 1.0 / (4 * d):
        return float(np.polynomial.polynomial.polyval(delta, _power_bracket_coeffs(d)))
    return (
        1.0 / (d * d * (d + 2))
        + t ** (d + 2) / (d * d - 4)
        - t**d / (d * d)
        - t ** (2 * d) / (d * d * (d - 2))
    )


def dn_torsion_shell(shell: ShellGeometry) -> float:
    """Torsional rigidity of a shell with Dirichlet data outside and Neumann inside."""
    d, R2, t = shell.d, shell.R2, shell.t
    if d == 2:
        return math.pi / 8.0 * R2**4 * _planar_bracket(t)
    return dimensional_constants(d).sphere_area * R2 ** (d + 2) * _power_bracket(d, t)


# --- radial profiles ---------------------------------------------------------


def radial_solution(domain: Domain, alpha=None, r: float = 0.0) -> float:
    """Value of the radial torsion function at distance ``r`` from the centre."""
    if isinstance(domain, BallGeometry):
        if alpha is None:
            raise ValueError("ball profile needs a Robin parameter")
        a = _alpha_value(alpha)
        if a == 0:
            raise ValueError("alpha = 0 is the Neumann problem, which has no solution")
        d, R = domain.d, domain.R
        if not 0 <= r <= R:
            raise ValueError(f"r={r} outside [0, {R}]")
        return (R * R - r * r) / (2 * d) + R / (a * d)
    d, R1, R2 = domain.d, domain.R1, domain.R2
    if not R1 <= r <= R2:
        raise ValueError(f"r={r} outside [{R1}, {R2}]")
    if d == 2:
        log_term = 0.5 * R1 * R1 * math.log(r / R2) if R1 > 0 else 0.0
        return (R2 * R2 - r * r) / 4.0 + log_term
    return (R2 * R2 - r * r) / (2 * d) + R1**d / ((d - 2) * d) * (
        R2 ** (2 - d) - r ** (2 - d)
    )


def radial_derivative(domain: ShellGeometry, r: float) -> float:
    """Radial derivative of the shell torsion function."""
    d, R1 = domain.d, domain.R1
    return -r / d + R1**d / d * r ** (1 - d)


def plateau_value(shell: ShellGeometry) -> float:
    """Maximum of the shell torsion function, attained on the inner sphere."""
    return radial_solution(shell, r=shell.R1)


def ball_sign_class(ball: BallGeometry, alpha) -> str:
    """Sign of the ball torsion function on the open ball.

    Returns ``"all-positive"``, ``"all-negative"`` or ``"sign-changing"``.  The
    centre value ``R/d (R/2 + 1/alpha)`` vanishes at ``alpha = -2/R``, which is
    classed as all-negative (nonpositive, zero only at the centre).
    """
    a = _alpha_value(alpha)
    if a == 0:
        raise ValueError("alpha = 0 is the Neumann problem, which has no solution")
    if a > 0:
        return "all-positive"
    if a < -2.0 / ball.R:
        return "sign-changing"
    return "all-negative"
