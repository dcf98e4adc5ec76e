"""Smallness thresholds on the Robin parameter and their auxiliary functions.

Every threshold is written as an upper bound on ``-alpha * R`` (the planar one
on ``-2 * alpha * R``, see :func:`alpha_r_bound`) as a function of the shell
ratio ``t = R1 / R2``.  Evaluation runs in 80-bit extended precision; powers
of ``u = 1 - t**d`` go through ``log1p``/``expm1`` and the polynomial parts
that vanish to third order at ``t = 1`` are re-expanded exactly in
``1 - t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .radial import ShellGeometry, dimensional_constants

LD = np.longdouble

KINDS = (
    "planar-perimeter",
    "3d-perimeter",
    "3d-volume",
    "general-perimeter",
    "general-volume",
)

BOUNDS = {
    "planar-perimeter": 4.0,
    "3d-perimeter": 2.0,
    "3d-volume": 1.0,
    "general-perimeter": 2.0,
    "general-volume": 1.0,
}

LEMMA_FUNCTIONS = ("f", "g", "h", "k", "m", "M")


class CertificationError(RuntimeError):
    pass


# --- extended-precision building blocks -------------------------------------


def _as_ld(x) -> np.ndarray:
    return np.asarray(x, dtype=LD)


@lru_cache(maxsize=None)
def _about_one(terms: tuple[tuple[int, Fraction], ...]) -> np.ndarray:
    """Exact coefficients in ``delta = 1 - t`` of ``sum c * t**power``."""
    top = max(p for p, _ in terms)
    coeffs = [Fraction(0)] * (top + 1)
    for power, c in terms:
        for k in range(power + 1):
            coeffs[k] += c * math.comb(power, k) * (-1) ** k
    return np.array([LD(c.numerator) / LD(c.denominator) for c in coeffs], dtype=LD)


def _poly(terms: dict[int, int], t: np.ndarray) -> np.ndarray:
    """Integer-coefficient polynomial, evaluated about ``t = 1`` where that is stabler."""
    key = tuple(sorted((p, Fraction(c)) for p, c in terms.items()))
    top = max(terms)
    delta = LD(1) - t
    near_one = delta < LD(1) / (2 * top)
    direct = sum(LD(c) * t**p for p, c in terms.items())
    if not np.any(near_one):
        return direct
    coeffs = _about_one(key)
    shifted = np.polynomial.polynomial.polyval(delta, coeffs)
    return np.where(near_one, shifted, direct)


def _log_u(d: int, t: np.ndarray) -> np.ndarray:
    """``log(1 - t**d)`` accurate at both ends of (0, 1)."""
    low = t < 0.5
    with np.errstate(divide="ignore", invalid="ignore"):
        from_t = np.log1p(-(t**d))
        u_from_delta = -np.expm1(d * np.log1p(-(LD(1) - t)))
        from_delta = np.log(u_from_delta)
    return np.where(low, from_t, from_delta)


def _u_pow(d: int, t: np.ndarray, p: Fraction) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(LD(p.numerator) / LD(p.denominator) * _log_u(d, t))
    return np.where(t >= 1, LD(0), out)


def _one_minus_u_pow(d: int, t: np.ndarray, p: Fraction) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.expm1(LD(p.numerator) / LD(p.denominator) * _log_u(d, t))
    return np.where(t >= 1, LD(1), out)


# --- auxiliary lemma functions ----------------------------------------------


def _f(d, t):
    return _one_minus_u_pow(d, t, Fraction(d - 1, d))


def _split(t, small, large):
    """``small(t)`` for t < 1/2, ``large(t)`` otherwise."""
    low = t < 0.5
    with np.errstate(all="ignore"):
        return np.where(low, small(np.where(low, t, 0.25)), large(np.where(low, 0.75, t)))


def _g(d, t):
    p = Fraction(d + 2, d)
    return _split(
        t,
        lambda s: (d * d - 4) * s**d + (d + 2) * s ** (2 * d) - d * d * s ** (d + 2)
        - (d - 2) * _one_minus_u_pow(d, s, p),
        lambda s: _poly({d: d * d - 4, 2 * d: d + 2, d + 2: -d * d, 0: -(d - 2)}, s)
        + (d - 2) * _u_pow(d, s, p),
    )


def _h(d, t):
    one_minus_t2 = (LD(1) - t) * (LD(1) + t)
    return (
        d * d * one_minus_t2
        - 2 * d * _u_pow(d, t, Fraction(1))
        - (d - 2) * _u_pow(d, t, Fraction(2, d))
    )


def _volume_numerator(d, t):
    """``(1-t^d)^{1+2/d} - (1-t^d)^{2+1/d}`` without cancellation."""
    return _u_pow(d, t, Fraction(d + 2, d)) * _one_minus_u_pow(d, t, Fraction(d - 1, d))


def _k(d, t):
    return (d * d - 4) * _volume_numerator(d, t) - _g(d, t)


def _m(d, t):
    one_minus_t2 = (LD(1) - t) * (LD(1) + t)
    return (
        (d - 2) * (2 * d + 1) * _u_pow(d, t, Fraction(d + 1, d))
        - (d - 2) * (d + 1) * _u_pow(d, t, Fraction(2, d))
        - d * d * one_minus_t2
        + 2 * d * _u_pow(d, t, Fraction(1))
    )


def _M(d, u):
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(u < 1, np.exp(LD(2) / d * np.log1p(-u)), LD(0))
        b = np.where(u > 0, np.exp(LD(2) / d * np.log(u)), LD(0))
        c = np.where(u > 0, np.exp((LD(1) + LD(1) / d) * np.log(u)), LD(0))
    return d * d * a - (d - 2) * (d + 1) * b + (2 * d * d - 3 * d - 2) * c + 2 * d * u - d * d


def _M_prime(d, u):
    with np.errstate(divide="ignore", invalid="ignore"):
        return (
            -2 * d * np.exp((LD(2) / d - 1) * np.log1p(-u))
            - LD(2 * (d - 2) * (d + 1)) / d * np.exp((LD(2) / d - 1) * np.log(u))
            + LD((2 * d * d - 3 * d - 2) * (d + 1)) / d * np.exp(np.log(u) / d)
            + 2 * d
        )


_LEMMA: dict[str, Callable] = {"f": _f, "g": _g, "h": _h, "k": _k, "m": _m, "M": _M}


def lemma_function(name: str, d: int, x, *, extended: bool = False):
    """Evaluate one of the auxiliary functions f, g, h, k, m (of t) or M (of u)."""
    if name not in _LEMMA:
        raise ValueError(f"unknown lemma function {name!r}")
    if d < 3:
        raise ValueError("lemma functions are defined for d >= 3")
    xa = _as_ld(x)
    if np.any((xa < 0) | (xa > 1)):
        raise ValueError("argument outside [0, 1]")
    out = _LEMMA[name](d, xa)
    if extended:
        return out
    return float(out) if out.ndim == 0 else out.astype(float)


def lemma_derivative_identity(name: str, d: int, t) -> np.ndarray:
    """Right-hand side of ``g' = (d+2) t^{d-1} h`` or ``k' = (d+2) t^{d-1} m``."""
    inner = {"g": _h, "k": _m}[name]
    ta = _as_ld(t)
    return (d + 2) * ta ** (d - 1) * inner(d, ta)


# --- thresholds ---------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdPoint:
    value: float
    is_limit: bool


def _check_kind(kind: str, d: Optional[int]) -> int:
    if kind not in KINDS:
        raise ValueError(f"unknown threshold kind {kind!r}")
    if kind == "planar-perimeter":
        if d not in (None, 2):
            raise ValueError("planar threshold is fixed to d = 2")
        return 2
    if kind.startswith("3d"):
        if d not in (None, 3):
            raise ValueError("3-D thresholds are fixed to d = 3")
        return 3
    if d is None or d < 3:
        raise ValueError("general thresholds need d >= 3")
    return int(d)


def threshold_limits(kind: str, d: Optional[int] = None) -> tuple[float, float]:
    """Limits of the threshold as ``t -> 0+`` and ``t -> 1-``."""
    d = _check_kind(kind, d)
    at_one = {
        "planar-perimeter": 8.0,
        "3d-perimeter": 5.0,
        "3d-volume": 5.0,
        "general-perimeter": float(d + 2),
        "general-volume": float(d + 2),
    }[kind]
    return BOUNDS[kind], at_one


def _threshold_interior(kind: str, d: int, t: np.ndarray) -> np.ndarray:
    if kind == "planar-perimeter":
        # common factor -t^2 removed from ((1-t^2)^2 - 1) / (-t^4 log t/2 + 3t^4/8 - t^2/2)
        with np.errstate(divide="ignore", invalid="ignore"):
            den = LD(0.5) - LD(0.375) * t * t + LD(0.5) * t * t * np.log(t)
        return (2 - t * t) / den
    if kind == "3d-perimeter":
        return 5 * (2 - t**3) / (5 - 9 * t * t + 5 * t**3)
    if kind == "general-perimeter":
        return (d * d - 4) * (2 - t**d) / ((d * d - 4) - d * d * t * t + (d + 2) * t**d)
    if kind == "3d-volume":
        # 5[u^{7/3} - u^{5/3}] / (9t^5 - 5t^6 - 5t^3 + 1 - u^{5/3}), u = 1 - t^3
        num = -5 * _u_pow(3, t, Fraction(5, 3)) * _one_minus_u_pow(3, t, Fraction(2, 3))
        q = Fraction(5, 3)
        den = _split(
            t,
            lambda s: 9 * s**5 - 5 * s**6 - 5 * s**3 + _one_minus_u_pow(3, s, q),
            lambda s: _poly({5: 9, 6: -5, 3: -5, 0: 1}, s) - _u_pow(3, s, q),
        )
        return num / den
    return (d * d - 4) * _volume_numerator(d, t) / _g(d, t)


def threshold(kind: str, d: Optional[int], t, *, extended: bool = False):
    """Threshold value at shell ratio ``t``; endpoint limits are used at 0 and 1.

    For ``"planar-perimeter"`` the value bounds ``-2 alpha R``; for every other
    kind it bounds ``-alpha R``.
    """
    d = _check_kind(kind, d)
    ta = _as_ld(t)
    if np.any((ta < 0) | (ta > 1)):
        raise ValueError("t outside [0, 1]")
    lo, hi = threshold_limits(kind, d)
    inner = np.where((ta > 0) & (ta < 1), ta, LD(0.5))
    with np.errstate(all="ignore"):
        out = _threshold_interior(kind, d, inner)
    out = np.where(ta == 0, LD(lo), np.where(ta == 1, LD(hi), out))
    if not np.all(np.isfinite(out)):
        raise CertificationError(f"{kind} threshold has a vanishing denominator")
    if extended:
        return out
    return float(out) if out.ndim == 0 else out.astype(float)


def evaluate_threshold(kind: str, d: Optional[int], t: float) -> ThresholdPoint:
    return ThresholdPoint(threshold(kind, d, t), t in (0.0, 1.0))


def alpha_r_bound(kind: str, d: Optional[int], t):
    """Threshold expressed as an upper bound on ``-alpha R`` for every kind."""
    value = threshold(kind, d, t)
    return value / 2.0 if kind == "planar-perimeter" else value


def convention_factor(kind: str) -> float:
    """Multiplier on ``-alpha R`` that the raw threshold bounds (2 for the plane)."""
    return 2.0 if kind == "planar-perimeter" else 1.0


@dataclass(frozen=True)
class ThresholdCurve:
    kind: str
    d: int
    t: np.ndarray
    values: np.ndarray

    @property
    def bound(self) -> float:
        return BOUNDS[self.kind]

    def rows(self):
        for t, v in zip(self.t, self.values):
            yield {
                "kind": self.kind,
                "d": self.d,
                "t": float(t),
                "value": float(v),
                "bound": self.bound,
                "margin": float(v) - self.bound,
            }


def certification_grid(nodes: int = 10_000) -> np.ndarray:
    return np.linspace(1e-4, 1 - 1e-4, nodes)


def threshold_curve(kind: str, d: Optional[int], nodes: int = 10_000) -> ThresholdCurve:
    d = _check_kind(kind, d)
    t = np.concatenate([[0.0], certification_grid(nodes), [1.0]])
    return ThresholdCurve(kind, d, t, threshold(kind, d, t))


@dataclass(frozen=True)
class CertifiedMinimum:
    kind: str
    d: int
    minimum: float
    argmin: float
    bound: float
    passed: bool


def certified_minimum(
    kind: str, d: Optional[int] = None, nodes: int = 10_000, tol: float = 1e-9
) -> CertifiedMinimum:
    """Minimum of the threshold over the grid and the endpoint limits."""
    d = _check_kind(kind, d)
    t = np.concatenate([[0.0], certification_grid(nodes), [1.0]])
    values = threshold(kind, d, t, extended=True)
    i = int(np.argmin(values))
    bound = BOUNDS[kind]
    return CertifiedMinimum(
        kind, d, float(values[i]), float(t[i]), bound, bool(np.all(values >= bound - tol))
    )


# --- sign structure of the lemma functions -----------------------------------


@dataclass
class LemmaFunctionReport:
    d: int
    function: str
    boundary_values: tuple[float, float]
    roots: list[float]
    root_brackets: list[tuple[float, float]]
    sign_pattern: str
    critical_points: list[float]
    positive_everywhere: bool
    structure_ok: bool
    detail: str = ""
    extra: dict = field(default_factory=dict)


def scan_nodes(count: int = 4096) -> np.ndarray:
    return np.arange(1, count + 1, dtype=LD) / LD(count + 1)


def _bisect(fn, lo, hi, steps=80):
    flo = fn(lo)
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0:
            return mid, mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return lo, hi


def _sign_changes(fn, x: np.ndarray):
    vals = fn(x)
    s = np.sign(vals)
    nz = s != 0
    xs, ss = x[nz], s[nz]
    brackets = []
    for i in np.nonzero(ss[:-1] != ss[1:])[0]:
        brackets.append(_bisect(fn, LD(xs[i]), LD(xs[i + 1])))
    pattern = "".join("+" if v > 0 else "-" for v in ss[np.r_[True, ss[1:] != ss[:-1]]])
    return vals, brackets, pattern


_DERIVATIVE_SIGN = {
    "g": lambda d, t: _h(d, t),
    "k": lambda d, t: _m(d, t),
    "h": None,
    "m": None,
    "M": _M_prime,
}


def sign_pattern(name: str, d: int, nodes: int = 4096) -> LemmaFunctionReport:
    """Roots and sign pattern on (0, 1) compared with the structure the lemmas need.

    g, k: positive on (0, 1) with a single interior maximum (derivative sign
    ``+-``).  h, m: exactly one interior root, ``+-``.  M: exactly one interior
    root (``-+``) and exactly two critical points.
    """
    if name not in ("g", "h", "k", "m", "M"):
        raise ValueError(f"no sign structure defined for {name!r}")
    fn = lambda x: _LEMMA[name](d, _as_ld(x))  # noqa: E731
    x = scan_nodes(nodes)
    vals, brackets, pattern = _sign_changes(fn, x)
    roots = [float(0.5 * (a + b)) for a, b in brackets]
    ends = fn(_as_ld([0.0, 1.0]))
    positive = bool(np.all(vals > 0))
    critical: list[float] = []
    deriv = _DERIVATIVE_SIGN[name]
    if deriv is not None:
        dfn = lambda y: deriv(d, _as_ld(y))  # noqa: E731
        _, dbr, dpattern = _sign_changes(dfn, x)
        critical = [float(0.5 * (a + b)) for a, b in dbr]
    else:
        dpattern = ""
    if name in ("g", "k"):
        ok = positive and dpattern == "+-" and len(critical) == 1
        detail = f"positive={positive}, derivative pattern {dpattern!r}"
    elif name in ("h", "m"):
        ok = pattern == "+-" and len(roots) == 1
        detail = f"pattern {pattern!r}"
    else:
        ok = pattern == "-+" and len(roots) == 1 and dpattern == "-+-" and len(critical) == 2
        detail = f"pattern {pattern!r}, derivative pattern {dpattern!r}"
    return LemmaFunctionReport(
        d=d,
        function=name,
        boundary_values=(float(ends[0]), float(ends[1])),
        roots=roots,
        root_brackets=[(float(a), float(b)) for a, b in brackets],
        sign_pattern=pattern,
        critical_points=critical,
        positive_everywhere=positive,
        structure_ok=ok,
        detail=detail,
    )


# --- quantitative estimate ----------------------------------------------------


@dataclass(frozen=True)
class GapResult:
    d: int
    constraint: str
    R: float
    lhs: float
    rhs: float
    margin: float
    ok: bool


def _gap_parts(d: int, t: np.ndarray, constraint: str):
    """``lhs`` and ``rhs`` of the quantitative estimate with ``R2 = 1``, extended precision."""
    ball = LD(dimensional_constants(d).ball_volume)
    sphere = LD(dimensional_constants(d).sphere_area)
    td = t**d
    if constraint == "perimeter":
        lhs = sphere * (td / (d * d) + td * td / (d * d * (d - 2)) - t ** (d + 2) / (d * d - 4))
        rhs = LD(0.5) * ball * td * (2 - td) / d
        R = np.ones_like(t)
    elif constraint == "volume":
        lhs = sphere * _g(d, t) / (d * d * (d * d - 4))
        rhs = ball / d * _volume_numerator(d, t)
        R = _u_pow(d, t, Fraction(1, d))
    else:
        raise ValueError(f"unknown constraint {constraint!r}")
    return lhs, rhs, R


def quantitative_gap(
    d: int, shell: ShellGeometry, constraint: str, rtol: float = 1e-10
) -> GapResult:
    """Both sides of the ball-versus-shell torsion gap estimate.

    ``lhs = tau_D(B_R) - tau_DN(shell)`` and
    ``rhs = c R (|B_R|^2/|dB_R| - |shell|^2/|dB_R2|)`` with ``c = 1/2`` for the
    perimeter constraint (``R = R2``) and ``c = 1`` for the volume constraint.
    """
    if d < 3:
        raise ValueError("quantitative gap is stated for d >= 3")
    if shell.d != d:
        raise ValueError("shell dimension mismatch")
    if not shell.R1 > 0:
        raise ValueError("degenerate shell: need R1 > 0")
    t = _as_ld(shell.t)
    lhs, rhs, R = _gap_parts(d, t, constraint)
    scale = LD(shell.R2) ** (d + 2)
    lhs, rhs = float(lhs * scale), float(rhs * scale)
    margin = rhs - lhs
    ok = lhs > 0 and rhs > 0 and margin >= -rtol * rhs
    return GapResult(d, constraint, float(R) * shell.R2, lhs, rhs, margin, ok)


def remark_threshold(d: int, t, constraint: str):
    """``R (gap ratio) / (tau_D(B_R) - tau_DN)``, the normalised form of both conditions."""
    ta = _as_ld(t)
    lhs, rhs, _ = _gap_parts(d, ta, constraint)
    c = LD(0.5) if constraint == "perimeter" else LD(1)
    out = rhs / (c * lhs)
    return float(out) if out.ndim == 0 else out.astype(float)


# --- applicability --------------------------------------------------------------


def matched_radii(d: int, volume: float, perimeter: float) -> tuple[float, float]:
    """Shell with the same volume and outer-sphere area as the given body."""
    c = dimensional_constants(d)
    R2 = (perimeter / c.sphere_area) ** (1.0 / (d - 1))
    inner = R2**d - volume / c.ball_volume
    if inner < -1e-12 * R2**d:
        raise ValueError("isoperimetric inequality violated by the given data")
    return max(inner, 0.0) ** (1.0 / d), R2


@dataclass(frozen=True)
class Certificate:
    d: int
    constraint: str
    alpha: float
    R: float
    t: float
    kind: Optional[str]
    threshold: Optional[float]
    alpha_r: float
    threshold_clause: Optional[bool]
    fallback_clause: Optional[bool]
    sigma_clause: Optional[bool]
    refused: bool

    @property
    def holds(self) -> Optional[bool]:
        """True/False when decidable; None while the Steklov clause is unmeasured."""
        if self.refused:
            return False
        geometric = self.threshold_clause if self.threshold_clause is not None else True
        if not geometric:
            return False
        return self.sigma_clause


def _kind_for(d: int, constraint: str) -> Optional[str]:
    if d == 2:
        return "planar-perimeter" if constraint == "perimeter" else None
    if d == 3:
        return f"3d-{constraint}"
    return f"general-{constraint}"


def applicability_certificate(
    volume: float,
    perimeter: float,
    d: int,
    alpha: float,
    constraint: str,
    sigma1: Optional[float] = None,
) -> Certificate:
    """Check the sufficient conditions under which the ball minimises the torsion.

    ``sigma1`` is the first nonzero Steklov eigenvalue of the body (measured or
    bounded); leave it None to defer that clause.
    """
    if alpha >= 0:
        raise ValueError("the estimate concerns alpha < 0")
    if constraint not in ("perimeter", "volume"):
        raise ValueError(f"unknown constraint {constraint!r}")
    c = dimensional_constants(d)
    R1, R2 = matched_radii(d, volume, perimeter)
    t = R1 / R2
    R = R2 if constraint == "perimeter" else (volume / c.ball_volume) ** (1.0 / d)
    kind = _kind_for(d, constraint)
    alpha_r = -alpha * R
    refused = alpha <= -(d + 2) / R
    if kind is None:
        value, clause, fallback = None, None, None
    else:
        value = threshold(kind, d, t)
        clause = convention_factor(kind) * alpha_r <= value
        fallback = alpha >= (-2.0 / R if constraint == "perimeter" else -1.0 / R)
    sigma_clause = None if sigma1 is None else bool(alpha > -sigma1)
    return Certificate(
        d, constraint, alpha, R, t, kind, value, alpha_r, clause, fallback, sigma_clause, refused
    )
