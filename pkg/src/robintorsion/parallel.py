"""Parallel-coordinates lower bound for the Dirichlet torsion of a convex polygon.

The trial function is the matched-shell torsion profile transplanted onto the
distance to the boundary: ``psi(x) = phi(R2 - rho(x))`` up to ``rho = R2 - R1``
and the plateau value beyond.  Its integrals reduce, by the coarea formula and
``|grad rho| = 1``, to one-dimensional integrals against the perimeter of the
inner parallel bodies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ConvexPolygon, GeometricSummary, GeometryError, ParallelProfile
from .quadrature import integrate
from .radial import ShellGeometry, dn_torsion_shell


@dataclass(frozen=True)
class MatchedShell:
    """Annulus with the polygon's area and an outer circle of the polygon's perimeter."""

    shell: ShellGeometry
    area: float
    perimeter: float


def matched_shell(summary: GeometricSummary) -> MatchedShell:
    deficit = summary.perimeter**2 - 4.0 * math.pi * summary.area
    if deficit < -1e-12 * summary.perimeter**2:
        raise GeometryError(f"negative isoperimetric deficit {deficit!r}")
    R2 = summary.perimeter / (2.0 * math.pi)
    R1 = math.sqrt(max(deficit, 0.0)) / (2.0 * math.pi)
    return MatchedShell(ShellGeometry(2, R1, R2), summary.area, summary.perimeter)


def _polygon_shell(poly: ConvexPolygon) -> MatchedShell:
    area, perimeter = poly.area, poly.perimeter
    return matched_shell(GeometricSummary(area, perimeter, math.nan, (area, perimeter / 2, math.pi)))


@dataclass(frozen=True)
class TrialProfile:
    """Planar shell profile ``phi`` and its transplant ``f(s) = phi(R2 - s)``."""

    shell: ShellGeometry

    @property
    def R1(self) -> float:
        return self.shell.R1

    @property
    def R2(self) -> float:
        return self.shell.R2

    @property
    def cap(self) -> float:
        """Distance from the boundary at which the plateau starts."""
        return self.R2 - self.R1

    @property
    def u_max(self) -> float:
        return float(self.phi(self.R1))

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        R1, R2 = self.R1, self.R2
        out = (R2 * R2 - r * r) / 4.0
        if R1 > 0:
            out = out + 0.5 * R1 * R1 * np.log(r / R2)
        return out

    def dphi(self, r):
        r = np.asarray(r, dtype=float)
        return -r / 2.0 + (0.5 * self.R1 * self.R1 / r if self.R1 > 0 else 0.0)

    def f(self, s):
        """Trial function as a function of the distance ``s`` to the boundary."""
        s = np.minimum(np.asarray(s, dtype=float), self.cap)
        return self.phi(self.R2 - s)

    def df(self, s):
        s = np.asarray(s, dtype=float)
        return np.where(s < self.cap, -self.dphi(self.R2 - np.minimum(s, self.cap)), 0.0)

    def distance_of_level(self, level, iterations: int = 200):
        """Inverse of ``f`` on ``[0, cap]`` by vectorised bisection."""
        level = np.asarray(level, dtype=float)
        lo = np.zeros_like(level)
        hi = np.full_like(level, self.cap)
        stop = 1e-13 * max(self.cap, 1e-300)
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            below = self.f(mid) < level
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= stop):
                break
        return 0.5 * (lo + hi)


def trial_profile(shell: MatchedShell | ShellGeometry) -> TrialProfile:
    s = shell.shell if isinstance(shell, MatchedShell) else shell
    if s.d != 2:
        raise ValueError("the parallel-coordinates profile is planar")
    return TrialProfile(s)


def shell_integrals(profile: TrialProfile) -> tuple[float, float]:
    """``int_A u`` and ``int_A |grad u|^2`` over the annulus by radial quadrature."""
    R1, R2 = profile.R1, profile.R2
    scale = profile.u_max * math.pi * R2 * R2
    mass = integrate(lambda r: profile.phi(r) * 2 * math.pi * r, R1, R2, atol=1e-14 * scale)
    energy = integrate(
        lambda r: profile.dphi(r) ** 2 * 2 * math.pi * r, R1, R2, atol=1e-14 * scale
    )
    return mass, energy


@dataclass(frozen=True)
class LowerBoundReport:
    integral: float
    energy: float
    bound: float
    tau_dn: float
    psi_max: float
    u_max: float
    inradius: float
    shell: ShellGeometry

    @property
    def margin(self) -> float:
        return self.bound - self.tau_dn


def _trial_integrals(poly: ConvexPolygon, profile: TrialProfile, sweep: ParallelProfile):
    r = sweep.inradius
    cut = min(r, profile.cap)
    breaks = [*sweep.events, profile.cap]
    atol = 1e-11 * poly.area * profile.u_max
    integral = integrate(
        lambda s: profile.f(s) * sweep.perimeter(np.minimum(s, r)),
        0.0,
        r,
        breakpoints=breaks,
        atol=atol,
        rtol=1e-13,
    )
    energy = integrate(
        lambda s: profile.df(s) ** 2 * sweep.perimeter(np.minimum(s, r)),
        0.0,
        cut,
        breakpoints=breaks,
        atol=atol,
        rtol=1e-13,
    )
    return integral, energy


def dirichlet_lower_bound(poly: ConvexPolygon, rtol: float = 1e-8) -> LowerBoundReport:
    """Rayleigh quotient of the parallel-coordinates trial function.

    The bound ``(int psi)^2 / int |grad psi|^2`` is a lower bound for the
    Dirichlet torsion of the polygon and, for convex input, is itself at least
    the Dirichlet-Neumann torsion of the matched annulus.
    """
    sweep = ParallelProfile(poly)
    ms = _polygon_shell(poly)
    profile = trial_profile(ms)
    integral, energy = _trial_integrals(poly, profile, sweep)
    tau_dn = dn_torsion_shell(ms.shell)
    bound = integral * integral / energy
    report = LowerBoundReport(
        integral=integral,
        energy=energy,
        bound=bound,
        tau_dn=tau_dn,
        psi_max=float(profile.f(sweep.inradius)),
        u_max=profile.u_max,
        inradius=sweep.inradius,
        shell=ms.shell,
    )
    if bound < tau_dn * (1 - rtol):
        raise GeometryError(
            f"parallel-coordinates bound {bound!r} below shell torsion {tau_dn!r}"
        )
    return report


@dataclass(frozen=True)
class MeasureProfiles:
    level: np.ndarray
    mu: np.ndarray
    eta: np.ndarray
    ball_measure: np.ndarray
    perimeter_superlevel: np.ndarray
    perimeter_ball: np.ndarray

    @property
    def dominated(self) -> bool:
        return bool(np.all(self.mu >= self.eta * (1 - 1e-12) - 1e-15))


def measure_profiles(poly: ConvexPolygon, grid) -> MeasureProfiles:
    """Distribution functions of the trial function and of the shell solution.

    ``mu(s)`` is the area where the trial function exceeds ``s``; ``eta(s)`` is
    the area of the annulus where the shell solution exceeds ``s``.  The
    superlevel set of the shell solution together with the inner disk is
    returned as ``ball_measure``.
    """
    sweep = ParallelProfile(poly)
    profile = trial_profile(_polygon_shell(poly))
    psi_max = float(profile.f(sweep.inradius))
    level = np.asarray(grid, dtype=float)
    if np.any(level < 0) or np.any(level >= psi_max):
        raise ValueError(f"levels must lie in [0, psi_max={psi_max})")
    rho = profile.distance_of_level(level)
    rho = np.where(level == 0, 0.0, rho)
    radius = profile.R2 - rho
    mu = sweep.area(np.minimum(rho, sweep.inradius))
    ball = math.pi * radius**2
    eta = ball - math.pi * profile.R1**2
    return MeasureProfiles(
        level=level,
        mu=mu,
        eta=eta,
        ball_measure=ball,
        perimeter_superlevel=sweep.perimeter(np.minimum(rho, sweep.inradius)),
        perimeter_ball=2 * math.pi * radius,
    )


@dataclass(frozen=True)
class EnergyComparison:
    energy_trial: float
    energy_shell: float
    integral_trial: float
    integral_shell: float
    perimeters_ordered: bool

    @property
    def energy_margin(self) -> float:
        return self.energy_shell - self.energy_trial

    @property
    def integral_margin(self) -> float:
        return self.integral_trial - self.integral_shell


def energy_comparison(poly: ConvexPolygon, levels: int = 64) -> EnergyComparison:
    """Compare the trial-function integrals with those of the shell solution."""
    sweep = ParallelProfile(poly)
    profile = trial_profile(_polygon_shell(poly))
    integral, energy = _trial_integrals(poly, profile, sweep)
    mass, shell_energy = shell_integrals(profile)
    psi_max = float(profile.f(sweep.inradius))
    grid = np.linspace(0.0, psi_max, levels, endpoint=False)
    m = measure_profiles(poly, grid)
    scale = m.perimeter_ball[0]
    ordered = bool(np.all(m.perimeter_superlevel <= m.perimeter_ball + 1e-12 * scale))
    return EnergyComparison(energy, shell_energy, integral, mass, ordered)
