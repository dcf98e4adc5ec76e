"""Experiment orchestration: domain families, verification sweeps and suites.

Every sweep returns flat records whose status uses three states.  A margin
that the theory predicts to be nonnegative is ``pass`` when it exceeds its
error budget, ``indeterminate`` when it lies within the budget and ``fail``
only below ``-budget``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import fem
from .geometry import (
    ConvexPolygon,
    GeometryError,
    ParallelProfile,
    convex_hull,
    coarea_area,
    inequality_checks,
    regular_polygon,
    steiner_outer_check,
    summarize,
)
from .parallel import dirichlet_lower_bound
from .radial import BallGeometry, robin_torsion_ball
from .thresholds import (
    BOUNDS,
    certified_minimum,
    sign_pattern,
    threshold,
)

THREADS_ENV = "ROBINTORSION_THREADS"
FAMILIES = ("regular-ngon", "random-convex", "stretched-hexagon", "mixed")
CONSTRAINTS = ("perimeter", "volume")
STATUSES = ("pass", "indeterminate", "fail")
DEFAULT_FRACTIONS = (0.1, 0.3, 0.5, 0.7, 0.9)
ASPECTS = (1.5, 2.0, 3.0, 5.0)
MAX_RETRIES = 20


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def classify(margin: float, budget: float) -> str:
    if margin < -budget:
        return "fail"
    if abs(margin) <= budget:
        return "indeterminate"
    return "pass"


def worst(statuses: Iterable[str]) -> str:
    statuses = list(statuses)
    for s in ("fail", "indeterminate"):
        if s in statuses:
            return s
    return "pass"


def exit_code(statuses: Iterable[str]) -> int:
    return {"pass": 0, "fail": 1, "indeterminate": 2}[worst(statuses)]


@dataclass(frozen=True)
class ExperimentConfig:
    family: str = "random-convex"
    count: int = 20
    seed: int = 0
    constraint: str = "perimeter"
    c: Optional[float] = None
    alpha_fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    window: float = 0.05
    mesh_h: float = 0.25
    levels: int = 3
    tolerance: float = 0.0
    alphas: tuple[float, ...] = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.constraint not in CONSTRAINTS:
            raise ConfigError(f"unknown constraint {self.constraint!r}")
        if self.count < 1:
            raise ConfigError("count must be positive")
        if self.c is not None and not self.c > 0:
            raise ConfigError("normalization constant must be positive")
        if not 0 < self.window < 1:
            raise ConfigError("window must lie in (0, 1)")
        fr = tuple(float(x) for x in self.alpha_fractions)
        if not fr or any(not 0 < x <= 1 - self.window for x in fr):
            raise ConfigError(
                f"alpha fractions must lie in (0, {1 - self.window}] so that "
                "every alpha stays inside the admissible window"
            )
        object.__setattr__(self, "alpha_fractions", tuple(sorted(fr)))
        if not self.mesh_h > 0:
            raise ConfigError("mesh_h must be positive")
        if self.levels < 3:
            raise ConfigError("at least three mesh levels are needed for an error budget")
        if self.tolerance < 0:
            raise ConfigError("tolerance must be nonnegative")
        object.__setattr__(self, "alphas", tuple(sorted(float(a) for a in self.alphas)))

    @property
    def target(self) -> float:
        if self.c is not None:
            return self.c
        return 2 * math.pi if self.constraint == "perimeter" else math.pi

    def ball_radius(self, poly: ConvexPolygon) -> float:
        if self.constraint == "perimeter":
            return poly.perimeter / (2 * math.pi)
        return math.sqrt(poly.area / math.pi)


@dataclass(frozen=True)
class TestDomain:
    __test__ = False

    domain_id: str
    family: str
    polygon: ConvexPolygon


def normalize(poly: ConvexPolygon, constraint: str, c: float) -> ConvexPolygon:
    """Rescale about the centroid so that the perimeter (or area) equals ``c``."""
    v = poly.vertices
    centred = ConvexPolygon(v - v.mean(axis=0))
    if constraint == "perimeter":
        s = c / centred.perimeter
    else:
        s = math.sqrt(c / centred.area)
    return centred.scaled(s)


def _ngon_sizes(count: int) -> list[int]:
    return sorted({int(round(x)) for x in np.linspace(3, 64, count)})


def stretched_hexagon(aspect: float) -> ConvexPolygon:
    h = regular_polygon(6)
    return ConvexPolygon(h.vertices * np.array([aspect, 1.0]))


def random_convex(seed: int, index: int) -> ConvexPolygon:
    """Hull of jittered ellipse points; deterministic in ``(seed, index)``."""
    rng = np.random.default_rng([seed, index])
    for _ in range(MAX_RETRIES):
        m = int(rng.integers(12, 25))
        base = 2 * np.pi * np.arange(m) / m
        theta = base + rng.uniform(-0.35, 0.35, m) * 2 * np.pi / m
        b = rng.uniform(0.35, 1.0)
        radius = 1.0 + rng.uniform(-0.15, 0.15, m)
        pts = np.stack([radius * np.cos(theta), b * radius * np.sin(theta)], axis=1)
        phi = rng.uniform(0, np.pi)
        rot = np.array([[np.cos(phi), -np.sin(phi)], [np.sin(phi), np.cos(phi)]])
        try:
            poly = convex_hull(pts @ rot.T)
        except GeometryError:
            continue
        if len(poly) >= 3:
            return poly
    raise GeometryError(f"random hull degenerate after {MAX_RETRIES} retries")


def generate_domains(config: ExperimentConfig) -> list[TestDomain]:
    """Domains of the configured family, each normalised to the configured constraint."""
    out: list[TestDomain] = []
    fam = config.family
    if fam in ("regular-ngon", "mixed"):
        sizes = _ngon_sizes(config.count) if fam == "regular-ngon" else [4, 6, 16, 64]
        for n in sizes:
            out.append(TestDomain(f"regular-ngon-{n:03d}", "regular-ngon", regular_polygon(n)))
    if fam in ("stretched-hexagon", "mixed"):
        aspects = ASPECTS if fam == "mixed" else ASPECTS[: config.count]
        for a in aspects:
            out.append(
                TestDomain(f"stretched-hexagon-{a:.1f}", "stretched-hexagon", stretched_hexagon(a))
            )
    if fam in ("random-convex", "mixed"):
        for i in range(config.count):
            out.append(
                TestDomain(
                    f"random-convex-{config.seed}-{i:03d}",
                    "random-convex",
                    random_convex(config.seed, i),
                )
            )
    return [
        replace(d, polygon=normalize(d.polygon, config.constraint, config.target)) for d in out
    ]


# --- verification records ------------------------------------------------------


@dataclass(frozen=True)
class VerificationRecord:
    domain_id: str
    family: str
    n_vertices: int
    area: float
    perimeter: float
    inradius: float
    sigma1: float
    sigma1_budget: float
    alpha: float
    tau_alpha: float
    tau_alpha_budget: float
    tau_ball: float
    tau_dirichlet: float
    lemma_margin: float
    theorem_margin: float
    status: str
    tau_dirichlet_budget: float = 0.0
    theorem_status: str = ""
    lemma_status: str = ""

    @property
    def lemma_budget(self) -> float:
        return self.tau_alpha_budget + self.tau_dirichlet_budget

    @property
    def theorem_budget(self) -> float:
        return self.tau_alpha_budget


CSV_COLUMNS = tuple(f.name for f in fields(VerificationRecord))[:16]


@dataclass(frozen=True)
class SkippedSample:
    domain_id: str
    alpha: float
    reason: str


@dataclass
class SweepResult:
    records: list[VerificationRecord] = field(default_factory=list)
    skipped: list[SkippedSample] = field(default_factory=list)

    @property
    def statuses(self) -> list[str]:
        return [r.status for r in self.records] + ["indeterminate"] * len(self.skipped)


def _domain_records(
    domain: TestDomain, config: ExperimentConfig
) -> tuple[list[VerificationRecord], list[SkippedSample]]:
    poly = domain.polygon
    study = fem.study_domain(poly, config.mesh_h, config.levels)
    tau_d = study.tau_dirichlet
    sigma1 = study.sigma1
    ball = BallGeometry(2, config.ball_radius(poly))
    area, perimeter = poly.area, poly.perimeter
    r_in = ParallelProfile(poly).inradius
    records, skipped = [], []
    slack = config.tolerance
    if config.alphas:
        alphas = list(config.alphas)
    else:
        alphas = [-frac * study.safe_sigma1 for frac in config.alpha_fractions]
    for alpha in alphas:
        if not -study.safe_sigma1 < alpha < 0:
            skipped.append(
                SkippedSample(
                    domain.domain_id,
                    alpha,
                    f"outside admissible window (-{study.safe_sigma1:.6g}, 0)",
                )
            )
            continue
        try:
            est = study.robin(alpha)
        except fem.ResonanceError as exc:
            skipped.append(SkippedSample(domain.domain_id, alpha, str(exc)))
            continue
        tau_ball = robin_torsion_ball(ball, alpha)
        theorem_margin = est.extrapolated - tau_ball
        lemma_margin = est.extrapolated - tau_d.extrapolated - area * area / (alpha * perimeter)
        theorem_status = classify(theorem_margin, est.budget + slack)
        lemma_status = classify(lemma_margin, est.budget + tau_d.budget + slack)
        records.append(
            VerificationRecord(
                domain_id=domain.domain_id,
                family=domain.family,
                n_vertices=len(poly),
                area=area,
                perimeter=perimeter,
                inradius=r_in,
                sigma1=sigma1.extrapolated,
                sigma1_budget=sigma1.budget,
                alpha=alpha,
                tau_alpha=est.extrapolated,
                tau_alpha_budget=est.budget,
                tau_ball=tau_ball,
                tau_dirichlet=tau_d.extrapolated,
                lemma_margin=lemma_margin,
                theorem_margin=theorem_margin,
                status=worst([theorem_status, lemma_status]),
                tau_dirichlet_budget=tau_d.budget,
                theorem_status=theorem_status,
                lemma_status=lemma_status,
            )
        )
    return records, skipped


def _run_tasks(fn: Callable, items: Sequence, *args):
    workers = min(worker_count(), max(len(items), 1))
    if workers == 1:
        return [fn(item, *args) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, *[[a] * len(items) for a in args]))


def sweep(config: ExperimentConfig, domains: Optional[Sequence[TestDomain]] = None) -> SweepResult:
    """Theorem and lemma margins for every domain and admissible alpha."""
    domains = list(domains) if domains is not None else generate_domains(config)
    result = SweepResult()
    for records, skipped in _run_tasks(_domain_records, domains, config):
        result.records.extend(records)
        result.skipped.extend(skipped)
    result.records.sort(key=lambda r: (r.domain_id, r.alpha))
    result.skipped.sort(key=lambda s: (s.domain_id, s.alpha))
    return result


def verify_theorem_2d(config: ExperimentConfig, domains=None) -> SweepResult:
    res = sweep(config, domains)
    res.records = [replace(r, status=r.theorem_status) for r in res.records]
    return res


def verify_lemma_core(config: ExperimentConfig, domains=None) -> SweepResult:
    res = sweep(config, domains)
    res.records = [replace(r, status=r.lemma_status) for r in res.records]
    return res


# --- parallel-coordinates suite -------------------------------------------------


@dataclass(frozen=True)
class LowerBoundRecord:
    domain_id: str
    family: str
    n_vertices: int
    area: float
    perimeter: float
    inradius: float
    tau_dn: float
    lower_bound: float
    tau_dirichlet: float
    tau_dirichlet_budget: float
    lower_margin: float
    upper_margin: float
    status: str


LOWERBOUND_COLUMNS = tuple(f.name for f in fields(LowerBoundRecord))


def _lowerbound_record(domain: TestDomain, config: ExperimentConfig) -> LowerBoundRecord:
    poly = domain.polygon
    lb = dirichlet_lower_bound(poly)
    study = fem.study_domain(poly, config.mesh_h, config.levels, count=2)
    tau = study.tau_dirichlet
    lower = lb.bound - lb.tau_dn
    upper = tau.extrapolated - lb.bound
    budget = tau.budget + config.tolerance
    status = worst(
        [
            "pass" if lower >= -1e-8 * lb.tau_dn else "fail",
            classify(upper, budget),
        ]
    )
    return LowerBoundRecord(
        domain.domain_id,
        domain.family,
        len(poly),
        poly.area,
        poly.perimeter,
        lb.inradius,
        lb.tau_dn,
        lb.bound,
        tau.extrapolated,
        tau.budget,
        lower,
        upper,
        status,
    )


def run_parallel_coordinates_suite(
    config: ExperimentConfig, domains: Optional[Sequence[TestDomain]] = None
) -> list[LowerBoundRecord]:
    """Sandwich ``tau_DN <= LB <= tau_D`` for every domain."""
    domains = list(domains) if domains is not None else generate_domains(config)
    out = _run_tasks(_lowerbound_record, domains, config)
    return sorted(out, key=lambda r: r.domain_id)


# --- geometry suite ---------------------------------------------------------------


@dataclass(frozen=True)
class GeometryRecord:
    domain_id: str
    coarea_error: float
    min_rate: float
    isoperimetric_deficit: float
    steiner_error: float
    status: str


def geometry_record(domain: TestDomain, rtol: float = 1e-9) -> GeometryRecord:
    poly = domain.polygon
    coarea = coarea_area(poly)
    err = abs(coarea - poly.area) / poly.area
    prof = ParallelProfile(poly)
    rate = float(min(s.rate for s in prof.segments))
    summ = summarize(poly)
    iso = summ.perimeter**2 - 4 * math.pi * summ.area
    try:
        inequality_checks(summ)
        rho = poly.diameter / 4
        steiner = steiner_outer_check(poly, rho)
        steiner_err = abs(steiner - (poly.area + poly.perimeter * rho + math.pi * rho * rho))
        checks_ok = True
    except GeometryError:
        steiner_err, checks_ok = math.nan, False
    ok = checks_ok and err <= rtol and rate >= 2 * math.pi * (1 - 1e-12)
    return GeometryRecord(
        domain.domain_id, err, rate, iso, steiner_err, "pass" if ok else "fail"
    )


# --- threshold suite ---------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdRecord:
    check: str
    kind: str
    d: int
    value: float
    bound: float
    margin: float
    status: str
    detail: str = ""


THRESHOLD_COLUMNS = tuple(f.name for f in fields(ThresholdRecord))


def run_threshold_suite(
    dims: Sequence[int] = tuple(range(3, 13)),
    grid_size: int = 10_000,
    tol: float = 1e-9,
    cross_tol: float = 1e-12,
) -> list[ThresholdRecord]:
    """Certified minima, lemma-function structure and the d=3 cross-checks."""
    dims = sorted(set(int(d) for d in dims))
    if any(d < 3 or d > 12 for d in dims):
        raise ConfigError("threshold dimensions must lie in 3..12")
    out: list[ThresholdRecord] = []

    def minimum(kind, d):
        cm = certified_minimum(kind, d, grid_size, tol)
        out.append(
            ThresholdRecord(
                "minimum", kind, cm.d, cm.minimum, cm.bound, cm.minimum - cm.bound,
                "pass" if cm.passed else "fail", f"argmin t={cm.argmin:.6g}",
            )
        )

    for kind in ("planar-perimeter", "3d-perimeter", "3d-volume"):
        minimum(kind, None)
    for d in dims:
        minimum("general-perimeter", d)
        minimum("general-volume", d)
    for d in dims:
        for name in ("g", "h", "k", "m", "M"):
            rep = sign_pattern(name, d)
            out.append(
                ThresholdRecord(
                    "structure", name, d, float(len(rep.roots)), math.nan, math.nan,
                    "pass" if rep.structure_ok else "fail",
                    f"pattern {rep.sign_pattern}, {len(rep.critical_points)} critical",
                )
            )
    if 3 in dims:
        t = np.linspace(0.01, 0.99, 99)
        for c in ("perimeter", "volume"):
            a = threshold(f"general-{c}", 3, t)
            b = threshold(f"3d-{c}", 3, t)
            err = float(np.max(np.abs(a - b) / np.abs(b)))
            out.append(
                ThresholdRecord(
                    "cross-check", f"3d-{c}", 3, err, cross_tol, cross_tol - err,
                    "pass" if err <= cross_tol else "fail", "general vs special, relative",
                )
            )
    return out


def bound_for(kind: str) -> float:
    return BOUNDS[kind]


def record_dict(record) -> dict:
    return asdict(record)
