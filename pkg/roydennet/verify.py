"""
Verification checks
-------------------
Each check measures a quantity on a concrete space and net, assembles the
ceiling from measured constants (degree bound, bump Lipschitz constant, ball
volumes, overlap counts, Poincaré constant) and returns a VerificationReport.

Ceiling checks pass iff the measured worst case stays below the ceiling.
Convergence checks pass iff the curve is dominated pointwise by its bound.
Reported-only quantities (Poincaré constant, round-trip discrepancy at a
single κ) carry ``passed=None``.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from roydennet import config
from roydennet.config import (
    ADJACENCY_FACTOR,
    AVERAGING_FACTOR,
    BUMP_SUPPORT_FACTOR,
    DEFAULT_MAX_SWEEPS,
    DEFAULT_SEED,
    DEFAULT_TOL,
    DEFAULT_TRIALS,
    OVERLAP_FACTOR,
    SCHEMA,
    TAIL_FACTOR,
)
from roydennet.dirichlet import (
    COMBINATORIAL,
    DirichletProblem,
    EnergySpec,
    continuum_energy,
    energy_p,
    escape_check,
    solve,
)
from roydennet.errors import InputError, RoydenNetError
from roydennet.geometry import ProxySpace, ball, geodesic, volume_profile
from roydennet.net import KappaNet, bounded_geometry, extract_net
from roydennet.transfer import (
    NORMALIZATION_TOL,
    ScalarField,
    audit_partition,
    build_partition,
    discrete_gradient_bound,
    discretize,
    smooth,
)

logger = logging.getLogger("RoydenNet.verify")

DOMINATION_TOL = 1e-12
DEFAULT_SHIFT_DELTA = 1.0


@dataclass
class Constant:
    value: float
    provenance: str

    def to_dict(self) -> dict:
        return {"value": self.value, "provenance": self.provenance}


@dataclass
class VerificationReport:
    check: str
    constants: dict[str, Constant] = field(default_factory=dict)
    measured: float | None = None
    ceiling: float | None = None
    passed: bool | None = None
    seed: int | None = None
    runtime_ms: float | None = None
    curve: dict[str, list] | None = None
    notes: list[str] = field(default_factory=list)

    def constant(self, name: str, value: float, provenance: str) -> float:
        self.constants[name] = Constant(float(value), provenance)
        logger.debug(f"{self.check}: {name}={value} ({provenance})")
        return float(value)

    def to_dict(self) -> dict:
        data = {
            "schema": SCHEMA,
            "check": self.check,
            "constants": {k: v.to_dict() for k, v in self.constants.items()},
            "measured": self.measured,
            "ceiling": self.ceiling,
            "pass": self.passed,
            "seed": self.seed,
            "runtime_ms": self.runtime_ms,
        }
        if self.curve is not None:
            data["curve"] = self.curve
        if self.notes:
            data["notes"] = list(self.notes)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "VerificationReport":
        if data.get("schema") != SCHEMA:
            raise InputError(f"report schema must be {SCHEMA!r}, got {data.get('schema')!r}")
        try:
            return cls(
                check=data["check"],
                constants={
                    k: Constant(float(v["value"]), v["provenance"])
                    for k, v in data.get("constants", {}).items()
                },
                measured=data.get("measured"),
                ceiling=data.get("ceiling"),
                passed=data.get("pass"),
                seed=data.get("seed"),
                runtime_ms=data.get("runtime_ms"),
                curve=data.get("curve"),
                notes=list(data.get("notes", [])),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"malformed report: {e}") from None


def _finish(report: VerificationReport, started: float) -> VerificationReport:
    if config.RECORD_RUNTIME:
        report.runtime_ms = round((time.perf_counter() - started) * 1000.0, 3)
    verdict = {True: "pass", False: "FAIL", None: "reported"}[report.passed]
    logger.info(
        f"{report.check}: measured={report.measured} ceiling={report.ceiling} -> {verdict}"
    )
    return report


def _map_trials(fn: Callable, items: Sequence, threads: int) -> list:
    """Ordered map, optionally on a thread pool."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _graph_spec(p: float) -> EnergySpec:
    return EnergySpec(p, COMBINATORIAL)


def smoothed_random_field(space: ProxySpace, rng: np.random.Generator) -> ScalarField:
    """Uniform [-1, 1] noise averaged once over closed neighbourhoods (volume-weighted)."""
    raw = rng.uniform(-1.0, 1.0, size=len(space))
    pattern = (space.adjacency != 0).astype(np.float64)
    num = pattern @ (space.weights * raw) + space.weights * raw
    den = pattern @ space.weights + space.weights
    return ScalarField.on_space(space, num / den)


# ---------------------------------------------------------------------------
# Partition and compact support
# ---------------------------------------------------------------------------

def check_partition(space: ProxySpace, net: KappaNet) -> VerificationReport:
    started = time.perf_counter()
    report = VerificationReport("partition")
    pou = build_partition(space, net)
    audit = audit_partition(pou)
    grad = discrete_gradient_bound(pou)
    report.constant("kappa", net.kappa, "net")
    report.constant("k_net", grad.degree_bound, "net degree bound")
    report.constant("c", grad.lipschitz, "bump Lipschitz constant 2/κ")
    report.constant("gradient_measured", grad.measured, "max edge quotient of ξ_g over host edges")
    report.constant("gradient_ceiling", grad.ceiling, "(k_net + 2)·c")
    report.constant("support_violations", audit.support_violations, "ξ_g ≠ 0 at d(g, x) ≥ 3κ/2")
    report.constant("range_violations", audit.range_violations, "ξ_g outside [0, 1]")
    report.constant("star_violations", audit.star_violations, "net points failing the star identity")
    report.measured = audit.normalization_error
    report.ceiling = NORMALIZATION_TOL
    report.passed = audit.ok and grad.measured <= grad.ceiling
    return _finish(report, started)


def check_compact_support(
    space: ProxySpace,
    net: KappaNet,
    seed: int = DEFAULT_SEED,
    base: int | None = None,
) -> VerificationReport:
    """Support growth under smooth (by at most 3κ/2) and discretize (by at most 4κ)."""
    started = time.perf_counter()
    report = VerificationReport("compact-support", seed=seed)
    rng = np.random.default_rng(seed)
    pou = build_partition(space, net)
    o = int(space.ids[0]) if base is None else base
    g0, _ = net.nearest(o)

    support = [g0] + list(net.adjacency[g0][:1])
    fbar = np.zeros(len(net))
    for g in support:
        fbar[net.row_of(g)] = rng.uniform(0.5, 1.0)
    f = smooth(ScalarField.on_net(net, fbar), pou)
    reach = net.distances[[net.row_of(g) for g in support]].min(axis=0)
    smooth_violations = int(np.count_nonzero((f.values != 0) & (reach >= pou.support)))

    seeds = sorted(ball(space, o, net.kappa))
    k_values = np.zeros(len(space))
    k_values[space.indices_of(seeds)] = rng.uniform(0.5, 1.0, size=len(seeds))
    fstar = discretize(ScalarField.on_space(space, k_values), net)
    k_reach = net.distances[:, space.indices_of(seeds)].min(axis=1)
    radius = AVERAGING_FACTOR * net.kappa
    discretize_violations = int(np.count_nonzero((fstar.values != 0) & (k_reach > radius)))

    report.constant("smooth_support_radius", pou.support, "3κ/2")
    report.constant("smooth_violations", smooth_violations, "host vertices beyond 3κ/2 of supp f̄ with f ≠ 0")
    report.constant("discretize_support_radius", radius, "4κ")
    report.constant("discretize_violations", discretize_violations, "net points beyond 4κ of supp f with f* ≠ 0")
    report.measured = float(smooth_violations + discretize_violations)
    report.ceiling = 0.0
    report.passed = report.measured <= report.ceiling
    return _finish(report, started)


# ---------------------------------------------------------------------------
# Poincaré constant
# ---------------------------------------------------------------------------

def poincare_quotients(
    space: ProxySpace,
    net: KappaNet,
    fields: Iterable[ScalarField],
    radius_factor: float = AVERAGING_FACTOR,
) -> np.ndarray:
    """Σ_B w|f - mean_B f| / Σ_{edges in B} w_e|Δf|/ℓ for every field and every ball B_{r}(g).

    Rows are fields, columns net points. Balls where the right side vanishes give nan.
    """
    mask = net.distances <= radius_factor * net.kappa
    weighted = mask * space.weights
    vol = weighted.sum(axis=1)
    ex, ey = space.edge_index[:, 0], space.edge_index[:, 1]
    inner = (mask[:, ex] & mask[:, ey]).astype(np.float64)
    w_e = space.edge_lengths * 0.5 * (space.weights[ex] + space.weights[ey])

    out = []
    for f in fields:
        values = f.values
        mean = (weighted @ values) / vol
        lhs = (weighted * np.abs(values[None, :] - mean[:, None])).sum(axis=1)
        rhs = inner @ (w_e * np.abs(values[ey] - values[ex]) / space.edge_lengths)
        with np.errstate(divide="ignore", invalid="ignore"):
            out.append(np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.nan))
    return np.asarray(out).reshape(-1, len(net))


def check_poincare(
    space: ProxySpace,
    net: KappaNet,
    trials: int = DEFAULT_TRIALS,
    seed: int = DEFAULT_SEED,
    radius_factor: float = AVERAGING_FACTOR,
) -> VerificationReport:
    started = time.perf_counter()
    report = VerificationReport("poincare", seed=seed)
    rng = np.random.default_rng(seed)
    fields = [
        ScalarField.on_space(space, rng.uniform(-1.0, 1.0, size=len(space)))
        for _ in range(trials)
    ]
    quotients = poincare_quotients(space, net, fields, radius_factor)
    finite = quotients[np.isfinite(quotients)]
    report.constant("radius", radius_factor * net.kappa, "ball radius 4κ")
    report.constant("balls", len(net), "balls centred at net points")
    report.measured = float(finite.max()) if len(finite) else 0.0
    report.notes.append("measured constant; no violation found is not a proof of tightness")
    return _finish(report, started)


# ---------------------------------------------------------------------------
# Energy comparisons
# ---------------------------------------------------------------------------

def check_smoothing_energy(
    space: ProxySpace,
    net: KappaNet,
    p: float,
    trials: int = DEFAULT_TRIALS,
    seed: int = DEFAULT_SEED,
    threads: int = 1,
) -> VerificationReport:
    """continuum energy of smooth(f̄) against I_p(f̄) on the net graph."""
    started = time.perf_counter()
    report = VerificationReport("smoothing-energy", seed=seed)
    spec = _graph_spec(p)
    pou = build_partition(space, net)
    graph = net.space
    profile = volume_profile(space, [net.kappa])

    c = report.constant("c", pou.lipschitz, "bump Lipschitz constant 2/κ")
    k = report.constant("k_net", net.degree_bound, "net degree bound")
    v1 = report.constant("V1(kappa)", profile.v1(net.kappa), "volume_profile max over all centers, r=κ")
    report.constant("q", spec.q, "conjugate exponent")
    report.ceiling = (c * k ** (1.0 / spec.q)) ** p * v1

    rng = np.random.default_rng(seed)
    samples = rng.uniform(-1.0, 1.0, size=(trials, len(net)))

    def ratio(values):
        fbar = ScalarField.on_net(net, values)
        denominator = energy_p(fbar, graph, spec)
        if denominator == 0:
            return None
        return continuum_energy(smooth(fbar, pou), space, p) / denominator

    ratios = _map_trials(ratio, list(samples), threads)
    kept = [r for r in ratios if r is not None]
    skipped = len(ratios) - len(kept)
    if skipped:
        logger.warning(f"smoothing-energy: skipped {skipped} zero-energy trials")
        report.notes.append(f"skipped {skipped} zero-energy trials")
    report.curve = {"trial": list(range(trials)), "ratio": ratios}
    if kept:
        report.measured = float(max(kept))
        report.passed = report.measured <= report.ceiling
    else:
        report.notes.append("no trial with positive net energy")
    return _finish(report, started)


def check_discretization_energy(
    space: ProxySpace,
    net: KappaNet,
    p: float,
    trials: int = DEFAULT_TRIALS,
    seed: int = DEFAULT_SEED,
    threads: int = 1,
    poincare: float | None = None,
) -> VerificationReport:
    """I_p(f*) on the net graph against the continuum energy of f.

    The ceiling is k·2^p·C_P^p·V_1(4κ)^{p-1}·C_{7κ} / V_0(κ)^p with C_P the
    larger of ``poincare`` (sampled when not given) and the trial fields' own
    Poincaré quotients.
    """
    started = time.perf_counter()
    report = VerificationReport("discretization-energy", seed=seed)
    spec = _graph_spec(p)
    kappa = net.kappa
    graph = net.space
    profile = volume_profile(space, [kappa, AVERAGING_FACTOR * kappa])

    rng = np.random.default_rng(seed)
    fields = [smoothed_random_field(space, rng) for _ in range(trials)]

    if poincare is None:
        poincare = check_poincare(space, net, trials=trials, seed=seed).measured
    own = poincare_quotients(space, net, fields)
    own = own[np.isfinite(own)]
    cp = max(float(poincare), float(own.max()) if len(own) else 0.0)

    k = report.constant("k_net", net.degree_bound, "net degree bound")
    cp = report.constant("C_P", cp, "max of sampled Poincaré constant and trial quotients on 4κ-balls")
    v1 = report.constant("V1(4kappa)", profile.v1(AVERAGING_FACTOR * kappa), "volume_profile max, r=4κ")
    v0 = report.constant("V0(kappa)", profile.v0(kappa), "volume_profile min, r=κ")
    overlap = report.constant(
        "C_7kappa", bounded_geometry(net, OVERLAP_FACTOR * kappa), "bounded_geometry(net, 7κ)"
    )
    report.ceiling = k * 2.0 ** p * cp ** p * v1 ** (p - 1) * overlap / v0 ** p

    def ratio(f):
        denominator = continuum_energy(f, space, p)
        if denominator == 0:
            return None
        return energy_p(discretize(f, net), graph, spec) / denominator

    ratios = _map_trials(ratio, fields, threads)
    kept = [r for r in ratios if r is not None]
    skipped = len(ratios) - len(kept)
    if skipped:
        logger.warning(f"discretization-energy: skipped {skipped} zero-energy trials")
        report.notes.append(f"skipped {skipped} zero-energy trials")
    report.curve = {"trial": list(range(trials)), "ratio": ratios}
    if kept:
        report.measured = float(max(kept))
        report.passed = report.measured <= report.ceiling
    else:
        report.notes.append("no trial with positive continuum energy")
    return _finish(report, started)


# ---------------------------------------------------------------------------
# Convergence along escaping rays
# ---------------------------------------------------------------------------

def default_ray(space: ProxySpace, base: int) -> list[int]:
    """Geodesic from ``base`` to the farthest vertex (smallest id on ties)."""
    row = space.distances_from(base)
    return geodesic(space, base, int(space.ids[int(np.argmax(row))]))


def _require_ray(ray: Sequence[int], base: int, space: ProxySpace) -> None:
    if len(ray) < 3:
        raise InputError(f"ray too short: {len(ray)} points, at least 3 are needed")
    if not escape_check(ray, base, space):
        raise InputError("ray does not escape from its base point")


def check_convergence_l41(
    space: ProxySpace,
    net: KappaNet,
    p: float,
    f: ScalarField | None = None,
    ray: Sequence[int] | None = None,
    base: int | None = None,
    tail_factor: float = TAIL_FACTOR,
) -> VerificationReport:
    """|f*(x_n) - f(y_n)| against 5κ·V_0(5κ)^{-1/p}·(energy of f on B_{5κ}(y_n))^{1/p}.

    ``x_n`` is the net point nearest to the ray vertex ``y_n``.
    """
    started = time.perf_counter()
    report = VerificationReport("convergence-l41")
    o = int(space.ids[0]) if base is None else base
    row = space.distances_from(o)
    if f is None:
        radius = float(row.max()) / 2
        f = ScalarField.on_space(space, np.minimum(row, radius) / radius)
        report.notes.append(f"field min(d(o, x), R)/R with R={radius}")
    ray = default_ray(space, o) if ray is None else list(ray)
    _require_ray(ray, o, space)

    tail = tail_factor * net.kappa
    profile = volume_profile(space, [tail])
    v0 = report.constant("V0(5kappa)", profile.v0(tail), "volume_profile min, r=5κ")
    report.constant("tail_radius", tail, "5κ")
    fstar = discretize(f, net)

    nearest, gaps, bounds = [], [], []
    for y in ray:
        x, _ = net.nearest(y)
        local = continuum_energy(f, space, p, subset=ball(space, y, tail))
        nearest.append(x)
        gaps.append(abs(fstar[x] - f[y]))
        bounds.append(tail * v0 ** (-1.0 / p) * local ** (1.0 / p))

    excess = [g - b for g, b in zip(gaps, bounds)]
    report.curve = {"vertex": list(ray), "net_point": nearest, "gap": gaps, "bound": bounds}
    report.measured = float(max(excess))
    report.ceiling = DOMINATION_TOL
    report.passed = report.measured <= report.ceiling
    return _finish(report, started)


def check_convergence_l42(
    space: ProxySpace,
    net: KappaNet,
    p: float,
    fbar: ScalarField | None = None,
    ray: Sequence[int] | None = None,
    base: int | None = None,
) -> VerificationReport:
    """|smooth(f̄)(x_n) - f̄(x_n)| against (Σ_{d(g, x_n) ≤ 3κ/2} |f̄(g) - f̄(x_n)|^p)^{1/p}.

    The ray lives in the net and escapes in the hop metric.
    """
    started = time.perf_counter()
    report = VerificationReport("convergence-l42")
    pou = build_partition(space, net)
    o = int(space.ids[0]) if base is None else base
    g0, _ = net.nearest(o)
    if fbar is None:
        d = net.distances[:, space.index_of(o)]
        fbar = ScalarField.on_net(net, 1.0 / (1.0 + d / net.kappa))
        report.notes.append("field 1/(1 + d(o, g)/κ)")
    graph = net.space
    ray = default_ray(graph, g0) if ray is None else list(ray)
    _require_ray(ray, ray[0], graph)

    f = smooth(fbar, pou)
    reach = report.constant("support_radius", pou.support, "3κ/2")
    gaps, bounds = [], []
    for x in ray:
        near = net.distances[:, space.index_of(x)] <= reach
        gaps.append(abs(f[x] - fbar[x]))
        diffs = np.abs(fbar.values[near] - fbar[x])
        bounds.append(float((diffs ** p).sum() ** (1.0 / p)))

    excess = [g - b for g, b in zip(gaps, bounds)]
    report.curve = {"net_point": list(ray), "gap": gaps, "bound": bounds}
    report.measured = float(max(excess))
    report.ceiling = DOMINATION_TOL
    report.passed = report.measured <= report.ceiling
    return _finish(report, started)


# ---------------------------------------------------------------------------
# Transfer round trip
# ---------------------------------------------------------------------------

def default_boundary_data(space: ProxySpace) -> ScalarField:
    """1 where the nearest designated-boundary vertex has id at most the median boundary id, else 0."""
    marks = sorted(space.boundary)
    if not marks:
        raise InputError("space has no designated boundary")
    median = marks[(len(marks) - 1) // 2]
    rows = space.distance_rows(space.indices_of(marks))
    owner = np.asarray(marks)[np.argmin(rows, axis=0)]
    return ScalarField.on_space(space, (owner <= median).astype(np.float64))


def _annulus(space: ProxySpace, net: KappaNet, factor: float) -> list[int]:
    marks = space.indices_of(sorted(space.boundary))
    reach = net.distances[:, marks].min(axis=1)
    return [g for g, r in zip(net.ids, reach) if r <= factor * net.kappa]


@dataclass(frozen=True)
class RoundTrip:
    hbar: ScalarField
    h: ScalarField
    proxy: ScalarField
    back: ScalarField
    annulus: tuple[int, ...]
    interior: tuple[int, ...]

    @property
    def discrepancy(self) -> float:
        rows = [self.hbar.ids.index(g) for g in self.interior]
        return float(np.abs(self.back.values[rows] - self.hbar.values[rows]).max())


def _boundary_values(data: ScalarField, space: ProxySpace, net: KappaNet, annulus) -> dict[int, float]:
    if data.domain == "net":
        data.require("net", net.ids)
    else:
        data.require("proxy", tuple(int(v) for v in space.ids))
    return {g: data[g] for g in annulus}


def run_roundtrip(
    space: ProxySpace,
    net: KappaNet,
    p: float,
    data: ScalarField,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    annulus_factor: float = ADJACENCY_FACTOR,
) -> RoundTrip:
    """Net solve, smooth, proxy solve on the designated boundary, discretize."""
    pou = build_partition(space, net)
    annulus = _annulus(space, net, annulus_factor)
    interior = tuple(g for g in net.ids if g not in set(annulus))
    if not interior:
        raise InputError(f"kappa={net.kappa} leaves no net point away from the boundary annulus")

    net_problem = DirichletProblem(
        net.space, _graph_spec(p), _boundary_values(data, space, net, annulus), field_domain="net"
    )
    hbar = solve(net_problem, tol=tol, max_sweeps=max_sweeps).field
    h = smooth(hbar, pou)
    proxy_problem = DirichletProblem(
        space, EnergySpec.for_space(space, p), {v: h[v] for v in sorted(space.boundary)}
    )
    proxy = solve(proxy_problem, tol=tol, max_sweeps=max_sweeps).field
    back = discretize(proxy, net)
    return RoundTrip(hbar, h, proxy, back, tuple(annulus), interior)


def transfer_roundtrip(
    space: ProxySpace,
    net: KappaNet,
    p: float,
    data: ScalarField | None = None,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    shift_delta: float = DEFAULT_SHIFT_DELTA,
) -> VerificationReport:
    started = time.perf_counter()
    report = VerificationReport("roundtrip")
    if data is None:
        data = default_boundary_data(space)
        report.notes.append("two-valued boundary data split at the median boundary id")
    trip = run_roundtrip(space, net, p, data, tol, max_sweeps)
    report.constant("kappa", net.kappa, "net")
    report.constant("annulus_radius", ADJACENCY_FACTOR * net.kappa, "net points within 3κ of the designated boundary")
    report.constant("annulus_points", len(trip.annulus), "net")
    report.constant("interior_points", len(trip.interior), "net")
    report.measured = trip.discrepancy
    rows = [net.row_of(g) for g in trip.interior]
    report.curve = {
        "net_point": list(trip.interior),
        "hbar": trip.hbar.values[rows].tolist(),
        "back": trip.back.values[rows].tolist(),
    }

    # Injectivity: shift half of the annulus data by delta.
    shifted = sorted(trip.annulus)[: max(1, len(trip.annulus) // 2)]
    values = np.array(data.values)
    for g in shifted:
        values[data.ids.index(g)] += shift_delta
    shifted_trip = run_roundtrip(space, net, p, ScalarField(data.domain, data.ids, values), tol, max_sweeps)
    separation = float(np.abs(shifted_trip.proxy.values - trip.proxy.values).max())
    report.constant("shift_delta", shift_delta, "sup-norm change of the boundary data")
    report.constant("shift_separation", separation, "sup |π1 - π2| on the host")
    if separation < shift_delta / 4:
        logger.warning(
            f"roundtrip: transferred solutions differ by {separation} < δ/4 (heuristic injectivity check)"
        )
    report.notes.append(
        f"heuristic injectivity check: separation {'>=' if separation >= shift_delta / 4 else '<'} δ/4"
    )
    return _finish(report, started)


def _leaves_interior(space: ProxySpace, kappa: float) -> bool:
    net = extract_net(space, kappa)
    return len(_annulus(space, net, ADJACENCY_FACTOR)) < len(net)


def default_refinement(space: ProxySpace, kappa: float) -> list[float]:
    """Two-level schedule around ``kappa``, or ``[kappa]`` when none fits.

    Halving needs κ/2 ≥ 2·max edge length for the partition; otherwise the
    schedule coarsens to [2κ, κ]. Every level must leave an interior net point.
    """
    if kappa / 2 >= 2 * space.max_edge_length:
        schedule = [kappa, kappa / 2]
    else:
        schedule = [2 * kappa, kappa]
    if all(_leaves_interior(space, k) for k in schedule):
        return schedule
    logger.info(f"roundtrip-refinement: no two-level schedule around kappa={kappa}; using [{kappa}]")
    return [kappa]


def roundtrip_refinement(
    space: ProxySpace,
    kappas: Sequence[float],
    p: float,
    data: ScalarField | None = None,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    order: Sequence[int] | None = None,
) -> VerificationReport:
    """Round-trip discrepancy along a κ schedule; passes iff it strictly decreases."""
    started = time.perf_counter()
    report = VerificationReport("roundtrip-refinement")
    if not kappas:
        raise InputError("kappa schedule is empty")
    if data is None:
        data = default_boundary_data(space)
    if data.domain != "proxy":
        raise InputError("refinement needs proxy boundary data (the net changes with κ)")
    discrepancies = []
    for kappa in kappas:
        net = extract_net(space, kappa, order)
        discrepancies.append(run_roundtrip(space, net, p, data, tol, max_sweeps).discrepancy)
    report.curve = {"kappa": [float(k) for k in kappas], "discrepancy": discrepancies}
    report.measured = discrepancies[-1]
    if len(discrepancies) > 1:
        report.passed = all(b < a for a, b in zip(discrepancies, discrepancies[1:]))
        ratio = discrepancies[-1] / discrepancies[0] if discrepancies[0] > 0 else 0.0
        report.constant("rate", ratio, "last over first discrepancy")
    else:
        report.notes.append("single κ; decay not assessed")
    return _finish(report, started)


# ---------------------------------------------------------------------------
# Suite
# ---------------------------------------------------------------------------

@dataclass
class VerifyOptions:
    p: float = 2.0
    trials: int = DEFAULT_TRIALS
    seed: int = DEFAULT_SEED
    threads: int = 1
    base: int | None = None
    tol: float = DEFAULT_TOL
    max_sweeps: int = DEFAULT_MAX_SWEEPS
    kappas: list[float] | None = None


CHECKS: dict[str, Callable[[ProxySpace, KappaNet, VerifyOptions], VerificationReport]] = {
    "partition": lambda s, n, o: check_partition(s, n),
    "smoothing-energy": lambda s, n, o: check_smoothing_energy(s, n, o.p, o.trials, o.seed, o.threads),
    "discretization-energy": lambda s, n, o: check_discretization_energy(
        s, n, o.p, o.trials, o.seed, o.threads
    ),
    "poincare": lambda s, n, o: check_poincare(s, n, o.trials, o.seed),
    "compact-support": lambda s, n, o: check_compact_support(s, n, o.seed, o.base),
    "convergence-l41": lambda s, n, o: check_convergence_l41(s, n, o.p, base=o.base),
    "convergence-l42": lambda s, n, o: check_convergence_l42(s, n, o.p, base=o.base),
    "roundtrip": lambda s, n, o: transfer_roundtrip(s, n, o.p, tol=o.tol, max_sweeps=o.max_sweeps),
    "roundtrip-refinement": lambda s, n, o: roundtrip_refinement(
        s, o.kappas or default_refinement(s, n.kappa), o.p, tol=o.tol, max_sweeps=o.max_sweeps
    ),
}


def run_check(name: str, space: ProxySpace, net: KappaNet, options: VerifyOptions) -> VerificationReport:
    try:
        check = CHECKS[name]
    except KeyError:
        raise InputError(f"unknown check {name!r}; expected one of {', '.join(CHECKS)} or 'all'") from None
    return check(space, net, options)


def run_suite(space: ProxySpace, net: KappaNet, options: VerifyOptions) -> list[VerificationReport]:
    """Every check, in the fixed order of ``CHECKS``.

    A check that raises is recorded as failed with the error in its notes,
    and the remaining checks still run.
    """
    reports = []
    for name in CHECKS:
        try:
            reports.append(run_check(name, space, net, options))
        except RoydenNetError as e:
            logger.error(f"{name}: {e}")
            reports.append(VerificationReport(name, passed=False, notes=[f"error: {e}"]))
    return reports
