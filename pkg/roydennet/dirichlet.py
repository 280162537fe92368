"""
p-Dirichlet energy and the Dirichlet problem
--------------------------------------------
Energies, p-Laplace residuals, a coordinate-minimization solver for the
p-Dirichlet problem and the exhaustion approximation of the p-Royden split.

Energies come in two modes:

* ``combinatorial``: weight 1 per directed neighbour pair, so
  ``I_p(f) = Σ_x Σ_{y ~ x} |f(y) - f(x)|^p`` counts every edge twice.
* ``length-weighted``: conductance ``w_e / ℓ_e^p`` per neighbour pair with
  ``w_e = ℓ_e (w_x + w_y) / 2``, the manifold-proxy analogue of ``∫|∇f|^p``.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import optimize, sparse
from scipy.sparse import csgraph
from scipy.sparse import linalg as splinalg

from roydennet.config import (
    DEFAULT_MAX_SWEEPS,
    DEFAULT_SEED,
    DEFAULT_TOL,
    FUSE_RATIO,
    ROOT_MAXITER,
    ROOT_RTOL,
    ROOT_XTOL,
)
from roydennet.errors import ConfigError, ConvergenceError, InputError, SolverError
from roydennet.geometry import KIND_MANIFOLD, ProxySpace
from roydennet.transfer import DOMAIN_PROXY, ScalarField

logger = logging.getLogger("RoydenNet.dirichlet")

COMBINATORIAL = "combinatorial"
LENGTH_WEIGHTED = "length-weighted"
ENERGY_MODES = (COMBINATORIAL, LENGTH_WEIGHTED)

INITIAL_RULES = ("harmonic", "boundary-mean", "random")
SOLVE_MODES = ("sequential", "jacobi")

MAX_PRINCIPLE_SLACK = 1e-6
_PROGRESS_EVERY = 1000


@dataclass(frozen=True)
class EnergySpec:
    p: float
    mode: str = COMBINATORIAL

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p > 1):
            raise ConfigError("p", "p must exceed 1")
        if self.mode not in ENERGY_MODES:
            raise ConfigError("mode", f"unknown energy mode {self.mode!r}")

    @property
    def q(self) -> float:
        """Conjugate exponent, 1/p + 1/q = 1."""
        return self.p / (self.p - 1)

    @classmethod
    def for_space(cls, space: ProxySpace, p: float) -> "EnergySpec":
        mode = LENGTH_WEIGHTED if space.kind == KIND_MANIFOLD else COMBINATORIAL
        return cls(p, mode)

    def to_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "mode": self.mode}


# ---------------------------------------------------------------------------
# Energies and residuals
# ---------------------------------------------------------------------------

def field_values(f: ScalarField, space: ProxySpace) -> np.ndarray:
    """Values of ``f`` aligned with ``space.ids``."""
    if len(f.ids) != len(space) or np.any(np.asarray(f.ids) != space.ids):
        raise InputError("field is not defined on exactly the vertices of this space")
    return f.values


def _pair_rows(space: ProxySpace) -> np.ndarray:
    adj = space.adjacency
    return np.repeat(np.arange(len(space)), np.diff(adj.indptr))


def conductance_matrix(space: ProxySpace, spec: EnergySpec, p: float | None = None) -> sparse.csr_matrix:
    """Symmetric per-neighbour-pair weights, same sparsity as ``space.adjacency``."""
    p = spec.p if p is None else p
    adj = space.adjacency
    cond = adj.copy()
    if spec.mode == COMBINATORIAL:
        cond.data = np.ones_like(adj.data)
    else:
        rows, cols = _pair_rows(space), adj.indices
        cond.data = 0.5 * (space.weights[rows] + space.weights[cols]) * adj.data ** (1.0 - p)
    return cond


def _pair_terms(values: np.ndarray, space: ProxySpace, spec: EnergySpec):
    cond = conductance_matrix(space, spec)
    rows = _pair_rows(space)
    delta = values[cond.indices] - values[rows]
    return cond.data, rows, delta


def gradient_p(f: ScalarField, space: ProxySpace, spec: EnergySpec) -> np.ndarray:
    """|Df(x)|^p = Σ_{y ~ x} c_xy |f(y) - f(x)|^p, aligned with ``space.ids``."""
    values = field_values(f, space)
    cond, rows, delta = _pair_terms(values, space, spec)
    return np.bincount(rows, weights=cond * np.abs(delta) ** spec.p, minlength=len(space))


def energy_p(
    f: ScalarField,
    space: ProxySpace,
    spec: EnergySpec,
    subset: Iterable[int] | None = None,
) -> float:
    """I_p(f, V) = Σ_{x ∈ V} |Df(x)|^p (V defaults to every vertex)."""
    per_vertex = gradient_p(f, space, spec)
    if subset is None:
        return float(per_vertex.sum())
    positions = np.sort(space.indices_of(set(subset)))
    return float(per_vertex[positions].sum())


def continuum_energy(
    f: ScalarField,
    space: ProxySpace,
    p: float,
    subset: Iterable[int] | None = None,
) -> float:
    """Σ over edges of w_e |Δf|^p / ℓ^p, each edge once.

    With ``subset``, only edges with both ends in the subset contribute.
    """
    values = field_values(f, space)
    ex, ey = space.edge_index[:, 0], space.edge_index[:, 1]
    length = space.edge_lengths
    w_e = length * 0.5 * (space.weights[ex] + space.weights[ey])
    terms = w_e * np.abs(values[ey] - values[ex]) ** p / length ** p
    if subset is not None:
        inside = np.zeros(len(space), dtype=bool)
        inside[space.indices_of(set(subset))] = True
        terms = terms[inside[ex] & inside[ey]]
    return float(terms.sum())


def residual(f: ScalarField, space: ProxySpace, spec: EnergySpec) -> np.ndarray:
    """Σ_{y ~ x} c_xy |f(y) - f(x)|^{p-2} (f(y) - f(x)); a zero increment contributes 0."""
    values = field_values(f, space)
    cond, rows, delta = _pair_terms(values, space, spec)
    terms = cond * np.sign(delta) * np.abs(delta) ** (spec.p - 1)
    return np.bincount(rows, weights=terms, minlength=len(space))


def dp_norm(f: ScalarField, space: ProxySpace, spec: EnergySpec, o: int) -> float:
    """(I_p(f) + |f(o)|^p)^{1/p}."""
    value = field_values(f, space)[space.index_of(o)]
    return (energy_p(f, space, spec) + abs(value) ** spec.p) ** (1.0 / spec.p)


def bdp_norm(f: ScalarField, space: ProxySpace, spec: EnergySpec) -> float:
    """I_p(f)^{1/p} + sup |f|."""
    values = field_values(f, space)
    return energy_p(f, space, spec) ** (1.0 / spec.p) + float(np.abs(values).max())


# ---------------------------------------------------------------------------
# Dirichlet problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DirichletProblem:
    """Minimize I_p over fields equal to ``boundary`` on its keys.

    Every vertex not named in ``boundary`` is free.
    """

    space: ProxySpace = field(repr=False)
    spec: EnergySpec
    boundary: Mapping[int, float] = field(repr=False)
    field_domain: str = DOMAIN_PROXY

    def __post_init__(self):
        space = self.space
        if not self.boundary:
            raise SolverError("ill-posed problem: the boundary set is empty")
        values = {}
        for v, value in self.boundary.items():
            space.index_of(v)
            value = float(value)
            if not math.isfinite(value):
                raise InputError(f"boundary value at vertex {v} is not finite")
            values[int(v)] = value
        object.__setattr__(self, "boundary", values)

        fixed = np.zeros(len(space), dtype=bool)
        fixed[space.indices_of(values)] = True
        free = np.flatnonzero(~fixed)
        if len(free):
            sub = space.adjacency[free][:, free]
            ncomp, labels = csgraph.connected_components(sub, directed=False)
            touches = np.zeros(ncomp, dtype=bool)
            for local, i in enumerate(free):
                if fixed[space.neighbors[i]].any():
                    touches[labels[local]] = True
            if not touches.all():
                lonely = int(space.ids[free[np.argmin(touches[labels])]])
                raise SolverError(
                    f"ill-posed problem: free vertex {lonely} is not connected to the boundary"
                )

    @property
    def fixed_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.space), dtype=bool)
        mask[self.space.indices_of(self.boundary)] = True
        return mask

    @property
    def free(self) -> np.ndarray:
        """Free positions, ascending (ascending vertex id)."""
        return np.flatnonzero(~self.fixed_mask)

    def boundary_array(self) -> np.ndarray:
        values = np.zeros(len(self.space))
        for v, value in self.boundary.items():
            values[self.space.index_of(v)] = value
        return values

    def field(self, values) -> ScalarField:
        return ScalarField.on_space(self.space, values, domain=self.field_domain)


@dataclass(frozen=True)
class DirichletSolution:
    field: ScalarField
    iterations: int
    final_residual: float
    energy: float

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "energy": self.energy,
            "min": float(self.field.values.min()),
            "max": float(self.field.values.max()),
        }


def linear_oracle(problem: DirichletProblem) -> ScalarField:
    """Direct sparse solve of the p = 2 problem with the same conductances."""
    space = problem.space
    cond = conductance_matrix(space, problem.spec, p=2.0)
    values = problem.boundary_array()
    free = problem.free
    if len(free) == 0:
        return problem.field(values)
    fixed = np.flatnonzero(problem.fixed_mask)
    # solve for the deviation from the boundary mean; constant data stays exact
    shift = float(np.mean(list(problem.boundary.values())))
    laplacian = sparse.diags(np.asarray(cond.sum(axis=1)).ravel()) - cond
    laplacian = laplacian.tocsr()
    lhs = laplacian[free][:, free].tocsc()
    rhs = -(laplacian[free][:, fixed] @ (values[fixed] - shift))
    values[free] = splinalg.spsolve(lhs, rhs) + shift
    return problem.field(values)


def _minimize_coordinate(neighbor_values: np.ndarray, cond: np.ndarray, p: float) -> float:
    """argmin_t Σ c |v - t|^p via a bracketed root of the (monotone) derivative.

    For p < 2 the objective has a cusp at every neighbour value; a root that
    lands next to one is snapped onto it when that is no worse.
    """
    lo, hi = float(neighbor_values.min()), float(neighbor_values.max())
    if lo == hi:
        return lo
    if p == 2.0:
        return float(cond @ neighbor_values / cond.sum())

    def slope(t):
        d = t - neighbor_values
        return float(cond @ (np.sign(d) * np.abs(d) ** (p - 1)))

    t = float(optimize.brentq(slope, lo, hi, xtol=ROOT_XTOL, rtol=ROOT_RTOL, maxiter=ROOT_MAXITER))
    if p < 2.0:
        nearest = float(neighbor_values[np.argmin(np.abs(neighbor_values - t))])
        if cond @ np.abs(neighbor_values - nearest) ** p <= cond @ np.abs(neighbor_values - t) ** p:
            return nearest
    return t


def _fuse_blocks(
    values: np.ndarray,
    free_mask: np.ndarray,
    rows: np.ndarray,
    cols: np.ndarray,
    cond: np.ndarray,
    p: float,
    gap: float,
) -> int:
    """Move clusters of nearly equal free neighbours to one common value.

    Coordinate updates alone crawl when p < 2 and adjacent free vertices
    share their optimal value. A cluster is accepted only if its local
    energy does not grow. Returns the number of clusters moved.
    """
    linked = free_mask[rows] & free_mask[cols] & (rows < cols)
    linked &= np.abs(values[rows] - values[cols]) <= gap
    if not linked.any():
        return 0
    n = len(values)
    graph = sparse.coo_matrix(
        (np.ones(int(linked.sum())), (rows[linked], cols[linked])), shape=(n, n)
    )
    _, labels = csgraph.connected_components(graph, directed=False)
    sizes = np.bincount(labels)
    moved = 0
    for block in np.flatnonzero(sizes >= 2):
        members = labels == block
        touching = members[rows]
        external = touching & ~members[cols]
        if not external.any():
            continue
        internal = touching & members[cols]
        ext_values, ext_cond = values[cols[external]], cond[external]
        before = ext_cond @ np.abs(ext_values - values[rows[external]]) ** p
        before += 0.5 * cond[internal] @ np.abs(values[cols[internal]] - values[rows[internal]]) ** p
        t = _minimize_coordinate(ext_values, ext_cond, p)
        if np.all(values[members] == t):
            continue
        if ext_cond @ np.abs(ext_values - t) ** p <= before:
            values[members] = t
            moved += 1
    return moved


def _initial_values(problem: DirichletProblem, initial, seed: int) -> np.ndarray:
    space = problem.space
    boundary = problem.boundary_array()
    fixed = problem.fixed_mask
    b_values = np.asarray(list(problem.boundary.values()))

    if isinstance(initial, ScalarField):
        values = np.array(field_values(initial, space), dtype=np.float64)
    elif isinstance(initial, str):
        if initial == "harmonic":
            values = np.array(linear_oracle(problem).values)
        elif initial == "boundary-mean":
            values = np.full(len(space), b_values.mean())
        elif initial == "random":
            rng = np.random.default_rng(seed)
            values = rng.uniform(b_values.min(), b_values.max(), size=len(space))
        else:
            raise ConfigError("initial", f"unknown initialization {initial!r}")
    else:
        values = np.array(initial, dtype=np.float64)
        if values.shape != (len(space),) or not np.all(np.isfinite(values)):
            raise ConfigError("initial", "initial field needs one finite value per vertex")
    values[fixed] = boundary[fixed]
    return values


def _free_residual(values, rows, cols, cond, p, free) -> float:
    if len(free) == 0:
        return 0.0
    delta = values[cols] - values[rows]
    terms = cond * np.sign(delta) * np.abs(delta) ** (p - 1)
    res = np.bincount(rows, weights=terms, minlength=len(values))
    return float(np.abs(res[free]).max())


def solve(
    problem: DirichletProblem,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    initial="harmonic",
    mode: str = "sequential",
    seed: int = DEFAULT_SEED,
    threads: int = 1,
) -> DirichletSolution:
    """Cyclic coordinate minimization of I_p with fixed boundary values.

    ``sequential`` sweeps the free vertices in ascending id, updating in place.
    ``jacobi`` updates every free vertex from the previous iterate; with
    ``threads > 1`` the updates of one sweep run on a thread pool.
    Converged when the residual sup-norm over free vertices is at most ``tol``.
    For p < 2 each sweep ends with a cluster move (see ``_fuse_blocks``).
    """
    if not tol > 0:
        raise ConfigError("tol", "tol must be positive")
    if max_sweeps < 0:
        raise ConfigError("max_sweeps", "max_sweeps must be nonnegative")
    if mode not in SOLVE_MODES:
        raise ConfigError("mode", f"unknown solve mode {mode!r}")

    space, spec = problem.space, problem.spec
    p = spec.p
    free = problem.free
    cond = conductance_matrix(space, spec)
    neighbors = [cond.indices[cond.indptr[i]:cond.indptr[i + 1]] for i in range(len(space))]
    weights = [cond.data[cond.indptr[i]:cond.indptr[i + 1]] for i in range(len(space))]
    rows, cols = _pair_rows(space), cond.indices
    free_mask = ~problem.fixed_mask
    b_values = np.asarray(list(problem.boundary.values()))
    lo, hi = b_values.min(), b_values.max()
    fuse_gap = FUSE_RATIO * (hi - lo)
    values = _initial_values(problem, initial, seed)

    def update(i, source):
        return _minimize_coordinate(source[neighbors[i]], weights[i], p)

    def current_residual():
        return _free_residual(values, rows, cols, cond.data, p, free)

    sweeps = 0
    res = current_residual()
    pool = ThreadPoolExecutor(max_workers=threads) if mode == "jacobi" and threads > 1 else None
    try:
        while res > tol and sweeps < max_sweeps:
            if mode == "sequential":
                for i in free:
                    values[i] = update(i, values)
            else:
                previous = values.copy()
                if pool is None:
                    fresh = [update(i, previous) for i in free]
                else:
                    fresh = list(pool.map(lambda i: update(i, previous), free))
                values[free] = fresh
            if p < 2.0:
                _fuse_blocks(values, free_mask, rows, cols, cond.data, p, fuse_gap)
            sweeps += 1
            res = current_residual()
            if sweeps % _PROGRESS_EVERY == 0:
                logger.debug(f"sweep {sweeps}: residual {res:.3e}")
    finally:
        if pool is not None:
            pool.shutdown()

    if res > tol:
        logger.error(f"Dirichlet solve did not converge: residual {res:.3e} after {sweeps} sweeps")
        raise ConvergenceError(res, sweeps)

    slack = MAX_PRINCIPLE_SLACK * max(1.0, hi - lo)
    if values.min() < lo - slack or values.max() > hi + slack:
        raise SolverError(
            f"maximum principle violated: solution range [{values.min()}, {values.max()}] "
            f"exceeds boundary range [{lo}, {hi}]"
        )

    solution = problem.field(values)
    energy = energy_p(solution, space, spec)
    logger.info(f"Solved p={p} Dirichlet problem in {sweeps} sweeps (residual {res:.3e})")
    return DirichletSolution(field=solution, iterations=sweeps, final_residual=res, energy=energy)


# ---------------------------------------------------------------------------
# Exhaustion
# ---------------------------------------------------------------------------

def sphere(space: ProxySpace, o: int, radius: float) -> frozenset[int]:
    """Inner vertex boundary of B_R(o): ball vertices with a neighbour outside it."""
    if radius < 0:
        raise InputError(f"radius must be nonnegative, got {radius}")
    inside = space.distances_from(o) <= radius
    members = [
        int(space.ids[i])
        for i in np.flatnonzero(inside)
        if not inside[space.neighbors[i]].all()
    ]
    if not members:
        raise InputError(f"radius {radius} exhausts the space; the sphere is empty")
    return frozenset(members)


@dataclass(frozen=True)
class RoydenLevel:
    radius: float
    h: ScalarField
    u: ScalarField
    ball: frozenset[int] = field(repr=False)
    sphere: frozenset[int] = field(repr=False)
    energy: float
    drift: float | None
    iterations: int
    final_residual: float

    def to_dict(self) -> dict:
        return {
            "radius": self.radius,
            "ball_size": len(self.ball),
            "sphere_size": len(self.sphere),
            "energy": self.energy,
            "drift": self.drift,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "u_sup": float(np.abs(self.u.values).max()),
        }


@dataclass(frozen=True)
class RoydenSplit:
    """f = u_R + h_R for each radius of the exhaustion B_{R_1} ⊂ B_{R_2} ⊂ …

    ``h_R`` is p-harmonic inside B_R with the values of f on S_R and agrees
    with f outside B_R, so ``u_R`` vanishes on S_R and outside B_R.
    """

    base: int
    radii: tuple[float, ...]
    levels: tuple[RoydenLevel, ...]

    def to_dict(self) -> dict:
        return {
            "base": self.base,
            "radii": list(self.radii),
            "levels": [level.to_dict() for level in self.levels],
        }


def royden_split(
    space: ProxySpace,
    f: ScalarField,
    spec: EnergySpec,
    o: int,
    radii: Sequence[float],
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    initial="harmonic",
    mode: str = "sequential",
    threads: int = 1,
) -> RoydenSplit:
    radii = tuple(float(r) for r in radii)
    if not radii:
        raise InputError("radii schedule is empty")
    if any(r < 1 for r in radii):
        raise InputError("every radius must be at least 1")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise InputError("radii must be strictly increasing")
    values = field_values(f, space)
    d_o = space.distances_from(o)
    first_ball = d_o <= radii[0]

    levels: list[RoydenLevel] = []
    previous: np.ndarray | None = None
    for radius in radii:
        shell = sphere(space, o, radius)
        inside = d_o <= radius
        interior = inside.copy()
        interior[space.indices_of(shell)] = False
        boundary = {int(space.ids[i]): float(values[i]) for i in np.flatnonzero(~interior)}
        problem = DirichletProblem(space, spec, boundary, field_domain=f.domain)
        solution = solve(problem, tol=tol, max_sweeps=max_sweeps, initial=initial, mode=mode, threads=threads)

        h = solution.field
        u = ScalarField(f.domain, f.ids, values - h.values)
        ball_ids = frozenset(int(v) for v in space.ids[inside])
        drift = None
        if previous is not None:
            drift = float(np.abs(h.values - previous)[first_ball].max())
        previous = h.values
        levels.append(
            RoydenLevel(
                radius=radius,
                h=h,
                u=u,
                ball=ball_ids,
                sphere=shell,
                energy=energy_p(h, space, spec, subset=ball_ids),
                drift=drift,
                iterations=solution.iterations,
                final_residual=solution.final_residual,
            )
        )
        logger.info(f"Royden split at R={radius}: |B_R|={len(ball_ids)}, drift={drift}")
    return RoydenSplit(base=int(o), radii=radii, levels=tuple(levels))


def escape_check(
    sequence: Sequence[int],
    o: int,
    space: ProxySpace,
    thresholds: Sequence[float] | None = None,
) -> bool:
    """Whether d(o, x_n) eventually exceeds every threshold, within the space.

    Default thresholds step from d(o, x_0) up to (excluding) the largest
    distance the sequence reaches.
    """
    if len(sequence) == 0:
        raise InputError("sequence is empty")
    row = space.distances_from(o)
    dist = row[space.indices_of(sequence)]
    if thresholds is None:
        count = max(1, min(len(dist) - 1, 10))
        thresholds = np.linspace(dist[0], dist.max(), count, endpoint=False)
    for t in thresholds:
        below = np.flatnonzero(dist <= t)
        # the tail after the last visit at or below t must be nonempty
        if len(below) and below[-1] == len(dist) - 1:
            return False
    return True
