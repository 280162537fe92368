"""
Kappa-nets for roydennet
------------------------
Maximal kappa-separated subsets of a proxy space, the net graph given by the
3-kappa adjacency rule, and audits of bounded geometry and of the
quasi-isometry constants of the inclusion net -> space.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from roydennet.config import (
    ADJACENCY_FACTOR,
    QI_A_MAX,
    QI_A_STEP,
    QI_B_MAX_FACTOR,
    QI_B_STEP,
    QI_FULL_SCAN_LIMIT,
    QI_SAMPLED_PAIRS,
)
from roydennet.errors import InputError, NetError, UnknownVertexError
from roydennet.geometry import KIND_GRAPH, ProxySpace, diameter_estimate

logger = logging.getLogger("RoydenNet.net")


def _adjacency(ids: np.ndarray, point_distances: np.ndarray, threshold: float) -> dict[int, tuple[int, ...]]:
    adjacency = {}
    for row, g in enumerate(ids):
        d = point_distances[row]
        mask = (d > 0) & (d <= threshold)
        adjacency[int(g)] = tuple(int(h) for h in ids[mask])
    return adjacency


@dataclass(frozen=True, eq=False)
class KappaNet:
    """A kappa-net Γ inside ``host``.

    ``points`` keeps admission order; ``ids`` is the same set in ascending
    order and fixes the row order of ``distances`` (net point -> every host
    vertex) and of every net field.
    """

    kappa: float
    points: tuple[int, ...]
    host: ProxySpace = field(repr=False)
    adjacency_factor: float
    ids: tuple[int, ...] = field(repr=False)
    distances: np.ndarray = field(repr=False)
    adjacency: dict[int, tuple[int, ...]] = field(repr=False)

    @classmethod
    def from_points(
        cls,
        host: ProxySpace,
        kappa: float,
        points: Iterable[int],
        adjacency_factor: float = ADJACENCY_FACTOR,
        rows: dict[int, np.ndarray] | None = None,
    ) -> "KappaNet":
        points = tuple(int(g) for g in points)
        if not points:
            raise InputError("a net needs at least one point")
        if len(set(points)) != len(points):
            raise InputError("net points must be distinct")
        ids = tuple(sorted(points))
        positions = host.indices_of(ids)
        if rows is None:
            distances = host.distance_rows(positions)
        else:
            distances = np.vstack([rows[int(p)] for p in positions])
        distances.setflags(write=False)

        adjacency = _adjacency(
            np.asarray(ids), distances[:, positions], kappa * adjacency_factor
        )
        net = cls(
            kappa=float(kappa),
            points=points,
            host=host,
            adjacency_factor=float(adjacency_factor),
            ids=ids,
            distances=distances,
            adjacency=adjacency,
        )
        ncomp, _ = csgraph.connected_components(net.graph, directed=False)
        if ncomp != 1:
            raise NetError(
                f"net graph is disconnected ({ncomp} components); "
                f"kappa={kappa} is too large for the sampling density"
            )
        return net

    def __len__(self) -> int:
        return len(self.ids)

    @cached_property
    def _row(self) -> dict[int, int]:
        return {g: i for i, g in enumerate(self.ids)}

    def row_of(self, g: int) -> int:
        try:
            return self._row[int(g)]
        except (KeyError, TypeError, ValueError):
            raise UnknownVertexError(g) from None

    @cached_property
    def host_positions(self) -> np.ndarray:
        return self.host.indices_of(self.ids)

    @cached_property
    def point_distances(self) -> np.ndarray:
        """d_M between net points, rows and columns in ``ids`` order."""
        return self.distances[:, self.host_positions]

    @property
    def degree_bound(self) -> int:
        return max((len(v) for v in self.adjacency.values()), default=0)

    @cached_property
    def graph(self) -> sparse.csr_matrix:
        rows, cols = [], []
        for g, nbrs in self.adjacency.items():
            for h in nbrs:
                rows.append(self._row[g])
                cols.append(self._row[h])
        m = len(self.ids)
        return sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(m, m))

    @cached_property
    def hop_matrix(self) -> np.ndarray:
        """Hop distance d_Γ in the net graph."""
        return csgraph.shortest_path(self.graph, directed=False, unweighted=True)

    def hop_distance(self, g: int, h: int) -> float:
        return float(self.hop_matrix[self.row_of(g), self.row_of(h)])

    def nearest(self, x: int) -> tuple[int, float]:
        """Nearest net point to host vertex ``x`` (ties go to the smaller id)."""
        col = self.distances[:, self.host.index_of(x)]
        row = int(np.argmin(col))
        return self.ids[row], float(col[row])

    @cached_property
    def space(self) -> ProxySpace:
        """The net as a combinatorial graph on its own ids."""
        edges = [(g, h) for g, nbrs in self.adjacency.items() for h in nbrs if g < h]
        return ProxySpace(
            ids=self.ids,
            edges=edges,
            lengths=[1.0] * len(edges),
            weights=[1.0] * len(self.ids),
            kind=KIND_GRAPH,
            boundary=(),
        )

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "points": list(self.points),
            "adjacency": {str(g): list(nbrs) for g, nbrs in self.adjacency.items()},
            "adjacency_factor": self.adjacency_factor,
            "degree_bound": self.degree_bound,
        }


def as_space(net: KappaNet) -> ProxySpace:
    return net.space


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def extract_net(
    space: ProxySpace,
    kappa: float,
    order: Iterable[int] | None = None,
    adjacency_factor: float = ADJACENCY_FACTOR,
) -> KappaNet:
    """Greedy maximal kappa-separated subset, scanning vertices in ``order``.

    A vertex is admitted iff it is at distance >= kappa from every point
    admitted before it.
    """
    if not (kappa > 0 and math.isfinite(kappa)):
        raise InputError(f"kappa must be positive, got {kappa}")
    if order is None:
        positions = np.arange(len(space))
    else:
        positions = space.indices_of(order)
        if len(positions) != len(space) or len(set(positions.tolist())) != len(space):
            raise InputError("order must be a permutation of the vertex ids")

    if kappa < 2 * space.max_edge_length:
        logger.warning(
            f"kappa={kappa} is below twice the longest edge ({space.max_edge_length}); "
            "balls degenerate at mesh scale"
        )

    nearest = np.full(len(space), np.inf)
    admitted: list[int] = []
    rows: dict[int, np.ndarray] = {}
    for i in positions:
        if nearest[i] >= kappa:
            row = space.distance_rows([i])[0]
            admitted.append(int(i))
            rows[int(i)] = row
            np.minimum(nearest, row, out=nearest)

    points = [int(space.ids[i]) for i in admitted]
    diameter = diameter_estimate(space)
    if len(points) == 1:
        logger.warning(f"kappa={kappa} exceeds the space diameter ({diameter}); single-point net")
    elif kappa > diameter / 10:
        logger.warning(f"kappa={kappa} is above a tenth of the diameter ({diameter}); the net is coarse")

    net = KappaNet.from_points(space, kappa, points, adjacency_factor, rows=rows)
    logger.info(f"Extracted {len(net)}-point net at kappa={kappa} (k_Γ={net.degree_bound})")
    return net


def net_adjacency(net: KappaNet) -> dict[int, tuple[int, ...]]:
    """h ∈ N_g iff 0 < d(g, h) <= adjacency_factor * kappa."""
    return _adjacency(np.asarray(net.ids), net.point_distances, net.kappa * net.adjacency_factor)


def bounded_geometry(net: KappaNet, r: float) -> int:
    """C_r = max over host vertices x of #(Γ ∩ B_r(x))."""
    if not r > 0:
        raise InputError(f"radius must be positive, got {r}")
    return int((net.distances <= r).sum(axis=0).max())


# ---------------------------------------------------------------------------
# Audits
# ---------------------------------------------------------------------------

@dataclass
class NetAudit:
    separation: list[tuple[int, int, float]] = field(default_factory=list)
    maximality: list[tuple[int, float]] = field(default_factory=list)
    adjacency_rule: list[int] = field(default_factory=list)
    asymmetric: list[tuple[int, int]] = field(default_factory=list)
    span: list[tuple[int, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.separation or self.maximality or self.adjacency_rule
                    or self.asymmetric or self.span)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "separation": [list(v) for v in self.separation],
            "maximality": [list(v) for v in self.maximality],
            "adjacency_rule": self.adjacency_rule,
            "asymmetric": [list(v) for v in self.asymmetric],
            "span": [list(v) for v in self.span],
        }


def audit_net(net: KappaNet) -> NetAudit:
    """Exhaustive check of separation, maximality, adjacency rule, symmetry and edge span."""
    audit = NetAudit()
    ids = net.ids
    pd = net.point_distances
    m = len(ids)
    for i in range(m):
        for j in range(i + 1, m):
            if pd[i, j] < net.kappa:
                audit.separation.append((ids[i], ids[j], float(pd[i, j])))

    nearest = net.distances.min(axis=0)
    for pos in np.flatnonzero(nearest > net.kappa):
        audit.maximality.append((int(net.host.ids[pos]), float(nearest[pos])))

    expected = net_adjacency(net)
    audit.adjacency_rule = [g for g in ids if tuple(net.adjacency.get(g, ())) != expected[g]]
    for g, nbrs in net.adjacency.items():
        for h in nbrs:
            if g not in net.adjacency.get(h, ()):
                audit.asymmetric.append((g, h))

    span = net.kappa * net.adjacency_factor * net.hop_matrix
    bad_i, bad_j = np.nonzero(pd > span)
    audit.span = [(ids[i], ids[j]) for i, j in zip(bad_i, bad_j) if i < j]
    return audit


@dataclass(frozen=True)
class QiEstimate:
    a: float
    b: float
    c: float
    sampled_pairs: int
    exhaustive: bool
    a_step: float
    b_step: float

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "c": self.c,
            "sampled_pairs": self.sampled_pairs,
            "exhaustive": self.exhaustive,
            "a_step": self.a_step,
            "b_step": self.b_step,
        }


def _qi_holds(dm: np.ndarray, dg: np.ndarray, a: float, b: float) -> bool:
    return bool(np.all(dg / a - b <= dm) and np.all(dm <= a * dg + b))


def estimate_qi(
    net: KappaNet,
    a_step: float = QI_A_STEP,
    a_max: float = QI_A_MAX,
    b_step: float = QI_B_STEP,
    b_max_factor: float = QI_B_MAX_FACTOR,
    full_scan_limit: int = QI_FULL_SCAN_LIMIT,
    sampled_pairs: int = QI_SAMPLED_PAIRS,
    seed: int = 0,
) -> QiEstimate:
    """Fit quasi-isometry constants of the inclusion Γ -> host on a grid.

    ``a`` runs over {1, 1 + a_step, ..., a_max} and is minimized first; ``b``
    runs over {0, b_step*kappa, ..., b_max_factor*kappa} and is minimized for
    the chosen ``a``. ``c`` is the covering radius of Γ.
    """
    m = len(net)
    if m < 2:
        raise InputError("quasi-isometry estimation needs at least two net points")

    if m <= full_scan_limit:
        rows, cols = np.triu_indices(m, 1)
        exhaustive = True
    else:
        rng = np.random.default_rng(seed)
        rows = rng.integers(0, m, size=sampled_pairs)
        cols = rng.integers(0, m, size=sampled_pairs)
        keep = rows != cols
        rows, cols = rows[keep], cols[keep]
        exhaustive = False
    dm = net.point_distances[rows, cols]
    dg = net.hop_matrix[rows, cols]
    c = float(net.distances.min(axis=0).max())

    b_unit = b_step * net.kappa
    b_count = int(round(b_max_factor / b_step)) if b_step > 0 else 0
    a_count = int(round((a_max - 1.0) / a_step))
    for ia in range(a_count + 1):
        a = 1.0 + ia * a_step
        need = max(0.0, float(np.max(dg / a - dm)), float(np.max(dm - a * dg)))
        start = max(0, math.ceil(need / b_unit) - 1) if b_unit > 0 else 0
        for jb in range(start, b_count + 1):
            b = jb * b_unit
            if _qi_holds(dm, dg, a, b):
                return QiEstimate(a, b, c, len(dm), exhaustive, a_step, b_unit)

    a, b = 1.0 + a_count * a_step, b_count * b_unit
    violation = np.maximum(dg / a - b - dm, dm - a * dg - b)
    worst = int(np.argmax(violation))
    g, h = net.ids[rows[worst]], net.ids[cols[worst]]
    raise NetError(
        f"no (a, b) on the grid satisfies the quasi-isometry inequalities; "
        f"violating pair ({g}, {h}): d_M={dm[worst]}, d_Γ={dg[worst]}"
    )


def verify_qi(net: KappaNet, estimate: QiEstimate) -> bool:
    """Re-check an estimate against a fresh full pairwise scan of the host."""
    host = net.host
    positions = host.indices_of(net.ids)
    dm_full = csgraph.dijkstra(host.adjacency, directed=False, indices=positions)
    dm = dm_full[:, positions]
    dg = csgraph.shortest_path(net.graph, directed=False, unweighted=True)
    iu = np.triu_indices(len(positions), 1)
    if not _qi_holds(dm[iu], dg[iu], estimate.a, estimate.b):
        return False
    return bool(dm_full.min(axis=0).max() <= estimate.c)
