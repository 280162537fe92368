"""
Function transfer between a net and its host
--------------------------------------------
Partition-of-unity smoothing (net field -> host field) and ball-averaging
discretization (host field -> net field).

The bump for net point g is the distance clamp

    eta_g(x) = clamp((3κ/2 - d(g, x)) / (κ/2), 0, 1)

which equals 1 on B_κ(g), vanishes outside B_{3κ/2}(g) and is (2/κ)-Lipschitz.
"""

import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import sparse

from roydennet.config import AVERAGING_FACTOR, BUMP_CORE_FACTOR, BUMP_SUPPORT_FACTOR
from roydennet.errors import InputError, NetError
from roydennet.geometry import ProxySpace
from roydennet.net import KappaNet

logger = logging.getLogger("RoydenNet.transfer")

DOMAIN_PROXY = "proxy"
DOMAIN_NET = "net"

NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real function on the vertices of a space or a net, aligned with ``ids``."""

    domain: str
    ids: tuple[int, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.domain not in (DOMAIN_PROXY, DOMAIN_NET):
            raise InputError(f"unknown field domain {self.domain!r}")
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (len(self.ids),):
            raise InputError("field needs exactly one value per vertex")
        if not np.all(np.isfinite(values)):
            raise InputError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def on_space(cls, space: ProxySpace, values, domain: str = DOMAIN_PROXY) -> "ScalarField":
        return cls(domain, tuple(int(v) for v in space.ids), np.asarray(values, dtype=np.float64))

    @classmethod
    def on_net(cls, net: KappaNet, values) -> "ScalarField":
        return cls(DOMAIN_NET, net.ids, np.asarray(values, dtype=np.float64))

    @classmethod
    def from_mapping(cls, domain: str, values: Mapping[int, float]) -> "ScalarField":
        ids = tuple(sorted(int(k) for k in values))
        return cls(domain, ids, np.asarray([float(values[k]) for k in ids]))

    def __getitem__(self, vertex: int) -> float:
        return float(self.values[self.ids.index(int(vertex))])

    def to_dict(self) -> dict:
        return {"domain": self.domain, "values": {str(g): float(v) for g, v in zip(self.ids, self.values)}}

    def require(self, domain: str, ids: tuple[int, ...]) -> None:
        if self.domain != domain or tuple(self.ids) != tuple(ids):
            raise InputError(f"field domain mismatch: expected a {domain} field on {len(ids)} vertices")


@dataclass(frozen=True, eq=False)
class PartitionOfUnity:
    """ξ_g for every net point g: a sparse (net points x host vertices) matrix."""

    net: KappaNet = field(repr=False)
    core: float
    support: float
    lipschitz: float
    xi: sparse.csr_matrix = field(repr=False)

    @property
    def kappa(self) -> float:
        return self.net.kappa

    def coefficient(self, g: int, x: int) -> float:
        return float(self.xi[self.net.row_of(g), self.net.host.index_of(x)])


def bump_values(distances: np.ndarray, core: float, support: float) -> np.ndarray:
    return np.clip((support - distances) / (support - core), 0.0, 1.0)


def build_partition(
    space: ProxySpace,
    net: KappaNet,
    core_factor: float = BUMP_CORE_FACTOR,
    support_factor: float = BUMP_SUPPORT_FACTOR,
) -> PartitionOfUnity:
    if net.host is not space:
        raise InputError("net was not extracted from this space")
    kappa = net.kappa
    if kappa < 2 * space.max_edge_length:
        raise InputError(
            f"kappa={kappa} must be at least twice the longest edge ({space.max_edge_length})"
        )
    core, support = core_factor * kappa, support_factor * kappa
    eta = bump_values(net.distances, core, support)
    # Column sums in ascending net-point order.
    total = np.add.reduce(eta, axis=0)
    empty = np.flatnonzero(total <= 0)
    if len(empty):
        v = int(space.ids[empty[0]])
        raise NetError(f"no bump covers vertex {v}; the net is not maximal")
    xi = sparse.csr_matrix(eta / total)
    logger.debug(f"Partition of unity over {len(net)} net points, nnz={xi.nnz}")
    return PartitionOfUnity(
        net=net, core=core, support=support, lipschitz=1.0 / (support - core), xi=xi
    )


def smooth(fbar: ScalarField, pou: PartitionOfUnity) -> ScalarField:
    """f(x) = Σ_g f̄(g) ξ_g(x)."""
    fbar.require(DOMAIN_NET, pou.net.ids)
    values = pou.xi.T @ fbar.values
    return ScalarField.on_space(pou.net.host, values)


def averaging_mask(net: KappaNet, radius_factor: float = AVERAGING_FACTOR) -> np.ndarray:
    return net.distances <= radius_factor * net.kappa


def discretize(f: ScalarField, net: KappaNet, radius_factor: float = AVERAGING_FACTOR) -> ScalarField:
    """f*(g) = volume-weighted mean of f over B_{4κ}(g)."""
    space = net.host
    f.require(DOMAIN_PROXY, tuple(int(v) for v in space.ids))
    mask = averaging_mask(net, radius_factor).astype(np.float64)
    weighted = mask * space.weights
    values = (weighted @ f.values) / weighted.sum(axis=1)
    return ScalarField.on_net(net, values)


@dataclass(frozen=True)
class GradientBound:
    measured: float
    ceiling: float
    lipschitz: float
    degree_bound: int

    def to_dict(self) -> dict:
        return {
            "measured": self.measured,
            "ceiling": self.ceiling,
            "lipschitz": self.lipschitz,
            "degree_bound": self.degree_bound,
        }


def discrete_gradient_bound(pou: PartitionOfUnity) -> GradientBound:
    """max over host edges (x, y) and net points g of |ξ_g(x) - ξ_g(y)| / ℓ_xy."""
    space = pou.net.host
    k = pou.net.degree_bound
    ceiling = (k + 2) * pou.lipschitz
    if len(space.edge_lengths) == 0:
        return GradientBound(0.0, ceiling, pou.lipschitz, k)
    xi = pou.xi.toarray()
    ex, ey = space.edge_index[:, 0], space.edge_index[:, 1]
    slopes = np.abs(xi[:, ex] - xi[:, ey]) / space.edge_lengths
    return GradientBound(float(slopes.max()), ceiling, pou.lipschitz, k)


@dataclass
class PartitionAudit:
    normalization_error: float
    support_violations: int
    range_violations: int
    star_violations: int

    @property
    def ok(self) -> bool:
        return (
            self.normalization_error <= NORMALIZATION_TOL
            and self.support_violations == 0
            and self.range_violations == 0
            and self.star_violations == 0
        )

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "normalization_error": self.normalization_error,
            "support_violations": self.support_violations,
            "range_violations": self.range_violations,
            "star_violations": self.star_violations,
        }


def audit_partition(pou: PartitionOfUnity) -> PartitionAudit:
    """Normalization, support, range and the star identity on every κ-ball."""
    net = pou.net
    xi = pou.xi.toarray()
    normalization = float(np.abs(xi.sum(axis=0) - 1.0).max())
    support = int(np.count_nonzero((net.distances >= pou.support) & (xi != 0)))
    out_of_range = int(np.count_nonzero((xi < 0) | (xi > 1)))

    star = 0
    for row, g in enumerate(net.ids):
        rows = [row] + [net.row_of(h) for h in net.adjacency[g]]
        inside = net.distances[row] <= pou.core
        if not inside.any():
            continue
        # every bump alive on B_κ(g) belongs to g or one of its neighbours
        outside = np.ones(len(net), dtype=bool)
        outside[rows] = False
        if np.any(xi[np.ix_(outside, inside)] != 0):
            star += 1
            continue
        sums = xi[np.ix_(rows, inside)].sum(axis=0)
        if np.any(np.abs(sums - 1.0) > NORMALIZATION_TOL):
            star += 1
    return PartitionAudit(normalization, support, out_of_range, star)
