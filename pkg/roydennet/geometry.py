"""
Proxy spaces for roydennet
--------------------------
Finite metric-measure spaces: a weighted graph whose shortest-path metric and
vertex volumes stand in for a manifold (fine mesh) or for a bounded-degree
graph (unit lengths, unit weights).

Vertices are addressed by integer ids everywhere in the public API. Internally
every per-vertex array is aligned with ``space.ids`` (ascending id order), so
reductions always run in the same order.
"""

import logging
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from roydennet.config import DISTANCE_CACHE_SIZE
from roydennet.errors import InputError, SpaceFormatError, UnknownVertexError

logger = logging.getLogger("RoydenNet.geometry")

KIND_GRAPH = "combinatorial-graph"
KIND_MANIFOLD = "manifold-proxy"
KINDS = (KIND_GRAPH, KIND_MANIFOLD)

# Centers per batch when scanning every ball of a large space.
_ROW_BATCH = 256


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class ProxySpace:
    """Connected, loop-free weighted graph with vertex volumes.

    Immutable after construction. The only mutable state is the per-source
    distance cache, which is capped and guarded by a lock.
    """

    def __init__(
        self,
        ids: Iterable[int],
        edges: Iterable[tuple[int, int]],
        lengths: Iterable[float],
        weights: Iterable[float],
        kind: str | None = None,
        coords: dict[int, tuple[float, ...]] | None = None,
        boundary: Iterable[int] | None = None,
        cache_size: int = DISTANCE_CACHE_SIZE,
    ):
        ids = [int(v) for v in ids]
        weights = [float(w) for w in weights]
        if not ids:
            raise InputError("space has no vertices")
        if len(ids) != len(weights):
            raise InputError("one weight per vertex is required")
        if len(set(ids)) != len(ids):
            raise InputError("duplicate vertex ids")

        order = np.argsort(ids, kind="stable")
        self.ids = _frozen(np.asarray(ids, dtype=np.int64)[order])
        self.weights = _frozen(np.asarray(weights, dtype=np.float64)[order])
        self._index = {int(v): i for i, v in enumerate(self.ids)}
        n = len(self.ids)

        bad = ~(np.isfinite(self.weights) & (self.weights > 0))
        if bad.any():
            v = int(self.ids[np.argmax(bad)])
            raise InputError(f"vertex {v}: weight must be positive and finite")

        pairs: dict[tuple[int, int], float] = {}
        for (a, b), length in zip(edges, lengths):
            ia, ib = self.index_of(a), self.index_of(b)
            if ia == ib:
                raise InputError(f"self-loop on vertex {a}")
            length = float(length)
            if not (math.isfinite(length) and length > 0):
                raise InputError(f"edge {a}-{b}: length must be positive and finite")
            key = (min(ia, ib), max(ia, ib))
            if key in pairs:
                raise InputError(f"duplicate edge {a}-{b}")
            pairs[key] = length

        keys = sorted(pairs)
        self.edge_index = _frozen(np.asarray(keys, dtype=np.int64).reshape(-1, 2))
        self.edge_lengths = _frozen(np.asarray([pairs[k] for k in keys], dtype=np.float64))

        rows = np.concatenate([self.edge_index[:, 0], self.edge_index[:, 1]])
        cols = np.concatenate([self.edge_index[:, 1], self.edge_index[:, 0]])
        vals = np.concatenate([self.edge_lengths, self.edge_lengths])
        adj = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
        adj.sort_indices()
        self.adjacency = adj

        ncomp, _ = csgraph.connected_components(adj, directed=False)
        if ncomp != 1:
            raise InputError(f"space is disconnected ({ncomp} components)")

        self.neighbors = [adj.indices[adj.indptr[i]:adj.indptr[i + 1]] for i in range(n)]
        self.neighbor_lengths = [adj.data[adj.indptr[i]:adj.indptr[i + 1]] for i in range(n)]
        self.degrees = _frozen(np.diff(adj.indptr).astype(np.int64))
        self.degree_bound = int(self.degrees.max()) if n else 0

        unit = bool(np.all(self.edge_lengths == 1.0) and np.all(self.weights == 1.0))
        if kind is None:
            kind = KIND_GRAPH if unit else KIND_MANIFOLD
        if kind not in KINDS:
            raise InputError(f"unknown space kind {kind!r}")
        if kind == KIND_GRAPH and not unit:
            raise InputError("a combinatorial graph needs unit lengths and unit weights")
        self.kind = kind

        self.coords = {int(k): tuple(float(x) for x in v) for k, v in (coords or {}).items()}
        if boundary is None:
            self.boundary = frozenset(
                int(self.ids[i]) for i in range(n) if self.degrees[i] < self.degree_bound
            )
            self.boundary_declared = False
        else:
            for v in boundary:
                self.index_of(v)
            self.boundary = frozenset(int(v) for v in boundary)
            self.boundary_declared = True

        self._cache_size = max(0, int(cache_size))
        self._cache: OrderedDict[int, np.ndarray] = OrderedDict()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, vertex) -> bool:
        return vertex in self._index

    def __repr__(self) -> str:
        return (
            f"ProxySpace(kind={self.kind!r}, vertices={len(self)}, "
            f"edges={len(self.edge_lengths)}, k={self.degree_bound})"
        )

    @property
    def max_edge_length(self) -> float:
        return float(self.edge_lengths.max()) if len(self.edge_lengths) else 0.0

    def index_of(self, vertex) -> int:
        try:
            return self._index[int(vertex)]
        except (KeyError, TypeError, ValueError):
            raise UnknownVertexError(vertex) from None

    def indices_of(self, vertices: Iterable[int]) -> np.ndarray:
        return np.asarray([self.index_of(v) for v in vertices], dtype=np.int64)

    # ------------------------------------------------------------------
    # Shortest paths
    # ------------------------------------------------------------------

    def distance_rows(self, positions, limit: float = np.inf) -> np.ndarray:
        """Distances from each source position to every vertex, one row per source.

        Rows computed without a limit go through the capped LRU cache; limited
        rows (entries beyond ``limit`` are inf) are never cached.
        """
        positions = np.atleast_1d(np.asarray(positions, dtype=np.int64))
        if not np.isinf(limit) or self._cache_size == 0:
            return csgraph.dijkstra(self.adjacency, directed=False, indices=positions, limit=limit)

        out = np.empty((len(positions), len(self)), dtype=np.float64)
        missing = []
        with self._lock:
            for row, i in enumerate(positions):
                cached = self._cache.get(int(i))
                if cached is None:
                    missing.append(row)
                else:
                    self._cache.move_to_end(int(i))
                    out[row] = cached
        if missing:
            fresh = csgraph.dijkstra(self.adjacency, directed=False, indices=positions[missing])
            with self._lock:
                for row, dist in zip(missing, fresh):
                    out[row] = dist
                    dist = _frozen(dist.copy())
                    self._cache[int(positions[row])] = dist
                    while len(self._cache) > self._cache_size:
                        self._cache.popitem(last=False)
        return out

    def distances_from(self, vertex: int) -> np.ndarray:
        """Distances from ``vertex`` to every vertex, aligned with ``ids``."""
        return self.distance_rows([self.index_of(vertex)])[0]

    def iter_distance_rows(self, positions, limit: float = np.inf):
        """Yield (positions_chunk, rows) in fixed-size batches (uncached)."""
        positions = np.asarray(positions, dtype=np.int64)
        for start in range(0, len(positions), _ROW_BATCH):
            chunk = positions[start:start + _ROW_BATCH]
            yield chunk, csgraph.dijkstra(self.adjacency, directed=False, indices=chunk, limit=limit)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def distance(space: ProxySpace, a: int, b: int) -> float:
    ib = space.index_of(b)
    return float(space.distances_from(a)[ib])


def ball(space: ProxySpace, center: int, r: float) -> frozenset[int]:
    """Closed metric ball {y : d(center, y) <= r}."""
    if r < 0:
        raise InputError(f"ball radius must be nonnegative, got {r}")
    row = space.distances_from(center)
    return frozenset(int(v) for v in space.ids[row <= r])


def volume(space: ProxySpace, vertices: Iterable[int]) -> float:
    positions = np.sort(space.indices_of(set(vertices)))
    return float(space.weights[positions].sum()) if len(positions) else 0.0


def diameter_estimate(space: ProxySpace) -> float:
    """Double-sweep lower bound on the diameter (exact on trees and paths)."""
    first = space.distance_rows([0])[0]
    far = int(np.argmax(first))
    return float(space.distance_rows([far])[0].max())


def geodesic(space: ProxySpace, a: int, b: int) -> list[int]:
    """Vertex ids of one shortest path from a to b (inclusive)."""
    ia, ib = space.index_of(a), space.index_of(b)
    _, pred = csgraph.dijkstra(
        space.adjacency, directed=False, indices=ia, return_predecessors=True
    )
    path = [ib]
    while path[-1] != ia:
        path.append(int(pred[path[-1]]))
    return [int(space.ids[i]) for i in reversed(path)]


@dataclass(frozen=True)
class BallVolumeProfile:
    radii: tuple[float, ...]
    vmin: tuple[float, ...]
    vmax: tuple[float, ...]
    centers: int

    def v0(self, r: float) -> float:
        return self.vmin[self.radii.index(r)]

    def v1(self, r: float) -> float:
        return self.vmax[self.radii.index(r)]

    def to_dict(self) -> dict:
        return {
            "radii": list(self.radii),
            "vmin": list(self.vmin),
            "vmax": list(self.vmax),
            "centers": self.centers,
        }


def volume_profile(
    space: ProxySpace,
    radii: Iterable[float],
    sample_centers: Iterable[int] | None = None,
) -> BallVolumeProfile:
    """Per-radius min/max ball volume over the sampled centers (all vertices by default)."""
    radii = tuple(float(r) for r in radii)
    if not radii:
        raise InputError("at least one radius is required")
    if any(r < 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise InputError("radii must be nonnegative and strictly increasing")
    if sample_centers is None:
        positions = np.arange(len(space))
    else:
        positions = space.indices_of(sample_centers)
        if len(positions) == 0:
            raise InputError("sample_centers must be nonempty")

    vmin = np.full(len(radii), np.inf)
    vmax = np.full(len(radii), -np.inf)
    for _, rows in space.iter_distance_rows(positions, limit=radii[-1]):
        for j, r in enumerate(radii):
            vols = (rows <= r).astype(np.float64) @ space.weights
            vmin[j] = min(vmin[j], vols.min())
            vmax[j] = max(vmax[j], vols.max())
    return BallVolumeProfile(
        radii=radii,
        vmin=tuple(float(v) for v in vmin),
        vmax=tuple(float(v) for v in vmax),
        centers=len(positions),
    )


# ---------------------------------------------------------------------------
# Space files
# ---------------------------------------------------------------------------

def _parse_float(token: str, lineno: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise SpaceFormatError(lineno, f"bad {what} {token!r}") from None
    if not math.isfinite(value):
        raise SpaceFormatError(lineno, f"{what} must be finite")
    return value


def _parse_id(token: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise SpaceFormatError(lineno, f"bad vertex id {token!r}") from None


def load_space(stream: TextIO, cache_size: int = DISTANCE_CACHE_SIZE) -> ProxySpace:
    """Parse a line-based space file.

    Records (``#`` starts a comment line)::

        v <id> [x y z ...] [w=<weight>]
        e <id> <id> [<length> | len=<length>]
        b <id> [<id> ...]
        kind <combinatorial-graph|manifold-proxy>
    """
    vertices: dict[int, tuple[tuple[float, ...], float]] = {}
    edges: dict[tuple[int, int], tuple[float, int]] = {}
    boundary: list[int] | None = None
    kind = None

    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        tag = tokens[0]

        if tag == "v":
            if len(tokens) < 2:
                raise SpaceFormatError(lineno, "vertex record needs an id")
            vid = _parse_id(tokens[1], lineno)
            if vid in vertices:
                raise SpaceFormatError(lineno, f"duplicate vertex {vid}")
            weight = 1.0
            coords = []
            for tok in tokens[2:]:
                if tok.startswith("w="):
                    weight = _parse_float(tok[2:], lineno, "weight")
                else:
                    coords.append(_parse_float(tok, lineno, "coordinate"))
            if weight <= 0:
                raise SpaceFormatError(lineno, f"nonpositive weight {weight}")
            vertices[vid] = (tuple(coords), weight)

        elif tag == "e":
            if len(tokens) not in (3, 4):
                raise SpaceFormatError(lineno, "edge record is 'e <id> <id> [len=<length>]'")
            a, b = _parse_id(tokens[1], lineno), _parse_id(tokens[2], lineno)
            if a == b:
                raise SpaceFormatError(lineno, f"self-loop on vertex {a}")
            length = 1.0
            if len(tokens) == 4:
                tok = tokens[3][4:] if tokens[3].startswith("len=") else tokens[3]
                length = _parse_float(tok, lineno, "length")
            if length <= 0:
                raise SpaceFormatError(lineno, f"nonpositive length {length}")
            key = (min(a, b), max(a, b))
            if key in edges:
                raise SpaceFormatError(lineno, f"duplicate edge {a}-{b}")
            edges[key] = (length, lineno)

        elif tag == "b":
            boundary = (boundary or []) + [_parse_id(t, lineno) for t in tokens[1:]]

        elif tag == "kind":
            if len(tokens) != 2 or tokens[1] not in KINDS:
                raise SpaceFormatError(lineno, f"kind must be one of {', '.join(KINDS)}")
            kind = tokens[1]

        else:
            raise SpaceFormatError(lineno, f"unknown record {tag!r}")

    for (a, b), (_, lineno) in edges.items():
        for v in (a, b):
            if v not in vertices:
                raise SpaceFormatError(lineno, f"edge refers to undeclared vertex {v}")
    if boundary is not None:
        unknown = [v for v in boundary if v not in vertices]
        if unknown:
            raise InputError(f"boundary refers to undeclared vertex {unknown[0]}")

    ids = list(vertices)
    space = ProxySpace(
        ids=ids,
        edges=list(edges),
        lengths=[length for length, _ in edges.values()],
        weights=[vertices[v][1] for v in ids],
        kind=kind,
        coords={v: c for v, (c, _) in vertices.items() if c},
        boundary=boundary,
        cache_size=cache_size,
    )
    logger.debug(f"Loaded {space!r}")
    return space


def write_space(space: ProxySpace, stream: TextIO) -> None:
    """Write ``space`` in the format read by :func:`load_space`."""
    stream.write(f"# {len(space)} vertices, {len(space.edge_lengths)} edges\n")
    stream.write(f"kind {space.kind}\n")
    for v, w in zip(space.ids, space.weights):
        parts = ["v", str(int(v))]
        parts += [repr(x) for x in space.coords.get(int(v), ())]
        if w != 1.0:
            parts.append(f"w={float(w)!r}")
        stream.write(" ".join(parts) + "\n")
    for (i, j), length in zip(space.edge_index, space.edge_lengths):
        line = f"e {int(space.ids[i])} {int(space.ids[j])}"
        if length != 1.0:
            line += f" len={float(length)!r}"
        stream.write(line + "\n")
    if space.boundary:
        stream.write("b " + " ".join(str(v) for v in sorted(space.boundary)) + "\n")
