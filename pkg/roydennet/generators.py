"""Deterministic fixture spaces: path, square lattice, regular tree and a hyperbolic disk mesh."""

import logging
import math

import numpy as np

from roydennet.errors import ConfigError
from roydennet.geometry import KIND_GRAPH, KIND_MANIFOLD, ProxySpace

logger = logging.getLogger("RoydenNet.generators")


def _unit_graph(ids, edges, boundary, coords=None) -> ProxySpace:
    return ProxySpace(
        ids=ids,
        edges=edges,
        lengths=[1.0] * len(edges),
        weights=[1.0] * len(ids),
        kind=KIND_GRAPH,
        coords=coords,
        boundary=boundary,
    )


def path(n: int = 64) -> ProxySpace:
    if n < 2:
        raise ConfigError("n", "a path needs at least 2 vertices")
    ids = list(range(n))
    edges = [(i, i + 1) for i in range(n - 1)]
    return _unit_graph(ids, edges, [0, n - 1], coords={i: (float(i),) for i in ids})


def lattice2d(width: int = 32, height: int = 32) -> ProxySpace:
    if width < 2 or height < 2:
        raise ConfigError("width", "a lattice needs width and height of at least 2")
    ids, edges, rim, coords = [], [], [], {}
    for r in range(height):
        for c in range(width):
            v = r * width + c
            ids.append(v)
            coords[v] = (float(c), float(r))
            if c + 1 < width:
                edges.append((v, v + 1))
            if r + 1 < height:
                edges.append((v, v + width))
            if r in (0, height - 1) or c in (0, width - 1):
                rim.append(v)
    return _unit_graph(ids, edges, rim, coords)


def regular_tree(degree: int = 3, depth: int = 8) -> ProxySpace:
    """Root with ``degree`` children, every other inner vertex with ``degree - 1``."""
    if degree < 2:
        raise ConfigError("degree", "tree degree must be at least 2")
    if depth < 1:
        raise ConfigError("depth", "tree depth must be at least 1")
    ids, edges = [0], []
    level = [0]
    for d in range(depth):
        children = degree if d == 0 else degree - 1
        nxt = []
        for parent in level:
            for _ in range(children):
                v = len(ids)
                ids.append(v)
                edges.append((parent, v))
                nxt.append(v)
        level = nxt
    return _unit_graph(ids, edges, level)


def _ring_edges(first: list[int], first_angles, second: list[int], second_angles) -> list[tuple[int, int]]:
    """Zip two concentric rings into triangles by merging their angle sequences."""
    m, n = len(first), len(second)
    i = j = 0
    edges = [(first[0], second[0])]
    while i < m or j < n:
        next_a = first_angles[i + 1] if i + 1 < m else 2 * math.pi
        next_b = second_angles[j + 1] if j + 1 < n else 2 * math.pi
        if j >= n or (i < m and next_a <= next_b):
            i += 1
        else:
            j += 1
        edges.append((first[i % m], second[j % n]))
    return edges


def _hyperbolic_distance(r1: float, t1: float, r2: float, t2: float) -> float:
    c = math.cosh(r1) * math.cosh(r2) - math.sinh(r1) * math.sinh(r2) * math.cos(t1 - t2)
    return math.acosh(max(1.0, c))


def hyperbolic_disk_mesh(rings: int = 11, spacing: float = 0.5) -> ProxySpace:
    """Triangulated patch of the hyperbolic plane.

    Ring j sits at hyperbolic radius j·spacing with max(3, round(2π sinh(j·spacing)/spacing))
    equally spaced vertices. Edge lengths are hyperbolic distances, vertex weights the
    areas of the annular cells around each ring, coordinates Poincaré-disk positions.
    The outer ring is the designated boundary.
    """
    if rings < 1:
        raise ConfigError("rings", "the mesh needs at least one ring")
    if not (spacing > 0 and math.isfinite(spacing)):
        raise ConfigError("spacing", "ring spacing must be positive")
    h = spacing
    sizes = ring_sizes(rings, spacing)
    polar: dict[int, tuple[float, float]] = {0: (0.0, 0.0)}
    weights = {0: 2 * math.pi * (math.cosh(h / 2) - 1)}
    layers = [[0]]
    angles = [[0.0]]
    for j in range(1, rings + 1):
        rho = j * h
        count = int(sizes[j])
        outer = rho if j == rings else rho + h / 2
        cell = 2 * math.pi * (math.cosh(outer) - math.cosh(rho - h / 2)) / count
        start = len(polar)
        layer, theta = [], []
        for i in range(count):
            v = start + i
            t = 2 * math.pi * i / count
            polar[v] = (rho, t)
            weights[v] = cell
            layer.append(v)
            theta.append(t)
        layers.append(layer)
        angles.append(theta)

    pairs = set()
    for j in range(1, rings + 1):
        layer = layers[j]
        for a, b in zip(layer, layer[1:] + layer[:1]):
            pairs.add((min(a, b), max(a, b)))
        for a, b in _ring_edges(layers[j - 1], angles[j - 1], layer, angles[j]):
            pairs.add((min(a, b), max(a, b)))

    edges = sorted(pairs)
    lengths = [_hyperbolic_distance(*polar[a], *polar[b]) for a, b in edges]
    ids = sorted(polar)
    coords = {
        v: (math.tanh(r / 2) * math.cos(t), math.tanh(r / 2) * math.sin(t))
        for v, (r, t) in polar.items()
    }
    space = ProxySpace(
        ids=ids,
        edges=edges,
        lengths=lengths,
        weights=[weights[v] for v in ids],
        kind=KIND_MANIFOLD,
        coords=coords,
        boundary=layers[-1],
    )
    logger.info(f"Hyperbolic disk mesh: {len(space)} vertices, {len(edges)} edges")
    return space


GENERATORS = {
    "path": path,
    "lattice2d": lattice2d,
    "regular-tree": regular_tree,
    "hyperbolic-disk-mesh": hyperbolic_disk_mesh,
}

PARAMETERS = {
    "path": ("n",),
    "lattice2d": ("width", "height"),
    "regular-tree": ("degree", "depth"),
    "hyperbolic-disk-mesh": ("rings", "spacing"),
}


def generate_space(kind: str, **params) -> ProxySpace:
    """Build a fixture space; parameters not used by ``kind`` must be None."""
    if kind not in GENERATORS:
        raise ConfigError("kind", f"unknown space kind {kind!r}; expected one of {', '.join(GENERATORS)}")
    allowed = PARAMETERS[kind]
    for name, value in params.items():
        if value is not None and name not in allowed:
            raise ConfigError(name, f"{kind} does not take --{name}")
    kwargs = {k: v for k, v in params.items() if v is not None}
    return GENERATORS[kind](**kwargs)


def ring_sizes(rings: int, spacing: float) -> np.ndarray:
    """Vertex count per ring of :func:`hyperbolic_disk_mesh` (ring 0 is the centre)."""
    sizes = [1] + [max(3, round(2 * math.pi * math.sinh(j * spacing) / spacing)) for j in range(1, rings + 1)]
    return np.asarray(sizes)
