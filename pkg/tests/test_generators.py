"""Tests for the fixture space generators."""

import io

import numpy as np
import pytest

from roydennet.errors import ConfigError
from roydennet.generators import (
    generate_space,
    hyperbolic_disk_mesh,
    lattice2d,
    path,
    regular_tree,
    ring_sizes,
)
from roydennet.geometry import KIND_GRAPH, KIND_MANIFOLD, diameter_estimate, load_space, write_space


def test_path():
    space = path(5)
    assert len(space) == 5
    assert len(space.edge_lengths) == 4
    assert space.boundary == {0, 4}
    assert diameter_estimate(space) == 4


def test_lattice():
    space = lattice2d(3, 3)
    assert len(space) == 9
    assert len(space.edge_lengths) == 12
    assert space.boundary == set(range(9)) - {4}
    assert space.degree_bound == 4
    assert space.coords[5] == (2.0, 1.0)


def test_regular_tree():
    space = regular_tree(3, 4)
    assert len(space) == 1 + 3 + 6 + 12 + 24
    assert space.degree_bound == 3
    assert len(space.boundary) == 24
    assert space.kind == KIND_GRAPH


def test_hyperbolic_mesh():
    space = hyperbolic_disk_mesh(rings=3, spacing=0.5)
    sizes = ring_sizes(3, 0.5)
    assert sizes.tolist() == [1, 7, 15, 27]
    assert len(space) == sizes.sum()
    assert space.kind == KIND_MANIFOLD
    assert space.boundary == set(range(sizes[:-1].sum(), sizes.sum()))
    radii = np.hypot(*np.asarray([space.coords[v] for v in space.ids.tolist()]).T)
    assert radii.max() < 1.0
    assert np.all(space.edge_lengths > 0)
    # every edge is shorter than twice the ring spacing
    assert space.max_edge_length < 1.0


def test_hyperbolic_mesh_weights_cover_disk():
    rings, spacing = 4, 0.5
    space = hyperbolic_disk_mesh(rings=rings, spacing=spacing)
    # cells tile the hyperbolic disk of radius rings·spacing
    area = 2 * np.pi * (np.cosh(rings * spacing) - 1)
    assert space.weights.sum() == pytest.approx(area)


@pytest.mark.parametrize("kind,params", [
    ("path", {"n": 6}),
    ("lattice2d", {"width": 4, "height": 3}),
    ("regular-tree", {"degree": 3, "depth": 3}),
    ("hyperbolic-disk-mesh", {"rings": 2, "spacing": 0.5}),
])
def test_write_then_load(kind, params):
    space = generate_space(kind, **params)
    buf = io.StringIO()
    write_space(space, buf)
    buf.seek(0)
    reloaded = load_space(buf)
    assert reloaded.ids.tolist() == space.ids.tolist()
    assert reloaded.edge_index.tolist() == space.edge_index.tolist()
    np.testing.assert_array_equal(reloaded.edge_lengths, space.edge_lengths)
    np.testing.assert_array_equal(reloaded.weights, space.weights)
    assert reloaded.boundary == space.boundary
    assert reloaded.kind == space.kind


def test_generate_ignores_unset_parameters():
    space = generate_space("path", n=7, width=None)
    assert len(space) == 7


@pytest.mark.parametrize("kind,params", [
    ("torus", {}),
    ("path", {"n": 1}),
    ("path", {"width": 3}),
    ("lattice2d", {"width": 1, "height": 4}),
    ("regular-tree", {"degree": 1}),
    ("hyperbolic-disk-mesh", {"spacing": 0.0}),
    ("hyperbolic-disk-mesh", {"rings": 0}),
])
def test_generate_rejects(kind, params):
    with pytest.raises(ConfigError):
        generate_space(kind, **params)


def test_default_hyperbolic_mesh():
    space = hyperbolic_disk_mesh()
    assert len(space) == ring_sizes(11, 0.5).sum() == 3884
    assert len(space.boundary) == 1537
    # κ = 1.75 still admits a partition of unity
    assert 2 * space.max_edge_length < 1.75
