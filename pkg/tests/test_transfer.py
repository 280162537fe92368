"""Tests for partition-of-unity smoothing and ball-averaging discretization."""

import numpy as np
import pytest

from roydennet.errors import InputError, NetError
from roydennet.generators import hyperbolic_disk_mesh, lattice2d, path, regular_tree
from roydennet.net import KappaNet, extract_net
from roydennet.transfer import (
    DOMAIN_NET,
    DOMAIN_PROXY,
    ScalarField,
    audit_partition,
    build_partition,
    discrete_gradient_bound,
    discretize,
    smooth,
)


@pytest.fixture
def p7():
    return path(7)


@pytest.fixture
def p7_pou(p7):
    return build_partition(p7, extract_net(p7, 2.0))


# ---------------------------------------------------------------------------
# ScalarField
# ---------------------------------------------------------------------------

def test_field_rejects_bad_values():
    with pytest.raises(InputError):
        ScalarField(DOMAIN_NET, (0, 1), np.array([1.0]))
    with pytest.raises(InputError):
        ScalarField(DOMAIN_NET, (0,), np.array([np.nan]))
    with pytest.raises(InputError):
        ScalarField("mesh", (0,), np.array([1.0]))


def test_field_mapping_and_dict():
    f = ScalarField.from_mapping(DOMAIN_PROXY, {3: 1.5, 1: -2.0})
    assert f.ids == (1, 3)
    assert f[3] == 1.5
    assert f.to_dict() == {"domain": "proxy", "values": {"1": -2.0, "3": 1.5}}


# ---------------------------------------------------------------------------
# Partition of unity
# ---------------------------------------------------------------------------

def test_partition_p7_midpoint(p7_pou):
    assert p7_pou.coefficient(0, 1) == pytest.approx(0.5)
    assert p7_pou.coefficient(2, 1) == pytest.approx(0.5)
    assert p7_pou.coefficient(4, 1) == 0.0
    assert p7_pou.lipschitz == pytest.approx(1.0)


def test_sole_bump_is_one():
    space = path(13)
    net = KappaNet.from_points(space, 4.0, [0, 6, 12])
    pou = build_partition(space, net)
    # vertex 0 lies within κ of 0 only; every other bump is beyond 3κ/2
    assert pou.coefficient(0, 0) == 1.0


def test_partition_requires_mesh_scale(p7):
    net = extract_net(p7, 1.0)
    with pytest.raises(InputError, match="twice the longest edge"):
        build_partition(p7, net)


def test_partition_rejects_foreign_net(p7):
    net = extract_net(path(7), 2.0)
    with pytest.raises(InputError):
        build_partition(p7, net)


def test_partition_names_uncovered_vertex():
    space = path(13)
    net = KappaNet.from_points(space, 2.0, [0, 6, 12])
    with pytest.raises(NetError, match="vertex 3"):
        build_partition(space, net)


@pytest.mark.parametrize("space,kappa", [
    (path(64), 2.0),
    (lattice2d(12, 12), 2.0),
    (regular_tree(3, 5), 2.0),
    (hyperbolic_disk_mesh(rings=4, spacing=0.5), 2.0),
])
def test_partition_audit(space, kappa):
    pou = build_partition(space, extract_net(space, kappa))
    audit = audit_partition(pou)
    assert audit.ok, audit.to_dict()
    np.testing.assert_allclose(np.asarray(pou.xi.sum(axis=0)).ravel(), 1.0, atol=1e-12)


# ---------------------------------------------------------------------------
# smooth / discretize
# ---------------------------------------------------------------------------

def test_smooth_constant(p7_pou):
    fbar = ScalarField.on_net(p7_pou.net, np.full(4, 5.0))
    np.testing.assert_allclose(smooth(fbar, p7_pou).values, 5.0, rtol=0, atol=1e-12)


def test_smooth_p7_example(p7_pou):
    fbar = ScalarField.on_net(p7_pou.net, [0.0, 1.0, 0.0, 0.0])
    f = smooth(fbar, p7_pou)
    assert f.domain == DOMAIN_PROXY
    assert f[1] == pytest.approx(0.5)


def test_smooth_support_and_bounds():
    space = path(40)
    net = extract_net(space, 2.0)
    pou = build_partition(space, net)
    values = np.zeros(len(net))
    values[net.row_of(20)] = 1.0
    f = smooth(ScalarField.on_net(net, values), pou)
    outside = net.distances[net.row_of(20)] >= 3.0
    assert np.all(f.values[outside] == 0)
    assert f.values.min() >= 0 and f.values.max() <= 1


def test_smooth_domain_mismatch(p7, p7_pou):
    with pytest.raises(InputError, match="domain"):
        smooth(ScalarField.on_space(p7, np.zeros(7)), p7_pou)


def test_discretize_constant():
    space = lattice2d(6, 6)
    net = extract_net(space, 2.0)
    f = ScalarField.on_space(space, np.full(len(space), -3.0))
    np.testing.assert_allclose(discretize(f, net).values, -3.0)


def test_discretize_p7_example(p7):
    net = extract_net(p7, 0.5)
    f = ScalarField.on_space(p7, np.arange(7) / 6.0)
    assert discretize(f, net)[3] == pytest.approx(0.5)


def test_discretize_half_indicator():
    space = path(20)
    net = KappaNet.from_points(space, 0.5, list(range(20)))
    # ball(10, 2) = {8, ..., 12}; mark an interleaved half of it by volume
    values = np.zeros(20)
    values[[8, 10]] = 1.0
    values[[12]] = 0.5
    assert discretize(ScalarField.on_space(space, values), net)[10] == pytest.approx(0.5)


def test_discretize_domain_mismatch(p7):
    net = extract_net(p7, 2.0)
    with pytest.raises(InputError):
        discretize(ScalarField.on_net(net, np.zeros(4)), net)


def test_transfers_are_linear_and_contracting():
    space = lattice2d(8, 8)
    net = extract_net(space, 2.0)
    pou = build_partition(space, net)
    rng = np.random.default_rng(4)
    a, b = rng.uniform(-1, 1, len(net)), rng.uniform(-1, 1, len(net))
    fa, fb = smooth(ScalarField.on_net(net, a), pou), smooth(ScalarField.on_net(net, b), pou)
    combined = smooth(ScalarField.on_net(net, 2 * a - b), pou)
    np.testing.assert_allclose(combined.values, 2 * fa.values - fb.values, atol=1e-12)
    assert np.abs(fa.values).max() <= np.abs(a).max() + 1e-12

    g = rng.uniform(-1, 1, len(space))
    gstar = discretize(ScalarField.on_space(space, g), net)
    assert np.abs(gstar.values).max() <= np.abs(g).max() + 1e-12


def test_roundtrip_constant():
    space = regular_tree(3, 5)
    net = extract_net(space, 2.0)
    pou = build_partition(space, net)
    fbar = ScalarField.on_net(net, np.full(len(net), 0.25))
    np.testing.assert_allclose(discretize(smooth(fbar, pou), net).values, 0.25, atol=1e-12)


# ---------------------------------------------------------------------------
# Gradient bound
# ---------------------------------------------------------------------------

def test_gradient_single_point_net():
    space = path(5)
    pou = build_partition(space, extract_net(space, 5.0))
    bound = discrete_gradient_bound(pou)
    assert bound.measured == 0.0
    assert bound.ceiling == pytest.approx(2 * 2 / 5.0)


def test_gradient_two_point_net():
    space = path(4)
    net = extract_net(space, 2.0)
    assert net.ids == (0, 2)
    bound = discrete_gradient_bound(build_partition(space, net))
    # ξ_0 = (1/2, 1/2, 1/2, 0): the only nonzero slope is on edge 2-3
    assert bound.measured == pytest.approx(0.5)
    assert bound.ceiling == pytest.approx(3.0)


@pytest.mark.parametrize("space", [path(50), lattice2d(10, 10), regular_tree(3, 5)])
def test_gradient_below_ceiling(space):
    for kappa in (2.0, 3.0):
        bound = discrete_gradient_bound(build_partition(space, extract_net(space, kappa)))
        assert bound.measured <= bound.ceiling
