"""Tests for p-energies, the Dirichlet solver and the exhaustion split."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roydennet.errors import ConfigError, ConvergenceError, InputError, SolverError
from roydennet.generators import lattice2d, path
from roydennet.geometry import ProxySpace
from roydennet.dirichlet import (
    COMBINATORIAL,
    LENGTH_WEIGHTED,
    DirichletProblem,
    EnergySpec,
    bdp_norm,
    continuum_energy,
    dp_norm,
    energy_p,
    escape_check,
    gradient_p,
    linear_oracle,
    residual,
    royden_split,
    solve,
    sphere,
)
from roydennet.transfer import ScalarField


def _star() -> ProxySpace:
    return ProxySpace(ids=[0, 1, 2, 3], edges=[(0, 1), (0, 2), (0, 3)], lengths=[1, 1, 1], weights=[1, 1, 1, 1])


def _edge() -> ProxySpace:
    return path(2)


def _lattice_rim(width=4, height=4, slope=(1.0, 2.0)):
    space = lattice2d(width, height)
    linear = {v: slope[0] * space.coords[v][0] + slope[1] * space.coords[v][1] for v in space.ids.tolist()}
    return space, linear


P2 = EnergySpec(2.0)


# ---------------------------------------------------------------------------
# EnergySpec
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("p", [1.0, 0.5, float("nan"), float("inf")])
def test_spec_rejects_p(p):
    with pytest.raises(ConfigError, match="p must exceed 1"):
        EnergySpec(p)


def test_spec_conjugate_and_mode():
    assert EnergySpec(3.0).q == pytest.approx(1.5)
    assert EnergySpec.for_space(path(3), 2.0).mode == COMBINATORIAL
    with pytest.raises(ConfigError):
        EnergySpec(2.0, "anisotropic")


# ---------------------------------------------------------------------------
# Energies and residuals
# ---------------------------------------------------------------------------

def test_star_gradient_and_energy():
    space = _star()
    f = ScalarField.on_space(space, [1.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(gradient_p(f, space, P2), [3, 1, 1, 1])
    assert energy_p(f, space, P2) == 6.0
    assert energy_p(f, space, P2, subset={1, 2}) == 2.0


def test_edge_norms():
    space = _edge()
    f = ScalarField.on_space(space, [0.0, 1.0])
    assert energy_p(f, space, P2) == 2.0
    assert dp_norm(f, space, P2, o=1) == pytest.approx(np.sqrt(3.0))
    assert bdp_norm(f, space, P2) == pytest.approx(np.sqrt(2.0) + 1.0)


def test_constant_has_zero_energy():
    space = lattice2d(5, 5)
    f = ScalarField.on_space(space, np.full(len(space), 7.0))
    assert energy_p(f, space, EnergySpec(3.0)) == 0.0
    assert np.all(residual(f, space, EnergySpec(3.0)) == 0.0)


@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
def test_energy_homogeneity(p):
    space = lattice2d(4, 5)
    spec = EnergySpec(p)
    values = np.random.default_rng(1).normal(size=len(space))
    base = energy_p(ScalarField.on_space(space, values), space, spec)
    scaled = energy_p(ScalarField.on_space(space, -2.5 * values), space, spec)
    assert scaled == pytest.approx(2.5 ** p * base)


def test_residual_of_linear_ramp_vanishes_inside():
    space = path(6)
    f = ScalarField.on_space(space, np.arange(6) * 0.3)
    res = residual(f, space, EnergySpec(3.0))
    np.testing.assert_allclose(res[1:-1], 0.0, atol=1e-15)
    assert res[0] > 0 and res[-1] < 0


def test_length_weighted_conductances():
    space = ProxySpace(ids=[0, 1], edges=[(0, 1)], lengths=[1.0], weights=[0.5, 1.0])
    f = ScalarField.on_space(space, [0.0, 1.0])
    assert continuum_energy(f, space, 2.0) == pytest.approx(0.75)
    assert continuum_energy(f, space, 2.0, subset={0}) == 0.0
    weighted = EnergySpec(2.0, LENGTH_WEIGHTED)
    # one contribution per direction
    assert energy_p(f, space, weighted) == pytest.approx(1.5)


def test_field_must_cover_space():
    space = path(4)
    with pytest.raises(InputError):
        energy_p(ScalarField.on_space(path(3), [0.0, 1.0, 2.0]), space, P2)


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
def test_path_ramp(p):
    space = path(5)
    solution = solve(DirichletProblem(space, EnergySpec(p), {0: 0.0, 4: 1.0}))
    np.testing.assert_allclose(solution.field.values, np.arange(5) / 4.0, atol=1e-6)
    assert solution.final_residual <= 1e-8


def test_path_ramp_from_boundary_mean():
    space = path(5)
    solution = solve(DirichletProblem(space, EnergySpec(3.0), {0: 0.0, 4: 1.0}), initial="boundary-mean")
    np.testing.assert_allclose(solution.field.values, np.arange(5) / 4.0, atol=1e-4)
    assert solution.iterations > 0


def test_star_center():
    solution = solve(DirichletProblem(_star(), P2, {1: 0.0, 2: 0.0, 3: 1.0}))
    assert solution.field[0] == pytest.approx(1.0 / 3.0)


def test_constant_boundary_gives_constant():
    space = lattice2d(4, 4)
    boundary = {v: 2.0 for v in space.boundary}
    solution = solve(DirichletProblem(space, EnergySpec(3.0), boundary))
    np.testing.assert_allclose(solution.field.values, 2.0, atol=1e-9)
    assert solution.energy == pytest.approx(0.0, abs=1e-12)


def test_empty_boundary_is_ill_posed():
    with pytest.raises(SolverError, match="ill-posed"):
        DirichletProblem(path(3), P2, {})


def test_non_finite_boundary_value():
    with pytest.raises(InputError):
        DirichletProblem(path(3), P2, {0: float("nan")})


def test_convergence_failure_reports_residual():
    space, linear = _lattice_rim()
    boundary = {v: linear[v] for v in space.boundary}
    with pytest.raises(ConvergenceError) as exc:
        solve(DirichletProblem(space, EnergySpec(3.0), boundary), max_sweeps=0, initial="random", seed=5)
    assert exc.value.final_residual > 0
    assert exc.value.sweeps == 0


@pytest.mark.parametrize("kwargs", [{"tol": 0.0}, {"max_sweeps": -1}, {"mode": "red-black"}, {"initial": "zero"}])
def test_solve_rejects_options(kwargs):
    with pytest.raises(ConfigError):
        solve(DirichletProblem(path(4), P2, {0: 0.0, 3: 1.0}), **kwargs)


def test_p2_matches_linear_oracle():
    space = lattice2d(4, 4)
    rng = np.random.default_rng(11)
    boundary = {v: float(rng.uniform(-1, 1)) for v in sorted(space.boundary)}
    problem = DirichletProblem(space, P2, boundary)
    solution = solve(problem, tol=1e-11, initial="random", seed=3)
    np.testing.assert_allclose(solution.field.values, linear_oracle(problem).values, atol=1e-9)


def _tied_pair() -> ProxySpace:
    # vertices 5 and 6 share their optimal value
    edges = [(0, 5), (1, 5), (2, 5), (0, 6), (3, 6), (4, 6), (5, 6)]
    return ProxySpace(ids=range(7), edges=edges, lengths=[1.0] * 7, weights=[1.0] * 7)


@pytest.mark.parametrize("mode", ["sequential", "jacobi"])
def test_tied_free_neighbours_below_p2(mode):
    boundary = {0: 0.0, 1: 1.0, 2: 1.0, 3: 1.0, 4: 1.0}
    # t^{1/2} = 2 (1 - t)^{1/2} at p = 1.5
    solution = solve(DirichletProblem(_tied_pair(), EnergySpec(1.5), boundary), mode=mode)
    assert solution.field[5] == pytest.approx(0.8, abs=1e-9)
    assert solution.field[6] == pytest.approx(0.8, abs=1e-9)
    assert solution.final_residual <= 1e-8
    assert solution.iterations < 100


def test_linear_oracle_keeps_constant_data():
    space = lattice2d(4, 4)
    problem = DirichletProblem(space, P2, {v: 0.3 for v in space.boundary})
    assert np.all(linear_oracle(problem).values == 0.3)


def test_jacobi_matches_sequential():
    space = lattice2d(5, 4)
    rng = np.random.default_rng(2)
    boundary = {v: float(rng.uniform(0, 1)) for v in sorted(space.boundary)}
    problem = DirichletProblem(space, P2, boundary)
    sequential = solve(problem, tol=1e-10, initial="boundary-mean")
    jacobi = solve(problem, tol=1e-10, initial="boundary-mean", mode="jacobi", threads=2)
    np.testing.assert_allclose(jacobi.field.values, sequential.field.values, atol=1e-8)


@pytest.mark.parametrize("seed", [0, 9])
def test_p3_solution_is_unique(seed):
    space, linear = _lattice_rim()
    boundary = {v: linear[v] for v in space.boundary}
    solution = solve(DirichletProblem(space, EnergySpec(3.0), boundary), tol=1e-10, initial="random", seed=seed)
    expected = np.array([linear[v] for v in space.ids.tolist()])
    np.testing.assert_allclose(solution.field.values, expected, atol=1e-6)


def test_solution_to_dict():
    solution = solve(DirichletProblem(path(5), P2, {0: 0.0, 4: 1.0}))
    data = solution.to_dict()
    assert data["min"] == 0.0 and data["max"] == 1.0
    assert set(data) == {"iterations", "final_residual", "energy", "min", "max"}


# ---------------------------------------------------------------------------
# Solver properties
# ---------------------------------------------------------------------------

RIM = sorted(lattice2d(4, 4).boundary)
rim_values = st.lists(st.floats(min_value=-1.0, max_value=1.0, allow_nan=False), min_size=len(RIM), max_size=len(RIM))


@settings(max_examples=25, deadline=None)
@given(values=rim_values, p=st.sampled_from([2.0, 2.5, 4.0]))
def test_maximum_principle_and_residual(values, p):
    space = lattice2d(4, 4)
    boundary = dict(zip(RIM, values))
    solution = solve(DirichletProblem(space, EnergySpec(p), boundary), tol=1e-8)
    assert solution.field.values.min() >= min(values) - 1e-9
    assert solution.field.values.max() <= max(values) + 1e-9
    assert solution.final_residual <= 1e-8


@settings(max_examples=25, deadline=None)
@given(
    values=rim_values,
    lift=st.lists(st.floats(min_value=0.0, max_value=1.0, allow_nan=False), min_size=len(RIM), max_size=len(RIM)),
    p=st.sampled_from([2.0, 3.0]),
)
def test_comparison_principle(values, lift, p):
    space = lattice2d(4, 4)
    spec = EnergySpec(p)
    lower = solve(DirichletProblem(space, spec, dict(zip(RIM, values))), tol=1e-10)
    upper = solve(DirichletProblem(space, spec, {v: a + b for v, a, b in zip(RIM, values, lift)}), tol=1e-10)
    assert np.all(upper.field.values >= lower.field.values - 1e-4)


LEVELS = st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0])


@st.composite
def graph_problems(draw, ps=(1.5, 2.0, 2.5, 4.0)):
    """Small connected graph, boundary {0: 0, n-1: 1} plus some inner vertices, and p."""
    n = draw(st.integers(min_value=4, max_value=10))
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=2 * n))
    edges = {(i, i + 1) for i in range(n - 1)}
    edges |= {(min(a, b), max(a, b)) for a, b in extra if a != b}
    inner = draw(st.lists(st.integers(1, n - 2), unique=True, max_size=n - 3))
    boundary = {0: 0.0, n - 1: 1.0}
    boundary.update({v: draw(LEVELS) for v in inner})
    p = draw(st.sampled_from(ps))
    space = ProxySpace(ids=range(n), edges=sorted(edges), lengths=[1.0] * len(edges), weights=[1.0] * n)
    return space, boundary, p


@settings(max_examples=200, deadline=None)
@given(instance=graph_problems())
def test_random_graphs_maximum_principle(instance):
    space, boundary, p = instance
    solution = solve(DirichletProblem(space, EnergySpec(p), boundary))
    assert solution.final_residual <= 1e-8
    assert solution.field.values.min() >= -1e-9
    assert solution.field.values.max() <= 1.0 + 1e-9
    for v, value in boundary.items():
        assert solution.field[v] == value


@settings(max_examples=200, deadline=None)
@given(instance=graph_problems(ps=(1.5, 2.0, 2.5)), data=st.data())
def test_random_graphs_comparison(instance, data):
    space, boundary, p = instance
    lift = {v: data.draw(st.sampled_from([0.0, 0.25, 0.5])) for v in boundary}
    spec = EnergySpec(p)
    lower = solve(DirichletProblem(space, spec, boundary), tol=1e-10)
    upper = solve(DirichletProblem(space, spec, {v: b + lift[v] for v, b in boundary.items()}), tol=1e-10)
    assert np.all(upper.field.values >= lower.field.values - 1e-6)


@settings(max_examples=200, deadline=None)
@given(instance=graph_problems(ps=(1.5, 2.0, 2.5)))
def test_random_graphs_unique_solution(instance):
    space, boundary, p = instance
    problem = DirichletProblem(space, EnergySpec(p), boundary)
    first = solve(problem, tol=1e-10, initial="random", seed=1)
    second = solve(problem, tol=1e-10, initial="random", seed=2)
    np.testing.assert_allclose(first.field.values, second.field.values, atol=1e-6)


@settings(max_examples=200, deadline=None)
@given(
    instance=graph_problems(ps=(1.5, 2.0, 2.5)),
    alpha=st.sampled_from([-2.0, 0.5, 3.0]),
    beta=st.floats(min_value=-1.0, max_value=1.0, allow_nan=False),
)
def test_random_graphs_affine_invariance(instance, alpha, beta):
    space, boundary, p = instance
    spec = EnergySpec(p)
    base = solve(DirichletProblem(space, spec, boundary), tol=1e-10)
    moved = solve(DirichletProblem(space, spec, {v: alpha * b + beta for v, b in boundary.items()}), tol=1e-10)
    np.testing.assert_allclose(moved.field.values, alpha * base.field.values + beta, atol=1e-6 * max(1.0, abs(alpha)))


# ---------------------------------------------------------------------------
# Exhaustion and escape
# ---------------------------------------------------------------------------

def test_sphere_on_path():
    assert sphere(path(11), 5, 2) == {3, 7}
    with pytest.raises(InputError, match="exhausts"):
        sphere(path(11), 5, 5)


def test_split_of_linear_field_is_harmonic():
    space = path(11)
    f = ScalarField.on_space(space, np.arange(11, dtype=float))
    split = royden_split(space, f, EnergySpec(3.0), o=5, radii=[2, 3])
    for level in split.levels:
        np.testing.assert_allclose(level.u.values, 0.0, atol=1e-6)
    assert split.levels[0].drift is None
    assert split.levels[1].drift == pytest.approx(0.0, abs=1e-6)


def test_split_of_compact_field():
    space = path(11)
    values = np.zeros(11)
    values[5] = 1.0
    split = royden_split(space, ScalarField.on_space(space, values), P2, o=5, radii=[2])
    level = split.levels[0]
    np.testing.assert_allclose(level.h.values, 0.0, atol=1e-9)
    np.testing.assert_allclose(level.u.values, values, atol=1e-9)


def test_split_of_distance_field():
    space = path(11)
    f = ScalarField.on_space(space, np.abs(np.arange(11) - 5.0))
    level = royden_split(space, f, P2, o=5, radii=[2]).levels[0]
    np.testing.assert_allclose(level.h.values[3:8], 2.0, atol=1e-9)
    assert level.u[5] == pytest.approx(-2.0)
    assert level.u[0] == 0.0 and level.u[3] == 0.0
    assert level.sphere == {3, 7}
    assert len(level.ball) == 5


@pytest.mark.parametrize("radii", [[], [0.5, 2], [3, 2], [2, 2]])
def test_split_rejects_radii(radii):
    space = path(11)
    with pytest.raises(InputError):
        royden_split(space, ScalarField.on_space(space, np.zeros(11)), P2, o=5, radii=radii)


@pytest.mark.parametrize("sequence,expected", [
    (list(range(10)), True),
    ([3, 3, 3], False),
    ([0, 5, 0, 5, 0], False),
    ([0, 2, 1, 4, 3, 6, 5, 8], True),
])
def test_escape_check(sequence, expected):
    assert escape_check(sequence, 0, path(10)) is expected


def test_escape_check_explicit_thresholds():
    space = path(10)
    assert not escape_check([1, 2, 3, 4], 0, space, thresholds=[9])
    assert escape_check([1, 2, 3, 4], 0, space, thresholds=[0.5, 3.5])
    with pytest.raises(InputError):
        escape_check([], 0, space)
