import numpy as np
import pytest

from chronodelta.charge_solver import ChargeSolution, SolverConfig, SolverMethod, solve
from chronodelta.coupling import CouplingPath
from chronodelta.errors import DomainError, GridMismatchError, ResolutionError
from chronodelta.free_propagator import evolve
from chronodelta.oracles import BoundState, bound_state_evolution
from chronodelta.signal_core import Axis, ComplexSignal, UniformGrid
from chronodelta.wavefield import (
    Route,
    WaveField,
    charge_mismatch,
    derivative_jump,
    diagnose,
    jump_residual,
    mass_and_h1,
    reconstruct,
    reconstruct_duhamel,
    reconstruct_fourier,
    snapshot_times,
    time_derivative,
)


@pytest.fixture
def space() -> UniformGrid:
    return UniformGrid.centered(40.0, 1024)


@pytest.fixture
def charge_grid() -> UniformGrid:
    return UniformGrid.span(0.0, 1.2, 121)


@pytest.fixture
def bound_charge(charge_grid: UniformGrid) -> ChargeSolution:
    """The exact charge -2 e^{it} of the alpha = -2 bound state."""
    q = ComplexSignal(charge_grid, -2.0 * np.exp(1j * charge_grid.points), Axis.TIME)
    return ChargeSolution(
        q=q,
        q0=q,
        method=SolverMethod.MARCH,
        iterations_per_window=[],
        window_length=charge_grid.step,
        residual=0.0,
        contraction_factor_estimate=float("nan"),
        alpha_T=np.full(charge_grid.count, -2.0),
    )


@pytest.fixture
def bound_u0(space: UniformGrid) -> ComplexSignal:
    return BoundState.build(-2.0, space).profile


def relative_error(field: WaveField, exact) -> float:
    return max((u - exact(t)).l2_norm() / exact(t).l2_norm() for t, u in zip(field.times.points, field.snapshots))


def test_fourier_route_reproduces_bound_state(space, bound_u0, bound_charge):
    """With the exact charge the Fourier route returns e^{it} times the bound state."""
    field = reconstruct_fourier(bound_u0, bound_charge, snapshot_times(1.0, 3))
    assert field.route is Route.FOURIER
    assert field.snapshot_at(0.5) is field.snapshots[1]
    assert relative_error(field, lambda t: bound_state_evolution(-2.0, t, space)) < 5e-3


def test_duhamel_route_reproduces_bound_state(space, bound_u0, bound_charge):
    """The point-source route agrees with the bound state up to the band limit of e^{it Delta} u0."""
    field = reconstruct_duhamel(bound_u0, bound_charge, snapshot_times(1.0, 3))
    assert field.route is Route.DUHAMEL
    assert relative_error(field, lambda t: bound_state_evolution(-2.0, t, space)) < 2e-2


def test_routes_agree_and_threads_do_not_change_results(bound_u0, bound_charge):
    """Both routes land close to each other, and a worker pool gives identical snapshots."""
    times = snapshot_times(1.0, 3)
    fourier = reconstruct(bound_u0, bound_charge, times, Route.FOURIER)
    duhamel = reconstruct(bound_u0, bound_charge, times, Route.DUHAMEL)
    assert fourier.relative_distance(duhamel) < 2e-2
    threaded = reconstruct(bound_u0, bound_charge, times, Route.FOURIER, workers=3)
    assert fourier.relative_distance(threaded) == 0.0


def test_reference_route_is_not_reconstructed(bound_u0, bound_charge):
    """The reference field comes from the finite-difference oracle, not from reconstruct."""
    with pytest.raises(DomainError):
        reconstruct(bound_u0, bound_charge, snapshot_times(1.0, 2), Route.REFERENCE)


def test_zero_charge_gives_free_evolution(space):
    """With alpha = 0 the reconstruction is e^{it Delta} u0."""
    u0 = ComplexSignal.from_function(space, lambda x: np.exp(-(x**2) / 2))
    charge_grid = UniformGrid.span(0.0, 1.0, 11)
    solution = solve(CouplingPath.zero(), u0, SolverConfig(), charge_grid)
    field = reconstruct_fourier(u0, solution, snapshot_times(1.0, 3))
    for t, u in zip(field.times.points, field.snapshots):
        assert np.max(np.abs(u.values - evolve(u0, t).values)) < 1e-12
    assert field.mass_drift() < 1e-10


def test_diagnostics_track_mass_and_jump(space, bound_u0, bound_charge):
    """Each snapshot carries its mass, H1 norm, jump residual and origin trace."""
    field = reconstruct_fourier(bound_u0, bound_charge, snapshot_times(1.0, 3))
    assert len(field.diagnostics) == 3
    first = field.diagnostics[0]
    assert first.mass == pytest.approx(bound_u0.mass())
    assert first.trace_at_0 == pytest.approx(1.0)
    assert set(first.to_dict()) == {"t", "mass", "h1", "jump_residual", "trace_re", "trace_im"}
    series = mass_and_h1(field)
    assert series.relative_mass_drift < 1e-2
    assert series.mass.shape == (3,)


def test_derivative_jump_of_kink(space, bound_u0):
    """e^{-|x|} has derivative jump -2 at the origin."""
    assert derivative_jump(bound_u0) == pytest.approx(-2.0, abs=1e-2)


def test_jump_residual_of_exact_bound_state(space):
    """Exact bound-state snapshots satisfy u'(0+) - u'(0-) = alpha u(0)."""
    times = snapshot_times(1.0, 3)
    snapshots = [bound_state_evolution(-2.0, t, space) for t in times.points]
    field = WaveField(times, space, snapshots, Route.REFERENCE)
    residual = jump_residual(field, CouplingPath.constant(-2.0, 4.0))
    assert np.all(residual < 1e-2)


def test_unresolved_origin():
    """A coarse grid cannot resolve the jump; diagnostics fall back to nan."""
    coarse = UniformGrid.centered(40.0, 64)
    u = BoundState.build(-2.0, coarse).profile
    with pytest.raises(ResolutionError) as excinfo:
        derivative_jump(u)
    assert excinfo.value.minimum_count > 64
    times = snapshot_times(1.0, 2)
    field = diagnose(WaveField(times, coarse, [u, u], Route.REFERENCE), alpha=CouplingPath.constant(-2.0, 4.0))
    assert all(np.isnan(d.jump_residual) for d in field.diagnostics)


def test_wavefield_validates_snapshots(space, bound_u0):
    """Snapshot count and grids must match the field's grids."""
    times = snapshot_times(1.0, 3)
    with pytest.raises(GridMismatchError):
        WaveField(times, space, [bound_u0, bound_u0], Route.FOURIER)
    other = ComplexSignal.zeros(UniformGrid.centered(20.0, 1024))
    with pytest.raises(GridMismatchError):
        WaveField(snapshot_times(1.0, 2), space, [bound_u0, other], Route.FOURIER)


def test_charge_matches_trace_on_plateau(bound_u0, bound_charge):
    """alpha_T(t) u(t, 0) reproduces q(t) up to the band limit."""
    field = reconstruct_fourier(bound_u0, bound_charge, snapshot_times(1.0, 3))
    assert charge_mismatch(field, bound_charge, 1.2) < 5e-2


def test_time_derivative_of_bound_state(space, bound_u0, bound_charge):
    """i d/dt of e^{it} phi is -e^{it} phi."""
    at_zero = time_derivative(bound_u0, bound_charge, 0.0)
    assert np.max(np.abs(at_zero.values + bound_u0.values)) < 1e-10
    later = time_derivative(bound_u0, bound_charge, 0.5)
    exact = bound_state_evolution(-2.0, 0.5, space) * -1.0
    assert (later - exact).l2_norm() / exact.l2_norm() < 1e-2


def test_time_derivative_domain_checks(space, bound_charge, charge_grid):
    """Data violating the jump condition, or a rough coupling, is rejected."""
    gaussian = ComplexSignal.from_function(space, lambda x: np.exp(-(x**2)))
    with pytest.raises(DomainError):
        time_derivative(gaussian, bound_charge, 0.5)

    rough = ChargeSolution(
        q=bound_charge.q,
        q0=bound_charge.q0,
        method=SolverMethod.MARCH,
        iterations_per_window=[],
        window_length=charge_grid.step,
        residual=0.0,
        contraction_factor_estimate=float("nan"),
        regularity_class=0.3,
    )
    with pytest.raises(DomainError):
        time_derivative(BoundState.build(-2.0, space).profile, rough, 0.5)
