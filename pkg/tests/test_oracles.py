import logging

import numpy as np
import pytest

from chronodelta import oracles
from chronodelta.coupling import CouplingPath
from chronodelta.errors import DomainError, NumericalError, StepRejected
from chronodelta.oracles import (
    BoundState,
    bound_state_evolution,
    crank_nicolson_reference,
    effective_bandwidth,
    free_gaussian,
)
from chronodelta.signal_core import ComplexSignal, UniformGrid
from chronodelta.wavefield import Route


@pytest.fixture
def space() -> UniformGrid:
    return UniformGrid.centered(20.0, 512)


def test_bound_state_profile():
    """kappa = -alpha/2, energy -kappa^2 and unit mass."""
    grid = UniformGrid.centered(40.0, 4096)
    state = BoundState.build(-2.0, grid)
    assert state.kappa == 1.0
    assert state.energy == -1.0
    assert state.profile.at(0.0) == pytest.approx(1.0)
    assert state.profile.mass() == pytest.approx(1.0, rel=1e-3)


def test_bound_state_needs_attractive_coupling(space):
    """alpha >= 0 has no bound state."""
    for alpha in (0.0, 1.5):
        with pytest.raises(DomainError):
            BoundState.build(alpha, space)


def test_bound_state_rotates_in_phase(space):
    """u(t) = e^{it} phi for alpha = -2."""
    u = bound_state_evolution(-2.0, 0.7, space)
    phi = BoundState.build(-2.0, space).profile
    assert np.allclose(u.values, np.exp(0.7j) * phi.values)
    assert u.mass() == pytest.approx(phi.mass())


def test_free_gaussian(space):
    """Normalized at t = 0, mass conserved, and rejects a non-positive width."""
    assert free_gaussian(0.0, 1.0, space).mass() == pytest.approx(1.0, rel=1e-10)
    assert free_gaussian(0.5, 1.0, space).mass() == pytest.approx(1.0, rel=1e-6)
    shifted = free_gaussian(0.0, 1.0, space, center=2.0)
    assert space.points[np.argmax(np.abs(shifted.values))] == pytest.approx(2.0, abs=space.step)
    with pytest.raises(DomainError):
        free_gaussian(0.0, 0.0, space)


def test_effective_bandwidth(space):
    """A narrower packet needs a wider band; zero needs none."""
    narrow = effective_bandwidth(free_gaussian(0.0, 0.5, space))
    wide = effective_bandwidth(free_gaussian(0.0, 2.0, space))
    assert wide < narrow
    assert effective_bandwidth(ComplexSignal.zeros(space)) == 0.0


def test_reference_matches_free_gaussian(space):
    """With alpha = 0 the finite-difference field follows the exact Gaussian both ways in time."""
    u0 = free_gaussian(0.0, 1.0, space)
    times = UniformGrid.span(-0.5, 0.5, 3)
    field = crank_nicolson_reference(CouplingPath.zero(), u0, times)
    assert field.route is Route.REFERENCE
    for t, u in zip(times.points, field.snapshots):
        exact = free_gaussian(t, 1.0, space)
        assert (u - exact).l2_norm() < 1e-3
    assert field.mass_drift() < 1e-8
    assert len(field.diagnostics) == 3


def test_reference_keeps_bound_state():
    """The discretized delta keeps the bound state up to a phase error of order h^2."""
    grid = UniformGrid.centered(20.0, 1024)
    u0 = BoundState.build(-2.0, grid).profile
    times = UniformGrid.span(0.0, 0.25, 2)
    field = crank_nicolson_reference(CouplingPath.constant(-2.0, 4.0), u0, times)
    exact = bound_state_evolution(-2.0, 0.25, grid)
    assert (field.snapshots[-1] - exact).l2_norm() < 1e-2


def test_reference_rejects_coarse_step(space):
    """dt K^2 above the phase limit is refused."""
    u0 = free_gaussian(0.0, 1.0, space)
    with pytest.raises(StepRejected):
        crank_nicolson_reference(CouplingPath.zero(), u0, UniformGrid.span(0.0, 1.0, 2), dt=1.0)


def test_reference_needs_origin_node():
    """The delta sits on a node, so x = 0 must be one."""
    grid = UniformGrid.span(-1.0, 1.0, 10)
    u0 = ComplexSignal.from_function(grid, lambda x: np.exp(-(x**2)))
    with pytest.raises(DomainError):
        crank_nicolson_reference(CouplingPath.zero(), u0, UniformGrid.span(0.0, 0.1, 2))


def test_reference_resamples_onto_space(space, caplog):
    """Initial data on another grid is interpolated onto the requested one."""
    coarse = UniformGrid.centered(20.0, 256)
    u0 = free_gaussian(0.0, 1.0, coarse)
    with caplog.at_level(logging.INFO):
        field = crank_nicolson_reference(CouplingPath.zero(), u0, UniformGrid.span(0.0, 0.1, 2), space=space)
    assert field.space.matches(space)
    assert "reference solver" in caplog.text


def test_reference_mass_drift_warns_or_raises(space, monkeypatch, caplog):
    """A per-step mass drift over the limit is a warning, and an error under strict."""
    monkeypatch.setattr(oracles, "MASS_DRIFT_PER_STEP", -1.0)
    u0 = free_gaussian(0.0, 1.0, space)
    times = UniformGrid.span(0.0, 0.05, 2)
    with caplog.at_level(logging.WARNING):
        field = crank_nicolson_reference(CouplingPath.zero(), u0, times)
    assert len(field.snapshots) == 2
    assert "mass drift" in caplog.text

    with pytest.raises(NumericalError, match="mass drift"):
        crank_nicolson_reference(CouplingPath.zero(), u0, times, strict=True)
