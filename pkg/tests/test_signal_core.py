import numpy as np
import pytest

from chronodelta.errors import DomainError, GridMismatchError, SizeError, SupportError
from chronodelta.signal_core import (
    Axis,
    ComplexSignal,
    UniformGrid,
    check_support,
    dft,
    dtft,
    idft,
    max_step,
    smooth_step,
    sobolev_exponent_estimate,
    sobolev_norm,
)


@pytest.fixture
def grid() -> UniformGrid:
    return UniformGrid.centered(40.0, 1024)


@pytest.fixture
def gaussian(grid: UniformGrid) -> ComplexSignal:
    return ComplexSignal.from_function(grid, lambda x: np.exp(-(x**2) / 2))


def test_centered_grid_has_origin_node(grid: UniformGrid):
    """The centered grid puts x = 0 at index count // 2."""
    assert grid.index_of(0.0) == grid.count // 2
    assert grid.has_node(0.0)
    assert not grid.has_node(grid.step / 3)


def test_index_of_rejects_non_node():
    """Asking for the index of a point between nodes raises DomainError."""
    with pytest.raises(DomainError):
        UniformGrid.span(0.0, 1.0, 5).index_of(0.3)


def test_refined_nested_keeps_old_nodes():
    """Every node of a span grid is a node of its nested refinement."""
    coarse = UniformGrid.span(-1.0, 2.0, 7)
    fine = coarse.refined_nested()
    assert fine.count == 13
    assert np.allclose(fine.points[::2], coarse.points)


def test_parseval_holds_exactly(gaussian: ComplexSignal):
    """The transform preserves the L2 norm of the sampled signal."""
    assert dft(gaussian).l2_norm() == pytest.approx(gaussian.l2_norm(), rel=1e-12)


def test_gaussian_transform_matches_closed_form(gaussian: ComplexSignal):
    """F exp(-x^2/2) = sqrt(2 pi) exp(-xi^2/2) under the exp(-i xi x) convention."""
    spec = dft(gaussian)
    exact = np.sqrt(2 * np.pi) * np.exp(-spec.frequencies**2 / 2)
    assert np.max(np.abs(spec.values - exact)) < 1e-10


def test_inverse_transform_recovers_signal(gaussian: ComplexSignal):
    """idft undoes dft on the same grid."""
    back = idft(dft(gaussian))
    assert back.grid.matches(gaussian.grid)
    assert np.max(np.abs(back.values - gaussian.values)) < 1e-12


def test_dtft_agrees_with_dft_on_grid_frequencies(grid: UniformGrid):
    """Direct evaluation at the FFT frequencies reproduces the FFT."""
    rng = np.random.default_rng(3)
    signal = ComplexSignal(grid, rng.standard_normal(grid.count) + 1j * rng.standard_normal(grid.count))
    spec = dft(signal)
    direct = dtft(signal, spec.frequencies)
    assert np.max(np.abs(direct - spec.values)) < 1e-9 * np.max(np.abs(spec.values))


def test_transform_requires_power_of_two():
    """A 1000-point grid cannot be transformed."""
    signal = ComplexSignal.zeros(UniformGrid.centered(10.0, 1000))
    with pytest.raises(SizeError):
        dft(signal)


def test_arithmetic_requires_matching_grids(gaussian: ComplexSignal):
    """Adding signals on different grids raises GridMismatchError."""
    other = ComplexSignal.zeros(UniformGrid.centered(20.0, 1024))
    with pytest.raises(GridMismatchError):
        gaussian + other


def test_signal_values_are_read_only(gaussian: ComplexSignal):
    """Signals are immutable once built."""
    with pytest.raises(ValueError):
        gaussian.values[0] = 1.0


def test_sobolev_norm_of_gaussian(gaussian: ComplexSignal):
    """||exp(-x^2/2)||_{H^1}^2 = sqrt(pi) + sqrt(pi)/2, and H^0 is the L2 norm."""
    assert sobolev_norm(gaussian, 0.0) == pytest.approx(gaussian.l2_norm(), rel=1e-12)
    assert sobolev_norm(gaussian, 1.0) == pytest.approx(np.sqrt(1.5 * np.sqrt(np.pi)), rel=1e-8)


def test_check_support_flags_wide_signals(grid: UniformGrid, caplog):
    """A signal that does not decay inside the window fails the support check."""
    flat = ComplexSignal(grid, np.ones(grid.count))
    assert check_support(flat, 1e-8) is False
    assert "not compactly supported" in caplog.text
    with pytest.raises(SupportError):
        check_support(flat, 1e-8, strict=True)
    assert check_support(flat, None) is True


def test_check_support_accepts_decayed_signal(gaussian: ComplexSignal):
    """A Gaussian of unit width is supported inside a window of length 40."""
    assert check_support(gaussian, 1e-8, strict=True) is True


def test_smooth_gaussian_has_no_finite_exponent(gaussian: ComplexSignal):
    """Energy of a Gaussian never reaches the top of the band."""
    assert sobolev_exponent_estimate(gaussian) == np.inf


def test_smooth_step_and_max_step():
    """smooth_step runs from 0 to 1 symmetrically; max_step is the largest jump."""
    values = smooth_step([-1.0, 0.0, 0.5, 1.0, 2.0])
    assert values[0] == 0.0 and values[1] == 0.0
    assert values[2] == pytest.approx(0.5)
    assert values[3] == 1.0 and values[4] == 1.0
    assert max_step(np.array([0.0, 1.0, 0.5, 3.0])) == pytest.approx(2.5)
    assert max_step(np.array([1.0])) == 0.0


def test_time_axis_is_carried(grid: UniformGrid):
    """The axis tag survives arithmetic."""
    q = ComplexSignal.zeros(grid, Axis.TIME)
    assert (q + q).axis is Axis.TIME
    assert (2.0 * q).axis is Axis.TIME
