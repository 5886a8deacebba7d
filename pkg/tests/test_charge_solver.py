import numpy as np
import pytest

from chronodelta.charge_solver import (
    SolverConfig,
    SolverMethod,
    apply_L,
    apply_L_alpha,
    assemble_q0,
    contraction_estimate,
    fixed_point_residual,
    select_window,
    solve,
    solve_march,
    solve_picard,
)
from chronodelta.acceptance import CONTRACTION_BRACKET
from chronodelta.coupling import CouplingPath
from chronodelta.errors import DomainError, IterationLimitError, StiffnessError, SupportError
from chronodelta.oracles import BoundState, free_gaussian
from chronodelta.signal_core import Axis, ComplexSignal, UniformGrid


@pytest.fixture
def time_grid() -> UniformGrid:
    return UniformGrid.span(-0.6, 1.2, 181)


@pytest.fixture
def alpha() -> CouplingPath:
    return CouplingPath.from_function(lambda t: -2.0 + 0.5 * np.cos(3 * t), 4.0, label="test")


def manufactured(alpha: CouplingPath, grid: UniformGrid):
    """A known charge and the data q0 that makes it the exact discrete solution."""
    values = alpha.truncated(grid.points) * np.exp(1j * grid.points) * (1 + 0.5j)
    q_true = ComplexSignal(grid, values, Axis.TIME)
    return q_true, q_true - apply_L_alpha(q_true, alpha)


def test_apply_L_on_constant_charge(time_grid: UniformGrid):
    """L 1 = 2 sqrt(pi |t|) with phase e^{-i pi/4} forward and e^{+i pi/4} backward."""
    out = apply_L(ComplexSignal(time_grid, np.ones(time_grid.count), Axis.TIME), 4.0)
    t = (np.arange(time_grid.count) - time_grid.index_of(0.0)) * time_grid.step
    phase = np.where(t >= 0, np.exp(-1j * np.pi / 4), np.exp(1j * np.pi / 4))
    assert np.allclose(out.values, phase * 2 * np.sqrt(np.pi * np.abs(t)), atol=1e-12)


def test_apply_L_requires_support(time_grid: UniformGrid):
    """A charge that does not vanish beyond T is rejected."""
    q = ComplexSignal(time_grid, np.ones(time_grid.count), Axis.TIME)
    with pytest.raises(SupportError):
        apply_L(q, 0.5)


def test_apply_L_alpha_composes_with_coupling(time_grid: UniformGrid, alpha: CouplingPath):
    """L_alpha q = -i alpha_T L q / (2 pi)."""
    q = ComplexSignal.from_function(time_grid, lambda t: np.exp(-t * t), Axis.TIME)
    expected = -1j * alpha.truncated(time_grid.points) * apply_L(q, alpha.T).values / (2 * np.pi)
    assert np.allclose(apply_L_alpha(q, alpha).values, expected, atol=1e-14)


@pytest.mark.parametrize("method", [SolverMethod.PICARD, SolverMethod.MARCH])
def test_solvers_recover_manufactured_charge(time_grid: UniformGrid, alpha: CouplingPath, method):
    """With q0 = q - L_alpha q both solvers return q."""
    q_true, q0 = manufactured(alpha, time_grid)
    solution = solve(alpha, None, SolverConfig(tol=1e-13), time_grid, method, q0=q0)
    error = np.linalg.norm(solution.q.values - q_true.values) / np.linalg.norm(q_true.values)
    assert error < 1e-8
    assert solution.residual < 1e-8
    assert solution.method is method


def test_picard_reports_windows_and_halvings(time_grid: UniformGrid, alpha: CouplingPath):
    """Picard splits the grid into contracting windows and logs each one."""
    _, q0 = manufactured(alpha, time_grid)
    solution = solve_picard(alpha, None, SolverConfig(), time_grid, q0=q0)
    assert solution.windows
    assert all(r <= 0.5 for r in solution.window_ratios)
    assert len(solution.iterations_per_window) == len(solution.windows)
    telemetry = solution.telemetry()
    assert telemetry["method"] == "picard"
    assert telemetry["halvings"] == solution.halvings
    assert telemetry["time_grid"]["count"] == time_grid.count


def test_picard_with_small_initial_window_does_not_halve(time_grid: UniformGrid, alpha: CouplingPath):
    """A window short enough to contract is never halved."""
    _, q0 = manufactured(alpha, time_grid)
    solution = solve_picard(alpha, None, SolverConfig(initial_window=0.01), time_grid, q0=q0)
    assert solution.halvings == 0


def test_picard_stiffness_error(time_grid: UniformGrid):
    """A strong coupling with a large minimum window cannot contract."""
    strong = CouplingPath.constant(-40.0, 4.0)
    _, q0 = manufactured(strong, time_grid)
    cfg = SolverConfig(min_window=0.5, initial_window=1.2)
    with pytest.raises(StiffnessError) as excinfo:
        solve_picard(strong, None, cfg, time_grid, q0=q0)
    assert excinfo.value.ratio > 0.5


def test_picard_iteration_limit(time_grid: UniformGrid, alpha: CouplingPath):
    """One iteration is not enough to converge."""
    _, q0 = manufactured(alpha, time_grid)
    with pytest.raises(IterationLimitError):
        solve_picard(alpha, None, SolverConfig(max_iterations=1), time_grid, q0=q0)


def test_zero_coupling_returns_data(time_grid: UniformGrid):
    """With alpha = 0 the charge vanishes and so does q0."""
    u0 = ComplexSignal.from_function(UniformGrid.centered(40.0, 1024), lambda x: np.exp(-(x**2)))
    zero = CouplingPath.zero()
    q0 = assemble_q0(zero, u0, time_grid)
    assert not np.any(q0.values)
    solution = solve(zero, u0, SolverConfig(), time_grid)
    assert not np.any(solution.q.values)


def test_solver_needs_origin_node(alpha: CouplingPath):
    """A time grid that misses t = 0 is rejected."""
    grid = UniformGrid.span(0.1, 1.0, 10)
    q0 = ComplexSignal.zeros(grid, Axis.TIME)
    with pytest.raises(DomainError):
        solve_march(alpha, None, SolverConfig(), grid, q0=q0)


def test_solver_needs_data(time_grid: UniformGrid, alpha: CouplingPath):
    """Neither u0 nor q0 is an error."""
    with pytest.raises(DomainError):
        solve(alpha, None, SolverConfig(), time_grid)


def test_bound_state_charge():
    """The bound state of alpha = -2 carries the charge -2 e^{it} on the plateau."""
    space = UniformGrid.centered(40.0, 2048)
    times = UniformGrid.span(0.0, 1.0, 101)
    alpha = CouplingPath.constant(-2.0, 4.0)
    u0 = BoundState.build(-2.0, space).profile
    solution = solve_march(alpha, u0, SolverConfig(), times)
    exact = -2.0 * np.exp(1j * times.points)
    assert np.max(np.abs(solution.q.values - exact)) / 2.0 < 1e-2
    assert solution.residual < 1e-8
    assert solution.value_at(0.5) == pytest.approx(solution.q.values[50])


def test_fixed_point_residual_of_zero_charge(time_grid: UniformGrid, alpha: CouplingPath):
    """With q = 0 the residual is the size of q0."""
    zero = ComplexSignal.zeros(time_grid, Axis.TIME)
    q0 = ComplexSignal(time_grid, np.full(time_grid.count, 2.0), Axis.TIME)
    assert fixed_point_residual(zero, q0, alpha) == pytest.approx(2.0 * np.sqrt(time_grid.count))


def test_contraction_estimate_shrinks_with_window(alpha: CouplingPath):
    """Shorter windows contract more; a zero coupling does not act at all."""
    wide = contraction_estimate(alpha, 1.0)
    narrow = contraction_estimate(alpha, 1.0 / 16)
    assert 0 < narrow < wide
    assert contraction_estimate(CouplingPath.zero(), 1.0) == 0.0
    with pytest.raises(DomainError):
        contraction_estimate(alpha, 0.0)


def test_apply_L_on_linear_charge(time_grid: UniformGrid):
    """L s = (4/3) sign(t) |t|^{3/2} sqrt(pi) e^{-+i pi/4}; product weights are exact on linear q."""
    q = ComplexSignal(time_grid, time_grid.points.astype(complex), Axis.TIME)
    out = apply_L(q, 4.0)
    t = (np.arange(time_grid.count) - time_grid.index_of(0.0)) * time_grid.step
    phase = np.where(t >= 0, np.exp(-1j * np.pi / 4), np.exp(1j * np.pi / 4))
    expected = phase * np.sqrt(np.pi) * 4.0 / 3.0 * np.sign(t) * np.abs(t) ** 1.5
    assert np.allclose(out.values, expected, atol=1e-12)


@pytest.fixture
def space() -> UniformGrid:
    return UniformGrid.centered(40.0, 1024)


def test_picard_and_march_agree_on_wavepacket(space: UniformGrid, time_grid: UniformGrid, alpha: CouplingPath):
    """Driven by a moving Gaussian, both solvers return the same charge."""
    u0 = free_gaussian(0.0, 1.0, space) * np.exp(1j * space.points)
    cfg = SolverConfig(tol=1e-12)
    picard = solve(alpha, u0, cfg, time_grid, SolverMethod.PICARD)
    march = solve(alpha, u0, cfg, time_grid, SolverMethod.MARCH)
    gap = np.linalg.norm(picard.q.values - march.q.values) / np.linalg.norm(march.q.values)
    assert gap <= 1e-6
    assert np.linalg.norm(march.q.values) > 0


def test_charge_is_linear_in_initial_data(space: UniformGrid, time_grid: UniformGrid, alpha: CouplingPath):
    """q[u + 2i v] = q[u] + 2i q[v]."""
    u = free_gaussian(0.0, 1.0, space)
    v = free_gaussian(0.0, 1.5, space, center=1.0)
    cfg = SolverConfig()

    def charge(data: ComplexSignal) -> np.ndarray:
        return solve_march(alpha, data, cfg, time_grid).q.values

    combined = charge(u + v * 2j)
    expected = charge(u) + 2j * charge(v)
    assert np.linalg.norm(combined - expected) <= 1e-10 * np.linalg.norm(expected)


def test_contraction_ratio_follows_window_scaling():
    """Shrinking the window 16 times shrinks the estimate by at least 16^{1/4}, within the accepted bracket."""
    constant = CouplingPath.constant(-2.0, 4.0)
    ratio = contraction_estimate(constant, 1.0) / contraction_estimate(constant, 1.0 / 16)
    low, high = CONTRACTION_BRACKET
    assert low <= ratio <= high
    assert ratio >= 16**0.25


def test_select_window_meets_target(alpha: CouplingPath):
    """Every window of the chosen length contracts; some window of twice that length does not."""
    cfg = SolverConfig()
    window = select_window(alpha, 1.2, cfg)
    assert window < 1.2
    starts = window * np.arange(int(np.ceil(1.2 / window - 1e-9)))
    assert all(contraction_estimate(alpha, window, start=s) <= cfg.target_contraction for s in starts)
    wider = 2 * window * np.arange(int(np.ceil(1.2 / (2 * window) - 1e-9)))
    assert max(contraction_estimate(alpha, 2 * window, start=s) for s in wider) > cfg.target_contraction

    backward = select_window(alpha, 0.6, cfg, backward=True)
    assert contraction_estimate(alpha, backward, start=-backward) <= cfg.target_contraction


def test_select_window_stiffness():
    """A coupling that never contracts above min_window is a stiffness error."""
    strong = CouplingPath.constant(-40.0, 4.0)
    with pytest.raises(StiffnessError) as excinfo:
        select_window(strong, 1.2, SolverConfig(min_window=0.5))
    assert excinfo.value.ratio > 0.5


def test_picard_starts_from_seeded_window(time_grid: UniformGrid, alpha: CouplingPath):
    """Without an initial window Picard uses the estimated windows and never halves them."""
    _, q0 = manufactured(alpha, time_grid)
    cfg = SolverConfig(tol=1e-12)
    solution = solve_picard(alpha, None, cfg, time_grid, q0=q0)
    forward, backward = solution.seeded_windows
    k0 = time_grid.index_of(0.0)
    spans = ((time_grid.count - 1 - k0) * time_grid.step, k0 * time_grid.step)
    assert forward == select_window(alpha, spans[0], cfg)
    assert backward == select_window(alpha, spans[1], cfg, backward=True)
    assert solution.halvings == 0
    first_start, first_stop = solution.windows[0]
    assert first_start == pytest.approx(0.0, abs=1e-12)
    assert first_stop == pytest.approx(round(forward / time_grid.step) * time_grid.step)
    assert solution.telemetry()["seeded_windows"] == [forward, backward]
