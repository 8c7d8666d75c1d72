import math

import numpy as np
import pytest

from nordfluid.errors import CflViolated, ConeTooSmall
from nordfluid.field import Grid, StateField, norm
from nordfluid.geometry import sound_speed_sq_of
from nordfluid.solver import (
    DIAGNOSTIC_COLUMNS, ConeSpec, PulseSpec, SolverConfig, Trajectory, causality_report,
    dependence_experiment, diagnostics_rows, energy_monitor, gronwall_fit, integrate_nonlinear,
    picard_sequence, pulse_data, solve_linearized, write_diagnostics_csv,
)
from nordfluid.system import InhomTerms

SMALL = Grid(1, 128, 8.0)


def test_cfl_violation():
    with pytest.raises(CflViolated):
        SolverConfig(cfl=0.6).step_size(SMALL)
    dt, steps = SolverConfig(T=1.0, cfl=0.4).step_size(SMALL)
    assert dt * steps == pytest.approx(1.0) and dt <= 0.4 * SMALL.h


def test_equilibrium_is_stationary(background):
    cfg = SolverConfig(T=0.5)
    traj = integrate_nonlinear(StateField.constant(SMALL, background.V_bar), cfg)
    dt = traj.diagnostics["dt"]
    for t, s in zip(traj.times, traj.snapshots):
        drift = np.max(np.abs(s - background.V_bar[:, None]))
        assert drift <= 1e-12 * (1 + t / dt)


def test_zero_variation_stays_zero(background):
    zero = StateField(SMALL, np.zeros((10, SMALL.points)))
    traj = solve_linearized(background.V_bar, zero, InhomTerms.zeros(SMALL.shape), SolverConfig(T=0.3))
    assert all(np.all(s == 0.0) for s in traj.snapshots)


def test_free_wave_frequency(background):
    g = Grid(1, 256, 8.0)
    k = np.pi / 2
    data = np.zeros((10, g.points))
    data[6] = np.cos(k * g.x)
    cfg = SolverConfig(T=2.0, dissipation=0.0)
    traj = solve_linearized(background.V_bar, StateField(g, data), None, cfg)
    amps = np.array([np.sum(s[6] * np.cos(k * g.x)) / np.sum(np.cos(k * g.x) ** 2)
                     for s in traj.snapshots])
    assert np.max(np.abs(amps - np.cos(k * np.array(traj.times)))) < 0.01
    # first zero at t = pi / (2 k) = 1
    i = int(np.argmax(amps < 0))
    t0, t1 = traj.times[i - 1], traj.times[i]
    zero = t0 - amps[i - 1] * (t1 - t0) / (amps[i] - amps[i - 1])
    assert k * zero == pytest.approx(np.pi / 2, rel=0.01)


def test_acoustic_speed(background):
    g = Grid(1, 512, 8.0)
    data = np.zeros((10, g.points))
    data[1] = 1e-3 * np.exp(-(g.x / 0.5) ** 2)
    cfg = SolverConfig(T=6.0, store_every=40)
    traj = solve_linearized(background.V_bar, StateField(g, data), None, cfg)
    right = g.x > 0

    def centroid(s):
        w = np.abs(s[1]) * right
        return np.sum(w * g.x) / np.sum(w)

    i3 = int(np.argmin(np.abs(np.array(traj.times) - 3.0)))
    speed = (centroid(traj.final) - centroid(traj.snapshots[i3])) / (traj.times[-1] - traj.times[i3])
    assert speed == pytest.approx(math.sqrt(sound_speed_sq_of(background.V_bar)), rel=0.01)


def test_picard_on_equilibrium(background):
    data = StateField.constant(SMALL, background.V_bar)
    res = picard_sequence(data, SolverConfig(T=0.1), m_max=3, eps0=0.25)
    # FFT mollification of a constant is exact up to roundoff
    assert max(res.differences) <= 1e-14
    assert res.eps == [0.25 * 2.0**-m for m in range(4)]


def test_constant_background_energy_conserved(background):
    g = Grid(1, 256, 8.0)
    data = np.zeros((10, g.points))
    data[1] = 1e-3 * np.exp(-(g.x / 0.5) ** 2)
    cfg = SolverConfig(T=1.0, dissipation=0.0)
    traj = solve_linearized(background.V_bar, StateField(g, data), None, cfg)
    es = energy_monitor(background.V_bar, traj, ConeSpec(7.0), N_d=0)
    assert np.max(np.abs(es.E - es.E[0])) <= 1e-6 * es.E[0]


def test_cone_too_small(background):
    traj = Trajectory.constant(SMALL, np.zeros((10, SMALL.points)), 1.0)
    with pytest.raises(ConeTooSmall):
        energy_monitor(background.V_bar, traj, ConeSpec(0.5))


def test_causality_initial_deviation_zero(background):
    data = pulse_data(SMALL, background)
    traj = Trajectory.constant(SMALL, data.data, 0.0)
    assert causality_report(traj, PulseSpec().support, background.V_bar).deviation[0] == 0.0


def test_dependence_zero_scale(background):
    data = pulse_data(SMALL, background)
    rep = dependence_experiment(data, StateField(SMALL, np.zeros((10, SMALL.points))), [0.0],
                                SolverConfig(T=0.1))
    assert rep.ratios == [0.0] and rep.exponent is None


def test_nonlinear_determinism(background):
    data = pulse_data(SMALL, background)
    a = integrate_nonlinear(data, SolverConfig(T=0.3)).final
    b = integrate_nonlinear(data, SolverConfig(T=0.3)).final
    assert np.array_equal(a, b)


@pytest.mark.parametrize("C", [0.1, 0.7, 2.0])
def test_gronwall_fit_recovers_constant(C):
    t = np.linspace(0, 1, 41)
    E = (1.0 + C * t) * np.exp(C * t)
    assert gronwall_fit(t, E) == pytest.approx(C, rel=1e-9)
    assert gronwall_fit(t, np.exp(-t)) == 0.0


def test_diagnostics_csv(tmp_path, background):
    data = pulse_data(SMALL, background)
    traj = integrate_nonlinear(data, SolverConfig(T=0.1))
    rows = diagnostics_rows(traj, background.V_bar, 3)
    write_diagnostics_csv(tmp_path / "d.csv", rows)
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == ",".join(DIAGNOSTIC_COLUMNS)
    assert len(lines) == len(traj.times) + 1
    assert rows[0][1] == pytest.approx(norm(data.data - background.V_bar[:, None], SMALL))
