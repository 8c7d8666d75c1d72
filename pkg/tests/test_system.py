import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nordfluid.errors import GridMismatch
from nordfluid.field import Grid, MultiIndex, derivative, spectral_derivative
from nordfluid.solver import SolverConfig, integrate_nonlinear, pulse_data
from nordfluid.state import theta_tensor
from nordfluid.system import (
    InhomTerms,
    apply_a0_inverse,
    apply_ak,
    coeff_matrices,
    det_a0,
    det_a0_short,
    differentiated_inhom,
    inhom_linearization,
    residual,
    residual_eov,
    time_derivative_eov,
)

vel = st.floats(-2.0, 2.0)
states = st.builds(lambda S, P, a, b, c, phi: np.array([S, P, a, b, c, phi, 0.2, -0.1, 0.4, 0.3]),
                   st.floats(0.3, 3.0), st.floats(0.1, 3.0), vel, vel, vel, st.floats(-0.5, 0.5))


def test_canonical_matrices(star):
    m = coeff_matrices(star)
    assert np.linalg.det(m.A0) == pytest.approx(125.0, rel=1e-12)
    assert det_a0_short(star) == pytest.approx(-100.0 / 3.0, rel=1e-14)
    assert m.A1[1, 2] == pytest.approx(4.0 / 3.0)
    assert m.A1[2, 1] == pytest.approx(1.0)


@given(states)
def test_expanded_determinant(V):
    num = np.linalg.det(coeff_matrices(V).A0)
    assert float(det_a0(V)) == pytest.approx(num, rel=1e-10)
    assert abs(num) > 0


@given(states, st.integers(0, 2**32 - 1))
def test_block_inverse_and_ak(V, seed):
    rng = np.random.default_rng(seed)
    rhs = rng.normal(size=5)
    m = coeff_matrices(V)
    assert np.allclose(apply_a0_inverse(V, rhs), np.linalg.solve(m.A0, rhs), rtol=1e-10, atol=1e-12)
    for k in (1, 2, 3):
        assert np.allclose(apply_ak(V, k, rhs), m[k] @ rhs, rtol=1e-12, atol=1e-12)


def test_inhom_examples(background, star):
    t = inhom_linearization(background.V_bar, 1.0)
    assert np.abs(t.b).max() == 0.0 and np.abs(t.l).max() < 1e-15
    V = star.copy()
    V[7] = 1.0
    assert inhom_linearization(V, 1.0).h[0] == pytest.approx(-1.0)
    assert inhom_linearization(star, 1.0).l[0] == pytest.approx(1.0)


def test_residual_constant_fields(background, star):
    d = np.zeros((4, 10))
    assert np.abs(residual("nonlinear", background.V_bar, d, kappa=1.0)).max() < 1e-15
    r = residual("nonlinear", star, d, kappa=1.0)
    assert r[5] == pytest.approx(-1.0)
    with pytest.raises(GridMismatch):
        residual("nonlinear", star, np.zeros((3, 10)))


def _sine_solution(x, t):
    # arbitrary smooth field with exact first derivatives
    a = np.array([0.1, 0.2, 0.3, -0.2, 0.1, 0.05, 0.2, 0.1, -0.1, 0.2])
    c = np.array([1.0, 1.0, 0.1, 0.0, 0.0, -0.1, 0.0, 0.1, 0.0, 0.0])
    w = np.linspace(0.3, 1.2, 10)[:, None]
    arg = x[None] + w * t
    V = c[:, None] + a[:, None] * np.sin(arg)
    dV = np.zeros((4, 10, x.size))
    dV[0] = a[:, None] * w * np.cos(arg)
    dV[1] = a[:, None] * np.cos(arg)
    return V, dV


def test_manufactured_residual_converges():
    errs = []
    for n in (64, 128, 256):
        g = Grid(1, n, np.pi)
        V, dV = _sine_solution(g.x, 0.4)
        sources = residual("nonlinear", V, dV, kappa=1.0)
        dfd = dV.copy()
        dfd[1] = derivative(V, g, 0, "order-2")
        errs.append(np.abs(residual("nonlinear", V, dfd, kappa=1.0) - sources).max())
    r = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(np.abs(r - 4.0) < 0.2)


@given(states, st.integers(0, 2**32 - 1))
def test_time_derivative_solves_eov(V, seed):
    rng = np.random.default_rng(seed)
    dV = np.zeros((4, 10))
    dV[1:] = rng.normal(size=(3, 10))
    inhom = InhomTerms(rng.normal(size=5), rng.normal(size=5))
    dV[0] = time_derivative_eov(V, dV[1:], inhom)
    assert np.abs(residual_eov(V, dV, inhom)).max() < 1e-9 * max(1.0, np.abs(dV).max() ** 2)


def test_differentiated_inhom_examples(background):
    g = Grid(1, 128, np.pi)
    rng = np.random.default_rng(3)
    W = np.sin(np.arange(1, 11)[:, None] * g.x[None]) * 0.1
    b = InhomTerms(rng.normal(size=(5, g.points)), np.zeros((5, g.points)))
    zero = differentiated_inhom(np.tile(background.V_bar[:, None], g.points), W, b, MultiIndex((0,)), g)
    assert np.array_equal(zero.b_alpha, b.b) and not zero.k_alpha.any()
    const = differentiated_inhom(np.tile(background.V_bar[:, None], g.points), W, b, MultiIndex((2,)), g)
    assert np.abs(const.k_alpha).max() < 1e-10


def test_commutator_matches_finite_differences(background):
    errs = []
    for n in (64, 128, 256):
        g = Grid(1, n, np.pi)
        Vb = background.V_bar[:, None] * (1.0 + 0.1 * np.sin(g.x)[None])
        Vb[2] = 0.2 * np.cos(g.x)
        W = 0.1 * np.sin(g.x[None] + np.arange(10)[:, None])
        b = InhomTerms.zeros((n,))
        spec = differentiated_inhom(Vb, W, b, MultiIndex((1,)), g, scheme="spectral")
        fd = differentiated_inhom(Vb, W, b, MultiIndex((1,)), g, scheme="order-2")
        errs.append(np.abs(spec.k_alpha - fd.k_alpha).max())
    r = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(np.abs(r - 4.0) < 0.3)


def test_theta_conservation_converges(background):
    """d_mu Theta^{mu nu} -> 0 at second order along nonlinear runs."""
    errs = []
    for n in (256, 512):
        g = Grid(1, n, 8.0)
        tr = integrate_nonlinear(pulse_data(g, background), SolverConfig(T=0.5, dissipation=0.0))
        i = len(tr.times) // 2
        th = [theta_tensor(s, 1.0) for s in tr.snapshots[i - 1:i + 2]]
        dt = tr.times[i + 1] - tr.times[i - 1]
        div = (th[2][0] - th[0][0]) / dt + spectral_derivative(th[1][1], g, (1,))
        errs.append(np.abs(div).max())
    assert errs[0] / errs[1] > 4.0 * 0.8
