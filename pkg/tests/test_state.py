import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nordfluid.eos import energy_density, make_polytropic
from nordfluid.errors import InadmissibleState, NormalizationViolated
from nordfluid.state import (
    CANONICAL_EOS,
    ETA,
    AdmissibleBox,
    OriginalFluid,
    StateVector,
    background_residual,
    background_solve,
    change_of_variables,
    complete_state,
    four_velocity,
    in_box,
    projection,
    stress_energy,
    theta_tensor,
    to_original,
    to_weighted,
)

vel = st.floats(-2.0, 2.0)


def admissible_state(S, P, u1, u2, u3, phi):
    return np.array([S, P, u1, u2, u3, phi, 0.1, -0.2, 0.3, 0.05])


states = st.builds(admissible_state, st.floats(0.3, 3.0), st.floats(0.1, 3.0), vel, vel, vel,
                   st.floats(-0.5, 0.5))


def test_statevector_roundtrip():
    v = StateVector(1.5, 0.5, 0.1, 0.2, 0.3, -0.1, 1, 2, 3, 4)
    assert StateVector.from_array(v.to_array()) == v
    assert v.U0 == pytest.approx(np.sqrt(1.14))


def test_complete_state_examples(star):
    assert float(complete_state(star).U0) == 1.0
    V = star.copy()
    V[2] = 3.0
    d = complete_state(V)
    assert float(d.U0) == pytest.approx(np.sqrt(10.0))
    assert d.Pi[0, 0] == pytest.approx(9.0)
    d = complete_state(star, CANONICAL_EOS)
    assert float(d.R) == pytest.approx(4.0, rel=1e-15)
    assert float(d.Q) == pytest.approx(4.0 / 3.0, rel=1e-15)


def test_inadmissible_state(star):
    V = star.copy()
    V[1] = 0.0
    with pytest.raises(InadmissibleState):
        complete_state(V)


@given(states)
def test_projection_identities(V):
    Uup = four_velocity(V)
    Pi = projection(Uup)
    mixed = Pi @ ETA  # Pi^mu_nu
    assert np.allclose(mixed @ mixed, mixed, atol=1e-10 * max(1.0, np.abs(mixed).max() ** 2))
    assert np.allclose(Pi @ (ETA @ Uup), 0.0, atol=1e-10 * np.abs(Pi).max())


def test_change_of_variables_identity():
    x = OriginalFluid(np.array([1.0, 0, 0, 0]), 4.0, 1.0, 1.0, 0.0, np.zeros(4))
    V = to_weighted(x)
    assert (V.U1, V.U2, V.U3) == (0.0, 0.0, 0.0) and V.P == 1.0 and V.phi == 0.0
    assert float(complete_state(V.to_array()).R) == pytest.approx(4.0)


def test_normalization_violation():
    x = OriginalFluid(np.array([2.0, 0, 0, 0]), 4.0, 1.0, 1.0, 0.0, np.zeros(4))
    with pytest.raises(NormalizationViolated):
        to_weighted(x)


@given(states)
def test_change_of_variables_roundtrip(V):
    back = change_of_variables("to-weighted", change_of_variables("to-original", V)).to_array()
    assert np.allclose(back, V, rtol=1e-12, atol=1e-12)
    o = to_original(V)
    assert abs(o.normalization_defect()) < 1e-12


def test_background_canonical(background):
    assert background.residual < 1e-12
    assert background.phi_bar == pytest.approx(-0.3005, abs=5e-4)
    assert background.P_bar == pytest.approx(-background.phi_bar, abs=1e-10)
    assert background.monotone


def test_background_zero_when_trace_vanishes():
    eos = make_polytropic(1.5, "exp")  # rho = n + 2p = 3p at S = 1, p = 1
    assert float(energy_density(eos, 1.0, 1.0)) == pytest.approx(3.0)
    assert background_solve(eos, 1.0, 1.0, 1.0).phi_bar == 0.0


def test_background_large_kappa():
    phis = [background_solve(None, k, 1.0, 1.0).phi_bar for k in (1, 2, 4, 8, 16, 32)]
    assert all(p < 0 for p in phis)
    assert np.all(np.diff(phis) > 0)
    assert abs(phis[-1]) < 1e-3


@pytest.mark.parametrize("p", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("S", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("kappa", [0.1, 1.0, 10.0])
def test_background_residual_grid(p, S, kappa):
    bg = background_solve(None, kappa, S, p)
    rho = float(energy_density(CANONICAL_EOS, S, p))
    assert abs(background_residual(bg.phi_bar, kappa, rho, p)) < 1e-12
    assert bg.residual < 1e-12


def test_stress_energy_at_rest(star):
    se = stress_energy(star, 1.0)
    assert se.T[0, 0] == pytest.approx(4.0)
    assert np.allclose(np.diag(se.T)[1:], 1.0)
    assert np.allclose(se.T[0, 1:], 0.0)
    assert np.allclose(se.T_aux, se.T)
    assert se.Theta[0, 0] == pytest.approx(4.0)
    assert se.weak and se.strong and se.dominant


def test_theta_symmetric(rng):
    V = admissible_state(1.2, 0.7, 0.3, -0.4, 0.2, 0.1)
    th = theta_tensor(V, 1.0)
    assert np.allclose(th, th.T)


def test_box_membership(background):
    box = AdmissibleBox.default_for(background.V_bar)
    assert in_box(background.V_bar, box)
    V = background.V_bar.copy()
    V[1] = 0.0
    assert not in_box(V, box)
    assert in_box(box.lower, box) and in_box(box.upper, box)
    assert AdmissibleBox.from_record(box.to_record()).to_record() == box.to_record()
    assert box.sup_distance(background.V_bar) == pytest.approx(0.5 * background.P_bar)
