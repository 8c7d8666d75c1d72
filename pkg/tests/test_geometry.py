import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nordfluid.errors import ParallelDirections, SoundSpeedDegenerate
from nordfluid.geometry import (
    ETA_INV,
    acoustical_metrics,
    acoustical_pair,
    characteristic_form,
    christoffel,
    hyperbolic_roots,
    in_positive_core,
    null_space_contains,
    symbol,
)
from nordfluid.state import ETA, four_velocity

vel = st.floats(-2.0, 2.0)
states = st.builds(lambda S, P, a, b, c, phi: np.array([S, P, a, b, c, phi, 0, 0, 0, 0]),
                   st.floats(0.3, 3.0), st.floats(0.1, 3.0), vel, vel, vel, st.floats(-0.5, 0.5))
covectors = st.lists(st.floats(-2.0, 2.0), min_size=4, max_size=4).map(np.array)


def test_acoustical_metrics_canonical(star):
    pair = acoustical_metrics(star)
    assert pair.h_inv[0, 0] == pytest.approx(-15.0 / 4.0)
    assert pair.h[0, 0] == pytest.approx(-4.0 / 15.0)
    assert np.allclose(pair.h[1:, 1:], np.eye(3)) and np.allclose(pair.h_inv[1:, 1:], np.eye(3))


def test_luminal_limit_gives_flat_metric():
    U = np.array([np.sqrt(1.25), 0.5, 0.0, 0.0])
    assert np.allclose(acoustical_pair(U, 1.0).h, ETA)


def test_degenerate_sound_speed(star, monkeypatch):
    import nordfluid.geometry as geo

    monkeypatch.setattr(geo, "sound_speed_sq_of", lambda V, eos=None: 1.0)
    with pytest.raises(SoundSpeedDegenerate):
        geo.acoustical_metrics(star)


@given(states)
def test_metric_inverse(V):
    pair = acoustical_metrics(V)
    assert np.allclose(pair.h @ pair.h_inv, np.eye(4), atol=1e-10)


def test_characteristic_form_examples(star):
    dec = characteristic_form(star, [1.0, 0, 0, 0])
    assert dec.value == pytest.approx(15.0 / 4.0, rel=1e-14) and dec.sheets == set()
    dec = characteristic_form(star, [1.0, 1.0, 0, 0])
    assert dec.value == 0.0 and "C_l" in dec.sheets
    dec = characteristic_form(star, [0, 1.0, 0, 0])
    assert dec.value == 0.0 and dec.sheets == {"P_U", "P_0"}


@given(states, covectors)
def test_symbol_determinant_proportional_to_form(V, xi):
    if np.linalg.norm(xi) < 1e-3:
        return
    ref = np.array([1.0, 0.3, -0.2, 0.1])
    q, q0 = characteristic_form(V, xi).value, characteristic_form(V, ref).value
    d, d0 = np.linalg.det(symbol(V, xi)), np.linalg.det(symbol(V, ref))
    assert d == pytest.approx(d0 / q0 * q, rel=1e-8, abs=1e-8 * abs(d0 / q0) * np.linalg.norm(xi) ** 10)


@given(states, covectors)
def test_sheet_scale_invariance(V, xi):
    assert characteristic_form(V, xi).sheets == characteristic_form(V, 2.0 * xi).sheets


@given(states, st.floats(0.0, 2 * np.pi), st.floats(0.0, np.pi))
def test_sound_cone_duality(V, az, pol):
    pair = acoustical_metrics(V)
    n = np.array([np.sin(pol) * np.cos(az), np.sin(pol) * np.sin(az), np.cos(pol)])
    # xi = (x0, n) on the cotangent sound cone: solve the quadratic in x0
    a, b, c = pair.h_inv[0, 0], 2 * pair.h_inv[0, 1:] @ n, n @ pair.h_inv[1:, 1:] @ n
    x0 = (-b + np.sqrt(b * b - 4 * a * c)) / (2 * a)
    xi = np.concatenate([[x0], n])
    assert "C_s" in characteristic_form(V, xi).sheets
    X = pair.h_inv @ xi
    assert abs(X @ pair.h @ X) < 1e-10 * max(1.0, X @ X)


@given(states, covectors)
def test_plane_duals(V, xi):
    Uup = four_velocity(V)
    on_pu = xi - (Uup @ xi) / (Uup @ Uup) * Uup
    assert null_space_contains(on_pu, Uup)
    on_p0 = xi.copy()
    on_p0[0] = 0.0
    assert null_space_contains(on_p0, [1.0, 0, 0, 0])


def test_canonical_roots(star):
    rep = hyperbolic_roots(star, [1.0, 0, 0, 0], [0, 1.0, 0, 0])
    s = np.sqrt(4.0 / 15.0)
    assert np.allclose(np.sort(rep.roots.real), np.sort([0.0] * 6 + [s, -s, 1.0, -1.0]), atol=1e-14)
    assert rep.hyperbolic and not rep.strictly_hyperbolic and rep.xi_in_core


def test_core_membership():
    assert not in_positive_core([1.0, 1.0, 0, 0])
    assert in_positive_core([1.0, 0.5, 0, 0])
    assert not in_positive_core([-1.0, 0.5, 0, 0])


def test_parallel_directions(star):
    with pytest.raises(ParallelDirections):
        hyperbolic_roots(star, [1.0, 0, 0, 0], [2.0, 0, 0, 0])


@given(states, st.floats(0.0, 0.999), st.floats(0.0, 2 * np.pi), covectors)
def test_roots_real_in_core(V, r, az, up):
    xi = np.array([1.0, r * np.cos(az), r * np.sin(az), 0.0])
    if np.linalg.matrix_rank(np.vstack([xi, up]), tol=1e-6) < 2:
        return
    rep = hyperbolic_roots(V, xi, up)
    assert rep.hyperbolic and rep.xi_in_core


def test_christoffel():
    assert not christoffel(0.0, np.zeros(4)).any()
    G = christoffel(0.0, [1.0, 0, 0, 0])
    assert G[0, 0, 0] == pytest.approx(1.0)
    d = np.random.default_rng(0).normal(size=4)
    G = christoffel(0.0, d)
    assert np.allclose(G, np.swapaxes(G, 1, 2))
    # metric compatibility of eta at phi = 0: d_a g_mn = Gamma^b_am g_bn + Gamma^b_an g_mb
    lhs = 2.0 * np.einsum("a,mn->amn", d, ETA)
    rhs = np.einsum("bam,bn->amn", G, ETA) + np.einsum("ban,mb->amn", G, ETA)
    assert np.allclose(lhs, rhs)
    assert np.array_equal(ETA_INV, np.linalg.inv(ETA))
