import numpy as np
import pytest
from hypothesis import given, strategies as st

from nordfluid.errors import HypothesisViolated, NonPeriodicUnsupported, OrderTooHigh, RadiusTooLarge
from nordfluid.field import (
    Grid, MollifierSpec, MultiIndex, appendix_inequality, derivative, fd_seminorm_h1, mollify,
    norm, read_csv, read_raw, spectral_derivative, spectral_seminorm_h1, write_csv, write_raw,
)

PI_GRID = Grid(1, 64, np.pi)


def test_derivative_of_constant_is_zero():
    g = Grid(1, 64, 8.0)
    assert np.all(derivative(np.full(g.points, 3.7), g, 0) == 0.0)


def test_derivative_sin_second_order():
    errs = []
    for n in (32, 64, 128):
        g = Grid(1, n, np.pi)
        errs.append(np.max(np.abs(derivative(np.sin(g.x), g, 0) - np.cos(g.x))))
    assert errs[1] < 0.01
    for a, b in zip(errs, errs[1:]):
        assert a / b == pytest.approx(4.0, abs=0.2)


def test_derivative_along_constant_axis_is_zero():
    assert np.all(derivative(np.sin(PI_GRID.x), PI_GRID, 2) == 0.0)


def test_spectral_derivative_exact_for_resolved_modes():
    d = spectral_derivative(np.sin(3 * PI_GRID.x), PI_GRID, (2,))
    assert np.allclose(d, -9 * np.sin(3 * PI_GRID.x), atol=1e-11)


def test_multi_index_order_check():
    MultiIndex((1, 1, 0)).check(2)
    with pytest.raises(OrderTooHigh):
        MultiIndex((2, 1, 0)).check(2)
    assert len(MultiIndex.up_to(3)) == 4


def test_mollify_preserves_constants_and_kernel_mass():
    g = Grid(1, 256, 8.0)
    spec = MollifierSpec(0.5)
    assert np.allclose(mollify(np.full(g.points, 2.5), g, 0.5, spec), 2.5, atol=1e-12)
    for eps in (0.5, 0.25, 0.125):
        assert spec.kernel(g, eps).sum() * g.cell_volume == pytest.approx(1.0, abs=1e-10)


def test_mollify_converges_monotonically():
    g = Grid(1, 2048, 8.0)
    f = np.exp(-g.x**2) * np.sign(g.x) + np.cos(g.x / 2)
    spec = MollifierSpec(1.0)
    errs = [norm(mollify(f, g, spec.eps(m), spec) - f, g) for m in range(7)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert spec.eps(6) == 2.0**-6


def test_mollify_contracts_and_bound_by_eps_h1():
    g = Grid(1, 512, 8.0)
    f = np.exp(-g.x**2) * np.cos(3 * g.x)
    h1 = norm(f, g, "sobolev", 1)
    consts = []
    for eps in (0.4, 0.2, 0.1):
        m = mollify(f, g, eps)
        assert norm(m, g) <= norm(f, g) * (1 + 1e-12)
        consts.append(norm(m - f, g) / (eps * h1))
    # smooth data converges faster than eps, so the constant only shrinks
    assert max(consts) < 1.0
    assert consts == sorted(consts, reverse=True)


def test_mollify_radius_limit():
    g = Grid(1, 64, 4.0)
    with pytest.raises(RadiusTooLarge):
        mollify(np.zeros(64), g, 1.0)


def test_non_periodic_rejected():
    g = Grid(1, 64, 4.0, periodic=False)
    with pytest.raises(NonPeriodicUnsupported):
        derivative(np.zeros(64), g, 0)
    with pytest.raises(NonPeriodicUnsupported):
        mollify(np.zeros(64), g, 0.1)


def test_norms_basic():
    g = Grid(1, 128, np.pi)
    z = np.zeros(g.points)
    assert norm(z, g) == norm(z, g, "sup") == norm(z, g, "sobolev") == 0.0
    f = np.sin(2 * g.x)
    assert norm(f, g, "sobolev", 0) == pytest.approx(norm(f, g), rel=1e-12)
    assert norm(f, g, "sobolev", 3) == pytest.approx(5**1.5 * norm(f, g), rel=1e-12)
    assert norm(f, g) == pytest.approx(np.sqrt(np.pi), rel=1e-12)
    assert norm(f, g, "sup") == pytest.approx(1.0, abs=1e-3)


def test_sobolev_rel_subtracts_reference():
    g = Grid(1, 64, np.pi)
    f = np.stack([np.full(64, 2.0), 1.0 + np.sin(g.x)])
    assert norm(f, g, "sobolev_rel", 2, ref=np.array([2.0, 1.0])) == pytest.approx(
        norm(np.sin(g.x), g, "sobolev", 2), rel=1e-12)


@given(st.floats(0.3, 1.5), st.floats(-2.0, 2.0))
def test_h1_seminorms_agree(width, shift):
    g = Grid(1, 512, 8.0)
    f = np.exp(-((g.x - shift) / width) ** 2)
    a, b = fd_seminorm_h1(f, g), spectral_seminorm_h1(f, g)
    assert abs(a - b) <= 0.02 * b


def test_appendix_interpolation_identity_and_gn():
    g = Grid(1, 512, 8.0)
    f = np.exp(-g.x**2)
    assert appendix_inequality("interpolation", g, F=f, Np=0, N=3).ratio == pytest.approx(1.0, abs=1e-12)
    assert 0 < appendix_inequality("interpolation", g, F=f, Np=2, N=3).ratio <= 1.0 + 1e-12
    # dilation invariance of the scale-free inequality
    r1 = appendix_inequality("GN", g, V=np.exp(-g.x**2), i=1, k=2).ratio
    r2 = appendix_inequality("GN", g, V=np.exp(-(g.x / 1.5) ** 2), i=1, k=2).ratio
    assert r1 == pytest.approx(r2, rel=1e-6)


def test_appendix_hypotheses():
    g = Grid(1, 64, 8.0)
    f = np.exp(-g.x**2)
    jet = [np.exp, np.exp, np.exp, np.exp]
    with pytest.raises(HypothesisViolated):
        appendix_inequality("GN", g, V=f, i=3, k=2)
    with pytest.raises(HypothesisViolated):
        appendix_inequality("interpolation", g, F=f, Np=4, N=3)
    with pytest.raises(HypothesisViolated):
        appendix_inequality("product", g, V=f, G=f, jet=jet, j=0)
    with pytest.raises(HypothesisViolated):
        appendix_inequality("commutator", g, V=f, G=f, jet=jet, j=1, alpha=MultiIndex((1,)))
    with pytest.raises(HypothesisViolated):
        appendix_inequality("commutator", g, V=f, G=f, jet=jet, j=2, alpha=MultiIndex((3,)))


def test_appendix_product_and_commutator_finite():
    g = Grid(1, 256, 8.0)
    V = 0.3 * np.exp(-g.x**2)
    G = np.exp(-(g.x - 1) ** 2)
    jet = [np.exp] * 5
    for case, kw in (("product", {"j": 2}), ("commutator", {"j": 2, "alpha": MultiIndex((1,))}),
                     ("composition_diff", {"j": 2, "Vt": 0.5 * V})):
        kw = dict(kw)
        if case != "composition_diff":
            kw["G"] = G
        r = appendix_inequality(case, g, V=V, jet=jet, **kw).ratio
        assert np.isfinite(r) and r > 0


def test_csv_and_raw_roundtrip(tmp_path):
    g = Grid(1, 32, 2.0)
    data = np.random.default_rng(0).normal(size=(10, 32))
    write_csv(tmp_path / "f.csv", g, data)
    assert np.array_equal(read_csv(tmp_path / "f.csv", g), data)
    assert (tmp_path / "f.csv").read_text().splitlines()[0].startswith("x,S,P")
    write_raw(tmp_path / "f.raw", g, data)
    g2, back = read_raw(tmp_path / "f.raw")
    assert g2 == g and np.array_equal(back, data)


def test_grid_record_roundtrip():
    g = Grid(3, 16, 2.5)
    assert Grid.from_record(g.to_record()) == g
    assert g.h == pytest.approx(5.0 / 16)
