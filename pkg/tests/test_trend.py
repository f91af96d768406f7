import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stsli.geometry import STDataset
from stsli.simulate import GrfSpec, simulate_grf
from stsli.trend import (Basis, TrendModel, design_matrix, detrend, evaluate_trend,
                         n_basis_terms, ols_fit, parse_basis)

PERIODIC = ("constant", {"kind": "periodic_time", "degree": 2, "period": 24.0})


def ds_from_t(t, x=None, dim=1):
    t = np.asarray(t, dtype=float)
    return STDataset(np.zeros((t.shape[0], dim)) + np.arange(t.shape[0])[:, None], t, x)


def test_constant():
    m = TrendModel(("constant",), [10.0])
    np.testing.assert_array_equal(evaluate_trend(m, np.zeros((4, 2)), np.arange(4.0)), np.full(4, 10.0))


def test_quadratic_time_trend():
    b = [9.5587, 0.1019, -0.0004]
    m = TrendModel(("constant", {"kind": "poly_time", "degree": 2}), b)
    t = np.array([0.0, 1.0, 30.0, 365.0])
    np.testing.assert_allclose(evaluate_trend(m, np.zeros((4, 2)), t), b[0] + b[1] * t + b[2] * t**2, rtol=1e-15)


def test_periodic_with_zero_envelope_is_constant():
    m = TrendModel(PERIODIC, [5.0, 0, 0, 0, 0, 0, 0])
    np.testing.assert_array_equal(evaluate_trend(m, np.zeros((5, 1)), np.linspace(0, 100, 5)), 5.0)


def test_period_24():
    b = [1.0, 0.7, 0.0, 0.0, -0.3, 0.0, 0.0]
    m = TrendModel(PERIODIC, b)
    t = np.array([0.0, 3.0, 7.5, 13.0])
    s = np.zeros((4, 1))
    np.testing.assert_allclose(evaluate_trend(m, s, t + 24.0), evaluate_trend(m, s, t), rtol=0, atol=1e-14)


def test_periodic_column_layout():
    t = np.array([6.0])
    F = design_matrix(parse_basis(PERIODIC), np.zeros((1, 1)), t)
    c, s = np.cos(np.pi / 2), np.sin(np.pi / 2)
    np.testing.assert_allclose(F[0], [1, c, 6 * c, 36 * c, s, 6 * s, 36 * s], atol=1e-14)


def test_poly_space_columns():
    s = np.array([[2.0, 3.0]])
    F = design_matrix(parse_basis([{"kind": "poly_space", "degree": 2}]), s, np.zeros(1))
    np.testing.assert_array_equal(F[0], [2.0, 4.0, 3.0, 9.0])
    assert n_basis_terms([{"kind": "poly_space", "degree": 2}], 2) == 4


def test_basis_validation():
    with pytest.raises(ValueError):
        Basis("cubic_spline")
    with pytest.raises(ValueError):
        Basis("poly_space", 3)
    with pytest.raises(ValueError):
        Basis("periodic_time", 1, period=0.0)


def test_coefficient_count_checked():
    with pytest.raises(ValueError, match="coefficient count"):
        evaluate_trend(TrendModel(("constant",), [1.0, 2.0]), np.zeros((1, 1)), np.zeros(1))


def test_basis_dict_roundtrip():
    for b in parse_basis(PERIODIC + ({"kind": "poly_space", "degree": 1},)):
        assert Basis(**b.to_dict()) == b


class TestOls:
    def test_exact_quadratic(self):
        t = np.linspace(0, 10, 25)
        x = 3.0 - 0.5 * t + 0.25 * t**2
        fit = ols_fit(("constant", {"kind": "poly_time", "degree": 2}), ds_from_t(t, x))
        np.testing.assert_allclose(fit.coefficients, [3.0, -0.5, 0.25], rtol=0, atol=1e-10)
        np.testing.assert_allclose(fit.residuals, 0.0, atol=1e-10)

    def test_constant_is_mean(self, rng):
        x = rng.normal(size=40)
        fit = ols_fit(("constant",), ds_from_t(np.arange(40.0), x))
        assert fit.coefficients[0] == pytest.approx(x.mean(), rel=1e-13)
        assert fit.stderr[0] == pytest.approx(x.std(ddof=1) / np.sqrt(40), rel=1e-12)
        assert fit.upper[0] - fit.coefficients[0] == pytest.approx(1.959963984540054 * fit.stderr[0], rel=1e-12)

    def test_z_override(self, rng):
        x = rng.normal(size=10)
        fit = ols_fit(("constant",), ds_from_t(np.arange(10.0), x), z=5.0)
        assert fit.upper[0] - fit.lower[0] == pytest.approx(10 * fit.stderr[0], rel=1e-14)

    def test_collinear(self):
        with pytest.raises(ValueError, match="collinear basis"):
            ols_fit(("constant", "constant"), ds_from_t(np.arange(5.0), np.arange(5.0)))

    def test_periodic_monte_carlo(self):
        rng = np.random.default_rng(7)
        b_true = np.array([10.0, 1.0, 0.02, -0.0003, -0.5, 0.01, 0.0002])
        t = np.arange(0.0, 120.0, 1.0)
        F = design_matrix(parse_basis(PERIODIC), np.zeros((t.shape[0], 1)), t)
        inside = []
        for _ in range(100):
            x = F @ b_true + rng.normal(0, 0.5, size=t.shape[0])
            fit = ols_fit(PERIODIC, ds_from_t(t, x))
            inside.append(np.abs(fit.coefficients - b_true) <= 3 * fit.stderr)
        # 3-sigma coverage is 99.73% per coefficient
        assert np.mean(inside) >= 0.98


def test_detrend_examples():
    m = TrendModel(("constant",), [10.0])
    np.testing.assert_array_equal(detrend(m, ds_from_t([0.0, 1.0], [12.0, 8.0])), [2.0, -2.0])
    ds = ds_from_t([0.0, 1.0, 2.0], [10.0, 10.0, 10.0])
    np.testing.assert_array_equal(detrend(m, ds), 0.0)


def test_detrend_synthetic_constant():
    ds = simulate_grf(GrfSpec(seed=0))
    r = detrend(TrendModel(("constant",), [9.7424]), ds)
    assert abs(r.mean() - (ds.x.mean() - 9.7424)) <= 1e-10


@given(arrays(np.float64, 3, elements=st.floats(-100, 100)), arrays(np.float64, 3, elements=st.floats(-100, 100)))
def test_linear_in_coefficients(b1, b2):
    basis = ("constant", {"kind": "poly_time", "degree": 2})
    s, t = np.zeros((6, 1)), np.linspace(-3, 3, 6)
    lhs = evaluate_trend(TrendModel(basis, b1 + b2), s, t)
    rhs = evaluate_trend(TrendModel(basis, b1), s, t) + evaluate_trend(TrendModel(basis, b2), s, t)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-9)


@given(arrays(np.float64, 3, elements=st.floats(-10, 10)))
def test_detrend_of_exact_trend_is_zero(b):
    basis = ("constant", {"kind": "poly_time", "degree": 2})
    t = np.linspace(0, 5, 8)
    m = TrendModel(basis, b)
    ds = ds_from_t(t, evaluate_trend(m, np.zeros((8, 1)), t))
    np.testing.assert_array_equal(detrend(m, ds), 0.0)
