import numpy as np
import pytest

from hetcoint.exceptions import DimensionMismatch, UnsupportedModel
from hetcoint.models import (
    Family,
    ModelSpec,
    design_matrix,
    eval_model,
    linear_model,
    model_jacobian,
    polynomial_model,
    smooth_transition_model,
)


def test_cubic_eval_matches_hand_value():
    spec = polynomial_model(3)
    assert eval_model(spec, 1.0, theta=(1.0, 2.0, 1.0)) == pytest.approx(4.0)


def test_linear_zero_coefficient():
    spec = linear_model()
    for x in (-3.0, 0.0, 17.5):
        assert eval_model(spec, x, theta=(0.0,)) == 0.0


def test_smooth_transition_at_midpoint():
    spec = smooth_transition_model(intercept=True)
    # at x = location the logistic equals 1/2
    assert eval_model(spec, 5.0, theta=(0.0, 1.0, 1.0, 5.0)) == pytest.approx(5.5)


def test_quadratic_jacobian_is_powers_of_x():
    spec = polynomial_model(2)
    np.testing.assert_allclose(model_jacobian(spec, 3.0, theta=(1.0, 1.0)), [3.0, 9.0])


def test_smooth_transition_jacobian_at_midpoint():
    spec = smooth_transition_model(intercept=True)
    jac = model_jacobian(spec, 5.0, theta=(0.0, 1.0, 1.0, 5.0))
    np.testing.assert_allclose(jac, [1.0, 5.0, 0.5, -0.25])


def _fd_jacobian(spec, x, t, theta):
    theta = np.asarray(theta, dtype=float)
    out = np.empty((np.size(x), theta.size))
    for i in range(theta.size):
        h = 1e-6 * max(1.0, abs(theta[i]))
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        out[:, i] = (
            np.atleast_1d(eval_model(spec, x, t, up)) - np.atleast_1d(eval_model(spec, x, t, dn))
        ) / (2 * h)
    return out


@pytest.mark.parametrize(
    "spec",
    [
        linear_model(),
        linear_model(intercept=True),
        polynomial_model(2),
        polynomial_model(3, intercept=True, trend=True),
        smooth_transition_model(intercept=True),
        smooth_transition_model(),
    ],
    ids=lambda s: f"{s.family.value}-det{s.n_deterministic}",
)
def test_jacobian_matches_finite_differences(spec):
    rng = np.random.default_rng(101)
    for _ in range(10):
        x = rng.normal(scale=5.0, size=20)
        t = np.arange(1, 21) if spec.trend else None
        theta = rng.normal(scale=2.0, size=spec.n_params)
        jac = model_jacobian(spec, x, t, theta)
        fd = _fd_jacobian(spec, x, t, theta)
        np.testing.assert_allclose(jac, fd, rtol=1e-6, atol=1e-6)


def test_polynomial_degree_one_equals_linear():
    lin, poly = linear_model(), polynomial_model(1)
    rng = np.random.default_rng(3)
    x = rng.normal(size=50)
    theta = (0.7,)
    np.testing.assert_array_equal(eval_model(lin, x, theta=theta), eval_model(poly, x, theta=theta))


def test_intercept_shifts_eval_exactly():
    base = polynomial_model(2)
    shifted = polynomial_model(2, intercept=True)
    rng = np.random.default_rng(4)
    x = rng.normal(size=30)
    fam = (0.5, -0.2)
    c = 3.25
    np.testing.assert_array_equal(
        eval_model(shifted, x, theta=(c, *fam)),
        eval_model(base, x, theta=fam) + c,
    )


def test_deterministics_come_first_in_layout():
    spec = polynomial_model(1, intercept=True, trend=True)
    t = np.array([1.0, 2.0, 3.0])
    x = np.zeros(3)
    # theta = (intercept, trend, slope)
    got = eval_model(spec, x, t, (10.0, 2.0, 99.0))
    np.testing.assert_allclose(got, [12.0, 14.0, 16.0])


def test_wrong_theta_length_raises():
    with pytest.raises(DimensionMismatch):
        eval_model(linear_model(), 1.0, theta=(1.0, 2.0))
    with pytest.raises(DimensionMismatch):
        model_jacobian(polynomial_model(2), 1.0, theta=(1.0,))


def test_nonfinite_theta_rejected():
    with pytest.raises(ValueError):
        eval_model(linear_model(), 1.0, theta=(np.nan,))


def test_trend_requires_time_index():
    spec = linear_model(trend=True)
    with pytest.raises(ValueError):
        eval_model(spec, 1.0, theta=(1.0, 1.0))


def test_custom_family_callbacks():
    # g(x, theta) = theta_1 * exp(theta_2 * x)
    def value(x, t, th):
        return th[0] * np.exp(th[1] * x)

    def jac(x, t, th):
        return np.column_stack([np.exp(th[1] * x), th[0] * x * np.exp(th[1] * x)])

    spec = ModelSpec(family=Family.CUSTOM, value_fn=value, jacobian_fn=jac, n_custom_params=2)
    x = np.linspace(-1, 1, 15)
    theta = (2.0, 0.3)
    np.testing.assert_allclose(eval_model(spec, x, theta=theta), 2.0 * np.exp(0.3 * x))
    np.testing.assert_allclose(
        model_jacobian(spec, x, theta=theta), _fd_jacobian(spec, x, None, theta), rtol=1e-6
    )


def test_design_matrix_reproduces_linear_families():
    spec = polynomial_model(3, intercept=True, trend=True)
    rng = np.random.default_rng(8)
    x = rng.normal(size=40)
    t = np.arange(1, 41)
    theta = rng.normal(size=spec.n_params)
    np.testing.assert_allclose(design_matrix(spec, x, t) @ theta, eval_model(spec, x, t, theta))


def test_design_matrix_rejects_nonlinear_family():
    with pytest.raises(UnsupportedModel):
        design_matrix(smooth_transition_model(), np.arange(5.0))


def test_scalar_and_vector_eval_agree():
    spec = smooth_transition_model(intercept=True)
    theta = (0.3, 1.1, -0.5, 2.0)
    xs = np.array([-2.0, 0.0, 4.0])
    vec = eval_model(spec, xs, theta=theta)
    for i, x in enumerate(xs):
        assert eval_model(spec, float(x), theta=theta) == pytest.approx(vec[i])
