import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import euler_reference, quadrature_flow, rk4_reference
from rfsolve.errors import FieldDivergence
from rfsolve.field import (
    Constant,
    GaussianPairOT,
    LinearState,
    LinearTime,
    QuadraticTime,
    Rotation,
    VelocityField,
    evaluate,
    exact_solution,
)

FIELDS = {
    "constant": (Constant([1.0, -2.0]), [0.3, 0.7]),
    "linear-state": (LinearState(1.0), [1.0]),
    "linear-time": (LinearTime(), [0.0]),
    "quadratic-time": (QuadraticTime(), [0.5]),
    "rotation": (Rotation(1.0), [1.0, 0.5]),
    "gaussian-ot": (GaussianPairOT(), [2.3, -1.2]),
}


def test_constant_evaluate():
    np.testing.assert_array_equal(evaluate(Constant([1.0, 2.0]), [0.0, 0.0], 0.5), [1.0, 2.0])


def test_linear_state_evaluate():
    np.testing.assert_array_equal(evaluate(LinearState(2.0), [3.0], 0.7), [6.0])


def test_linear_time_evaluate():
    np.testing.assert_array_equal(evaluate(LinearTime(), [0.0], 0.25), [0.25])


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError, match="shape"):
        evaluate(Rotation(), [1.0, 2.0, 3.0], 0.5)


def test_time_outside_domain_rejected():
    with pytest.raises(ValueError):
        evaluate(LinearTime(), [0.0], -0.1)


def test_non_finite_output_is_divergence():
    class Blowup(VelocityField):
        dim = 1

        def velocity(self, state, t, condition=None):
            return state / 0.0

    with np.errstate(divide="ignore"):
        with pytest.raises(FieldDivergence, match="field divergence"):
            evaluate(Blowup(), [1.0], 0.5)


def test_batched_states_supported():
    z = np.arange(6.0).reshape(3, 2)
    out = evaluate(Rotation(2.0), z, 0.1)
    np.testing.assert_array_equal(out, 2.0 * np.stack([-z[:, 1], z[:, 0]], axis=1))


def test_exact_linear_state_is_e():
    value = exact_solution(LinearState(1.0), [1.0], 0.0, 1.0)[0]
    assert value == pytest.approx(2.718281828459045, abs=1e-15)
    # independent cross-check, RK4 at h = 1e-5
    assert rk4_reference(LinearState(1.0), [1.0], 0.0, 1.0, steps=100_000).value[0] == pytest.approx(value, abs=1e-10)


def test_exact_linear_time_matches_quadrature():
    assert exact_solution(LinearTime(), [0.0], 0.0, 1.0)[0] == 0.5
    assert quadrature_flow(LinearTime(), [0.0], 0.0, 1.0)[0] == pytest.approx(0.5, abs=1e-14)
    assert quadrature_flow(QuadraticTime(), [0.0], 0.0, 1.0)[0] == pytest.approx(
        exact_solution(QuadraticTime(), [0.0], 0.0, 1.0)[0], abs=1e-14)


@pytest.mark.parametrize("name", list(FIELDS))
def test_exact_identity(name):
    field, z = FIELDS[name]
    np.testing.assert_array_equal(exact_solution(field, z, 0.3, 0.3), z)


@pytest.mark.parametrize("name", list(FIELDS))
@settings(max_examples=40, deadline=None)
@given(t=st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3))
def test_exact_composes(name, t):
    field, z = FIELDS[name]
    a, b, c = t
    two_leg = exact_solution(field, exact_solution(field, z, a, b), b, c)
    np.testing.assert_allclose(two_leg, exact_solution(field, z, a, c), rtol=0, atol=1e-12)


@pytest.mark.parametrize("name", list(FIELDS))
def test_exact_matches_rk4(name):
    field, z = FIELDS[name]
    ref = rk4_reference(field, z, 1.0, 0.0)
    np.testing.assert_allclose(exact_solution(field, z, 1.0, 0.0), ref.value, rtol=0, atol=max(1e-10, 10 * ref.error_bound))


@pytest.mark.slow
@pytest.mark.parametrize("name", list(FIELDS))
def test_exact_matches_million_step_euler(name):
    field, z = FIELDS[name]
    exact = exact_solution(field, z, 0.0, 1.0)
    approx = euler_reference(field, z, 0.0, 1.0, 1_000_000)
    assert np.linalg.norm(approx - exact) <= 1e-5 * np.linalg.norm(exact)


@pytest.mark.parametrize("name", list(FIELDS))
def test_total_derivative_matches_finite_difference_of_flow(name):
    # d/dt v(z(t), t) along the exact flow, by a central difference in time
    field, z = FIELDS[name]
    t, h = 0.4, 1e-5
    v_at = lambda s: field.velocity(exact_solution(field, z, 0.4, s), s)
    numeric = (v_at(t + h) - v_at(t - h)) / (2 * h)
    np.testing.assert_allclose(field.total_derivative(np.asarray(z, float), t), numeric, rtol=1e-6, atol=1e-8)


def test_rotation_preserves_norm():
    z = np.array([0.6, -0.8])
    assert np.linalg.norm(exact_solution(Rotation(3.0), z, 0.0, 1.0)) == pytest.approx(1.0, abs=1e-15)


def test_gaussian_ot_pushes_marginals():
    # the closed-form flow must carry N(mu1, sigma1^2) at t=1 to N(mu0, sigma0^2) at t=0
    field = GaussianPairOT()
    noise = np.random.default_rng(0).standard_normal((200_000, 2))
    data = exact_solution(field, noise, 1.0, 0.0)
    np.testing.assert_allclose(data.mean(axis=0), field.mu0, atol=0.01)
    np.testing.assert_allclose(data.std(axis=0), field.sigma0, rtol=0.01)


def test_evaluate_is_pure():
    field, z = FIELDS["gaussian-ot"]
    a = evaluate(field, z, 0.37)
    b = evaluate(field, z, 0.37)
    assert a.tobytes() == b.tobytes()

