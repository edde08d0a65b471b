import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from elastofds.medium import (BurtonMillerCoupling, IncidentWave, ParameterError,
                              default_medium, incident_displacement, incident_traction,
                              medium_from_speeds)

speeds = st.tuples(st.floats(0.2, 5.0), st.floats(1.05, 4.0), st.floats(0.1, 10.0),
                   st.floats(0.05, 20.0))


def navier_residual(medium, fn, x, h=1e-4):
    """(lambda + mu) grad div u + mu lap u + rho omega^2 u by central differences."""
    def u(p):
        return fn(p)

    e = np.eye(2)
    second = np.zeros((2, 2, 2), dtype=complex)       # d2 u_i / dx_a dx_b
    for a in range(2):
        for b in range(2):
            second[:, a, b] = (u(x + h * e[a] + h * e[b]) - u(x + h * e[a] - h * e[b])
                               - u(x - h * e[a] + h * e[b]) + u(x - h * e[a] - h * e[b])) / (4 * h * h)
    grad_div = np.array([second[0, 0, i] + second[1, 1, i] for i in range(2)])
    lap = second[:, 0, 0] + second[:, 1, 1]
    return ((medium.lam + medium.mu) * grad_div + medium.mu * lap
            + medium.rho * medium.omega ** 2 * u(x))


class TestMedium:
    def test_default_values(self):
        m = medium_from_speeds(math.sqrt(3.0), 1.0, 1.0, 2.0)
        assert_allclose([m.lam, m.mu, m.k_L, m.k_T], [1.0, 1.0, 2 / math.sqrt(3.0), 2.0],
                        rtol=1e-14)

    def test_zero_frequency_rejected(self):
        with pytest.raises(ParameterError):
            medium_from_speeds(math.sqrt(3.0), 1.0, 1.0, 0.0)

    @pytest.mark.parametrize("args", [(1.0, 1.0, 1.0, 1.0), (0.5, 1.0, 1.0, 1.0),
                                      (2.0, 1.0, -1.0, 1.0), (2.0, 0.0, 1.0, 1.0)])
    def test_invalid_inputs(self, args):
        with pytest.raises(ParameterError):
            medium_from_speeds(*args)

    @given(speeds)
    def test_speed_round_trip(self, s):
        c_T, ratio, rho, omega = s
        c_L = ratio * c_T
        m = medium_from_speeds(c_L, c_T, rho, omega)
        assert_allclose([m.c_L, m.c_T], [c_L, c_T], rtol=1e-14)
        assert m.k_L < m.k_T

    def test_elastic_tensor_symmetries(self):
        C = default_medium(1.0).elastic_tensor()
        assert_allclose(C, C.transpose(2, 3, 0, 1))
        assert_allclose(C, C.transpose(1, 0, 3, 2))


class TestIncidentWave:
    def test_origin(self):
        m = default_medium(2.0)
        assert_allclose(incident_displacement(IncidentWave(), m, [0.0, 0.0]), [1.0, 0.0])

    @given(st.floats(-10, 10), st.floats(-10, 10), st.floats(0, 2 * math.pi))
    def test_unit_modulus(self, x1, x2, angle):
        u = incident_displacement(IncidentWave.from_angle(angle, 2.5), default_medium(3.0),
                                  [x1, x2])
        assert_allclose(np.linalg.norm(u), 2.5, rtol=1e-13)

    def test_direction_must_be_unit(self):
        with pytest.raises(ParameterError):
            IncidentWave((1.0, 1.0))

    def test_navier_residual(self, rng):
        m = default_medium(2.0)
        w = IncidentWave.from_angle(0.7)
        for x in rng.uniform(-2, 2, size=(100, 2)):
            res = navier_residual(m, lambda p: incident_displacement(w, m, p), x)
            assert np.linalg.norm(res) <= 1e-5 * m.mu * m.k_T ** 2


class TestIncidentTraction:
    def test_normal_traction(self):
        m = default_medium(2.0)
        t = incident_traction(IncidentWave(), m, [0.0, 0.0], [1.0, 0.0])
        assert_allclose(t, [-3j * m.k_L, 0.0], atol=1e-15)

    def test_transverse_plane(self):
        m = default_medium(2.0)
        t = incident_traction(IncidentWave(), m, [0.0, 0.0], [0.0, 1.0])
        # only lambda div(u) n survives: (0, -i k_L lambda)
        assert_allclose(t, [0.0, -1j * m.k_L * m.lam], atol=1e-15)

    def test_linear_in_amplitude(self):
        m = default_medium(2.0)
        a = incident_traction(IncidentWave(amplitude=1.0), m, [0.3, 0.2], [0.6, 0.8])
        b = incident_traction(IncidentWave(amplitude=2.0), m, [0.3, 0.2], [0.6, 0.8])
        assert_allclose(b, 2 * a, rtol=1e-15)

    def test_matches_finite_differences(self, rng):
        m = default_medium(2.0)
        w = IncidentWave.from_angle(1.1)
        C = m.elastic_tensor()
        h = 1e-6
        for _ in range(100):
            x = rng.uniform(-2, 2, 2)
            th = rng.uniform(0, 2 * math.pi)
            n = np.array([math.cos(th), math.sin(th)])
            grad = np.stack([(incident_displacement(w, m, x + h * e)
                              - incident_displacement(w, m, x - h * e)) / (2 * h)
                             for e in np.eye(2)], axis=-1)            # du_j / dx_q
            fd = np.einsum("ipjq,p,jq->i", C, n, grad)
            assert_allclose(incident_traction(w, m, x, n), fd, rtol=1e-6, atol=1e-8)


class TestCoupling:
    def test_default_alpha(self):
        m = default_medium(2.0)
        assert BurtonMillerCoupling.default(m).alpha == 1j / m.k_T

    def test_real_alpha_rejected(self):
        with pytest.raises(ParameterError):
            BurtonMillerCoupling(0.5)
