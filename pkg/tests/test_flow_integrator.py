import numpy as np
import pandas as pd
import pytest

from kepler_averaging.exceptions import CollisionGuardError, ConfigError
from kepler_averaging.flow_integrator import (
    IntegratorConfig,
    integrate,
    monodromy_in_poincare,
    period_map,
    unperturbed_period,
)
from kepler_averaging.forcing import LinearForcing, TidalPotential, two_harmonic_forcing
from kepler_averaging.kepler_geometry import (
    CartesianState,
    PoincareState,
    cartesian_to_poincare,
    kepler_flow_poincare,
    poincare_to_cartesian,
    resonant_Lambda,
    tau_n,
    winding_number,
)
from kepler_averaging.symplectic_spectra import parabolic_matrix, symplectic_defect
from kepler_averaging.utils import angle_distance


def circular_state(N: int, lam: float = 0.0) -> CartesianState:
    return poincare_to_cartesian(PoincareState(lam=lam, Lambda=resonant_Lambda(N), eta=0.0, xi=0.0))


class TestIntegratorConfig:
    def test_defaults(self):
        cfg = IntegratorConfig()
        assert cfg.method == "DOP853"
        assert cfg.rel_tol == 1e-11
        assert cfg.to_dict()["max_step"] is None

    def test_dict_round_trip(self):
        cfg = IntegratorConfig(rel_tol=1e-9, max_step=0.1, n_samples=33)
        assert IntegratorConfig.from_dict(cfg.to_dict()) == cfg
        assert IntegratorConfig.from_dict(IntegratorConfig().to_dict()) == IntegratorConfig()
        assert IntegratorConfig.from_dict(None) == IntegratorConfig()

    @pytest.mark.parametrize(
        "kwargs, message",
        [
            ({"rel_tol": 0.0}, "rel_tol must be positive"),
            ({"min_radius_guard": -1.0}, "min_radius_guard must be positive"),
            ({"method": "Euler"}, "unknown integration method Euler"),
            ({"n_samples": 1}, "n_samples must be at least 2"),
        ],
        ids=[
            "zero tolerance",
            "negative guard",
            "unknown method",
            "single sample",
        ],
    )
    def test_can_catch_bad_settings(self, kwargs, message):
        with pytest.raises(ConfigError) as excinfo:
            IntegratorConfig(**kwargs)
        assert message in str(excinfo.value)

    def test_can_catch_unknown_key(self):
        with pytest.raises(ConfigError) as excinfo:
            IntegratorConfig.from_dict({"rtol": 1e-9})
        assert "unknown integrator settings ['rtol']" in str(excinfo.value)


class TestUnperturbedFlow:
    @pytest.fixture(autouse=True)
    def setup(self):
        self.zero = LinearForcing({})

    def test_unit_circle_closes(self):
        s0 = CartesianState.from_values(1.0, 0.0, 0.0, 1.0)
        record = integrate(self.zero, 0.0, s0, (0.0, 2 * np.pi))
        np.testing.assert_allclose(record.final_state.as_vector(), s0.as_vector(), atol=1e-9)
        assert record.energy_drift < 1e-10
        assert record.angular_momentum_drift < 1e-10
        assert winding_number(record.positions) == 1

    def test_period(self):
        assert unperturbed_period(1.0) == pytest.approx(2 * np.pi)
        assert unperturbed_period(resonant_Lambda(2)) == pytest.approx(np.pi)

    def test_eccentric_orbit_conserves_integrals(self):
        s0 = poincare_to_cartesian(PoincareState(lam=0.4, Lambda=1.0, eta=0.3, xi=-0.5))
        record = integrate(self.zero, 0.0, s0, (0.0, 2 * np.pi))
        assert record.energy_drift < 1e-9
        assert record.angular_momentum_drift < 1e-9

    def test_flow_in_poincare_chart(self):
        p = PoincareState(lam=0.5, Lambda=1.1, eta=0.2, xi=-0.1)
        record = integrate(self.zero, 0.0, poincare_to_cartesian(p), (0.0, 1.7))
        pulled = cartesian_to_poincare(record.final_state)
        expected = kepler_flow_poincare(p, 1.7)
        assert angle_distance(pulled.lam, expected.lam) < 1e-8
        np.testing.assert_allclose([pulled.Lambda, pulled.eta, pulled.xi], [p.Lambda, p.eta, p.xi], atol=1e-8)

    @pytest.mark.parametrize(
        "N",
        [1, 2, 3],
        ids=["first", "second", "third"],
    )
    def test_monodromy_is_parabolic(self, N):
        s0 = circular_state(N, lam=0.3)
        s1, dpi = period_map(self.zero, 0.0, s0)
        np.testing.assert_allclose(s1.as_vector(), s0.as_vector(), atol=1e-8)
        s = monodromy_in_poincare(dpi, s0)
        tau = tau_n(N)
        np.testing.assert_allclose(s.entries, parabolic_matrix(tau), atol=1e-5)
        assert s.entries[0, 2] == pytest.approx(tau, rel=1e-5)

    def test_second_resonance_winds_twice(self):
        record = integrate(self.zero, 0.0, circular_state(2), (0.0, 2 * np.pi))
        assert winding_number(record.positions) == 2


class TestPerturbedFlow:
    @pytest.fixture(autouse=True)
    def setup(self):
        self.forcing = two_harmonic_forcing(2.0)
        self.s0 = CartesianState.from_values(1.0, 0.0, 0.0, 1.0)

    def test_monodromy_is_symplectic(self):
        _, dpi = period_map(self.forcing, 0.01, self.s0)
        assert symplectic_defect(dpi.entries) < 1e-7

    def test_general_potential_monodromy_is_symplectic(self):
        _, dpi = period_map(TidalPotential(k=0.5), 0.01, self.s0)
        assert symplectic_defect(dpi.entries) < 1e-7

    def test_variational_matches_finite_differences(self):
        eps = 0.01
        step = 1e-5
        _, dpi = period_map(self.forcing, eps, self.s0)
        base = self.s0.as_vector()
        columns = []
        for j in range(4):
            shift = np.zeros(4)
            shift[j] = step
            plus = integrate(self.forcing, eps, CartesianState.from_vector(base + shift), (0.0, 2 * np.pi))
            minus = integrate(self.forcing, eps, CartesianState.from_vector(base - shift), (0.0, 2 * np.pi))
            columns.append((plus.final_state.as_vector() - minus.final_state.as_vector()) / (2 * step))
        np.testing.assert_allclose(dpi.entries, np.column_stack(columns), atol=1e-4)

    def test_reversible(self):
        forward = integrate(self.forcing, 0.05, self.s0, (0.0, 1.3))
        backward = integrate(self.forcing, 0.05, forward.final_state, (1.3, 0.0))
        np.testing.assert_allclose(backward.final_state.as_vector(), self.s0.as_vector(), atol=1e-8)

    def test_drift_only_reported_without_perturbation(self):
        record = integrate(self.forcing, 0.01, self.s0, (0.0, 1.0))
        assert record.energy_drift is None
        assert record.angular_momentum_drift is None
        assert record.monodromy is None

    def test_record_layout(self):
        cfg = IntegratorConfig(n_samples=11)
        record = integrate(self.forcing, 0.01, self.s0, (0.0, 1.0), cfg)
        df = record.to_frame()
        assert isinstance(df, pd.DataFrame)
        assert list(df.columns) == ["t", "x1", "x2", "y1", "y2"]
        assert len(df) == 11
        assert df["t"].iloc[-1] == pytest.approx(1.0)
        t, state = record.samples[0]
        assert t == 0.0
        np.testing.assert_allclose(state.as_vector(), self.s0.as_vector(), atol=1e-14)

    def test_can_catch_collision(self):
        s0 = CartesianState.from_values(1.0, 0.0, 0.0, 0.0)
        with pytest.raises(CollisionGuardError) as excinfo:
            integrate(self.forcing, 0.0, s0, (0.0, 2 * np.pi))
        assert "|x| dropped below 0.001" in str(excinfo.value)

    def test_can_catch_empty_span(self):
        with pytest.raises(ValueError) as excinfo:
            integrate(self.forcing, 0.01, self.s0, (1.0, 1.0))
        assert "t_span must have positive length" in str(excinfo.value)

    def test_transport_to_other_endpoint(self):
        s1, dpi = period_map(self.forcing, 0.01, self.s0)
        s = monodromy_in_poincare(dpi, self.s0, s1)
        assert s.symplectic_defect < 1e-5
