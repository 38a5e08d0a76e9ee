import numpy as np
import pytest

from kepler_averaging.exceptions import ConfigError, WrongKindError
from kepler_averaging.forcing import (
    ForcingKind,
    FourierSpectrum,
    GeneralPotential,
    HarmonicPotential,
    LinearForcing,
    TidalPotential,
    eval_forcing,
    eval_potential,
    forcing_from_config,
    forcing_to_config,
    fourier_analyze,
    two_harmonic_forcing,
)


class TestFourierSpectrum:
    def test_drops_zero_coefficients(self):
        spectrum = FourierSpectrum({1: 1.0, 2: 0.0, -3: 2j})
        assert spectrum.coefficients == {1: 1 + 0j, -3: 2j}
        assert spectrum.coefficient(2) == 0j
        assert spectrum.max_abs() == 2.0

    def test_empty(self):
        assert FourierSpectrum().max_abs() == 0.0
        assert FourierSpectrum().evaluate(1.0) == 0j

    def test_evaluate_is_periodic(self):
        spectrum = FourierSpectrum({1: 1.0, -2: 0.5 - 1j})
        t = np.linspace(0.0, 1.0, 5)
        np.testing.assert_allclose(spectrum.evaluate(t + 2 * np.pi), spectrum.evaluate(t), atol=1e-14)

    def test_shifted_and_reversed(self):
        spectrum = FourierSpectrum({1: 1.0, -2: 0.5 - 1j, 3: 2.0})
        t = np.linspace(0.0, 2 * np.pi, 11)
        np.testing.assert_allclose(spectrum.shifted(0.7).evaluate(t), spectrum.evaluate(t + 0.7), atol=1e-13)
        np.testing.assert_allclose(spectrum.reversed().evaluate(t), spectrum.evaluate(-t), atol=1e-13)


class TestFourierAnalyze:
    def test_trigonometric_polynomial(self):
        spectrum = fourier_analyze(lambda t: np.exp(1j * t) + 3 * np.exp(-2j * t), n_max=4)
        assert spectrum.coefficient(1) == pytest.approx(1.0, abs=1e-12)
        assert spectrum.coefficient(-2) == pytest.approx(3.0, abs=1e-12)
        for n in (-4, -3, -1, 0, 2, 3, 4):
            assert abs(spectrum.coefficient(n)) < 1e-12

    def test_cosine(self):
        spectrum = fourier_analyze(np.cos, n_max=2)
        assert spectrum.coefficient(1) == pytest.approx(0.5, abs=1e-14)
        assert spectrum.coefficient(-1) == pytest.approx(0.5, abs=1e-14)

    def test_sine_cubed(self):
        spectrum = fourier_analyze(lambda t: np.sin(t) ** 3, n_max=4)
        assert abs(spectrum.coefficient(1)) == pytest.approx(3 / 8, abs=1e-14)
        assert abs(spectrum.coefficient(3)) == pytest.approx(1 / 8, abs=1e-14)
        assert spectrum.coefficient(1) == pytest.approx(-spectrum.coefficient(-1), abs=1e-14)

    def test_scalar_callable(self):
        spectrum = fourier_analyze(lambda t: complex(np.cos(2 * t), 0.0), n_max=3, n_samples=16)
        assert spectrum.coefficient(2) == pytest.approx(0.5, abs=1e-14)

    def test_recovers_spectrum(self):
        original = FourierSpectrum({-3: 1 - 1j, 0: 0.25, 1: 2.0, 5: 0.5j})
        recovered = fourier_analyze(original.evaluate, n_max=6)
        for n in range(-6, 7):
            assert recovered.coefficient(n) == pytest.approx(original.coefficient(n), abs=1e-12)

    def test_can_catch_coarse_grid(self):
        with pytest.raises(ValueError) as excinfo:
            fourier_analyze(np.cos, n_max=4, n_samples=8)
        assert "n_samples must be at least 20" in str(excinfo.value)


class TestEvalPotential:
    @pytest.mark.parametrize(
        "f, t, x, expected_u, expected_grad",
        [
            (LinearForcing({1: 1.0}), 0.0, [2.0, 0.0], -2.0, [-1.0, 0.0]),
            (LinearForcing({1: 1.0, -1: 4j}), np.pi / 2, [0.0, 0.0], 0.0, [-4.0, -1.0]),
            (LinearForcing({1: 1.0, -1: 4j}), np.pi / 2, [1.0, 2.0], -6.0, [-4.0, -1.0]),
        ],
        ids=[
            "single harmonic",
            "two harmonics at origin",
            "two harmonics",
        ],
    )
    def test_linear(self, f, t, x, expected_u, expected_grad):
        u, grad, hess = eval_potential(f, t, x)
        assert u == pytest.approx(expected_u, abs=1e-14)
        np.testing.assert_allclose(grad, expected_grad, atol=1e-14)
        np.testing.assert_array_equal(hess, np.zeros((2, 2)))

    def test_general_potential(self):
        f = GeneralPotential(
            lambda t, x: 0.5 * float(x @ x),
            lambda t, x: x,
            lambda t, x: np.eye(2),
            name="quadratic",
        )
        u, grad, hess = eval_potential(f, 1.0, [3.0, 4.0])
        assert u == pytest.approx(12.5)
        np.testing.assert_allclose(grad, [3.0, 4.0])
        np.testing.assert_allclose(hess, np.eye(2))
        assert f.kind == ForcingKind.GENERAL_POTENTIAL

    def test_linear_batch_matches_pointwise(self):
        f = LinearForcing({1: 1.0, -2: 0.3 + 0.2j})
        t = np.array([0.1, 1.5, 4.0])
        x = np.array([1.0 + 0.5j, -0.3 + 2j, 0.7 - 0.1j])
        u = f.potential_batch(t, x)
        grad = f.gradient_batch(t, x)
        for k in range(3):
            xk = np.array([x[k].real, x[k].imag])
            assert u[k] == pytest.approx(f.potential(t[k], xk), abs=1e-14)
            np.testing.assert_allclose(grad[k], f.gradient(t[k], xk), atol=1e-14)


class TestBuiltinPotentials:
    @pytest.mark.parametrize(
        "f",
        [
            HarmonicPotential(k=0.7, phase=0.3),
            TidalPotential(k=1.2, phase=-0.4, direction=-1),
        ],
        ids=[
            "harmonic",
            "tidal",
        ],
    )
    def test_derivatives_match_finite_differences(self, f):
        step = 1e-5
        t = 0.9
        x = np.array([0.8, -0.6])
        _, grad, hess = eval_potential(f, t, x)
        for j in range(2):
            shift = np.zeros(2)
            shift[j] = step
            fd_grad = (f.potential(t, x + shift) - f.potential(t, x - shift)) / (2 * step)
            fd_hess = (f.gradient(t, x + shift) - f.gradient(t, x - shift)) / (2 * step)
            assert grad[j] == pytest.approx(fd_grad, abs=1e-6)
            np.testing.assert_allclose(hess[:, j], fd_hess, atol=1e-6)

    def test_reverse_and_shift(self):
        f = TidalPotential(k=1.0, phase=0.2)
        x = np.array([1.0, 0.5])
        assert f.reverse_time().potential(0.4, x) == pytest.approx(f.potential(-0.4, x))
        assert f.shift_time(0.3).potential(0.4, x) == pytest.approx(f.potential(0.7, x))

    def test_can_catch_bad_direction(self):
        with pytest.raises(ValueError) as excinfo:
            HarmonicPotential(direction=2)
        assert "direction must be 1 or -1" in str(excinfo.value)


class TestEvalForcing:
    def test_two_harmonic_forcing(self):
        f = two_harmonic_forcing(4j)
        assert eval_forcing(f, np.pi / 2) == pytest.approx(4 + 1j, abs=1e-14)
        assert f.spectrum.coefficients == {1: 1 + 0j, -1: 4j}

    def test_higher_resonance(self):
        f = two_harmonic_forcing(0.5, N=2)
        assert f.spectrum.coefficient(2) == 1.0
        assert f.spectrum.coefficient(-2) == 0.5

    def test_can_catch_wrong_kind(self):
        with pytest.raises(WrongKindError) as excinfo:
            eval_forcing(HarmonicPotential(), 0.0)
        assert "eval_forcing needs LinearForcing" in str(excinfo.value)


class TestConfig:
    def test_fourier_round_trip(self):
        f = two_harmonic_forcing(2 + 2j)
        back = forcing_from_config(forcing_to_config(f))
        assert isinstance(back, LinearForcing)
        assert back.spectrum.coefficients == f.spectrum.coefficients

    def test_repeated_terms_add_up(self):
        f = forcing_from_config({"type": "fourier", "terms": [{"n": 1, "re": 1.0}, {"n": 1, "im": 2.0}]})
        assert f.spectrum.coefficient(1) == 1 + 2j

    def test_builtin_round_trip(self):
        f = forcing_from_config({"type": "builtin", "name": "tidal", "params": {"k": 0.5, "phase": 1.0}})
        assert isinstance(f, TidalPotential)
        assert forcing_to_config(f) == {
            "type": "builtin",
            "name": "tidal",
            "params": {"k": 0.5, "phase": 1.0, "direction": 1},
        }

    @pytest.mark.parametrize(
        "config, message",
        [
            ({"type": "spline"}, "unknown forcing type spline"),
            ({"type": "fourier", "terms": [{"re": 1.0}]}, "every fourier term needs an n"),
            ({"type": "builtin", "name": "solar"}, "unknown builtin potential solar"),
            ({"type": "builtin", "name": "harmonic", "params": {"mass": 1}}, "unknown parameters ['mass']"),
        ],
        ids=[
            "unknown type",
            "term without n",
            "unknown builtin",
            "unknown parameter",
        ],
    )
    def test_can_catch_config_errors(self, config, message):
        with pytest.raises(ConfigError) as excinfo:
            forcing_from_config(config)
        assert message in str(excinfo.value)

    def test_custom_potential_is_not_serializable(self):
        f = GeneralPotential(lambda t, x: 0.0, lambda t, x: np.zeros(2), lambda t, x: np.zeros((2, 2)), name="mine")
        with pytest.raises(ConfigError) as excinfo:
            forcing_to_config(f)
        assert "potential mine is not serializable" in str(excinfo.value)
