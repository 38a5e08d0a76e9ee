"""
perturbations U(t, x) of the Kepler problem

LinearForcing realizes U(t, x) = -<p(t), x> with p(t) = Σ c_n e^{int} read as a planar vector (ℝ² ≅ ℂ).
GeneralPotential wraps user callables; builtin potentials are vectorized subclasses of it.
every model is 2π-periodic in t: time is reduced modulo 2π before evaluation.
"""
import enum
import logging
from collections.abc import Callable

import numpy as np

from .exceptions import ConfigError, WrongKindError
from .utils import TWO_PI

logger = logging.getLogger(__name__)


class ForcingKind(str, enum.Enum):
    GENERAL_POTENTIAL = "GeneralPotential"
    LINEAR_FORCING = "LinearForcing"


class FourierSpectrum:
    """
    finitely supported map n -> c_n
    """
    def __init__(self, coefficients: dict[int, complex] | None = None):
        coefficients = coefficients or {}
        self._coefficients = {int(n): complex(c) for n, c in coefficients.items() if complex(c) != 0}

    @property
    def coefficients(self) -> dict[int, complex]:
        return dict(self._coefficients)

    def coefficient(self, n: int) -> complex:
        return self._coefficients.get(int(n), 0j)

    def max_abs(self) -> float:
        if not self._coefficients:
            return 0.0
        return max(abs(c) for c in self._coefficients.values())

    def evaluate(self, t):
        """
        p(t) = Σ c_n e^{int}, vectorized over t
        """
        t = np.mod(np.asarray(t, dtype=float), TWO_PI)
        total = np.zeros_like(t, dtype=complex)
        for n, c in self._coefficients.items():
            total = total + c * np.exp(1j * n * t)
        return total if total.ndim else complex(total)

    def shifted(self, s: float) -> "FourierSpectrum":
        """
        spectrum of t -> p(t + s)
        """
        return FourierSpectrum({n: c * np.exp(1j * n * s) for n, c in self._coefficients.items()})

    def reversed(self) -> "FourierSpectrum":
        """
        spectrum of t -> p(-t)
        """
        return FourierSpectrum({-n: c for n, c in self._coefficients.items()})

    def to_config(self) -> dict:
        return {
            "type": "fourier",
            "terms": [{"n": n, "re": c.real, "im": c.imag} for n, c in sorted(self._coefficients.items())],
        }

    def __repr__(self) -> str:
        return f"FourierSpectrum({self._coefficients})"


class ForcingModel:
    """
    base class of perturbations; batch methods take times t (n,) and complex positions x (n,)
    """
    kind: ForcingKind

    def potential(self, t: float, x: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, t: float, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, t: float, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def reverse_time(self) -> "ForcingModel":
        raise NotImplementedError

    def shift_time(self, s: float) -> "ForcingModel":
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError

    def potential_batch(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        return np.array([self.potential(ti, np.array([xi.real, xi.imag])) for ti, xi in zip(t, x)])

    def gradient_batch(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        return np.array([self.gradient(ti, np.array([xi.real, xi.imag])) for ti, xi in zip(t, x)])

    def hessian_batch(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        return np.array([self.hessian(ti, np.array([xi.real, xi.imag])) for ti, xi in zip(t, x)])


class LinearForcing(ForcingModel):
    kind = ForcingKind.LINEAR_FORCING

    def __init__(self, spectrum: FourierSpectrum | dict[int, complex]):
        if not isinstance(spectrum, FourierSpectrum):
            spectrum = FourierSpectrum(spectrum)
        self.spectrum = spectrum

    def p(self, t):
        return self.spectrum.evaluate(t)

    def potential(self, t: float, x: np.ndarray) -> float:
        p = self.p(t)
        return float(-(p.real * x[0] + p.imag * x[1]))

    def gradient(self, t: float, x: np.ndarray) -> np.ndarray:
        p = self.p(t)
        return -np.array([p.real, p.imag])

    def hessian(self, t: float, x: np.ndarray) -> np.ndarray:
        return np.zeros((2, 2))

    def potential_batch(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        return -np.real(np.asarray(self.p(t)) * np.conj(x))

    def gradient_batch(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        p = np.asarray(self.p(t))
        return -np.column_stack([p.real, p.imag])

    def hessian_batch(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        return np.zeros((len(t), 2, 2))

    def reverse_time(self) -> "LinearForcing":
        return LinearForcing(self.spectrum.reversed())

    def shift_time(self, s: float) -> "LinearForcing":
        return LinearForcing(self.spectrum.shifted(s))

    def to_config(self) -> dict:
        return self.spectrum.to_config()

    def __repr__(self) -> str:
        return f"LinearForcing({self.spectrum.coefficients})"


class GeneralPotential(ForcingModel):
    """
    U(t, x) with its gradient and Hessian supplied as callables of (t, x), x a length-2 array

    the callables are shared between threads and must be safe for concurrent evaluation
    """
    kind = ForcingKind.GENERAL_POTENTIAL

    def __init__(
            self,
            potential: Callable[[float, np.ndarray], float],
            gradient: Callable[[float, np.ndarray], np.ndarray],
            hessian: Callable[[float, np.ndarray], np.ndarray],
            name: str = "custom",
    ):
        self._potential = potential
        self._gradient = gradient
        self._hessian = hessian
        self.name = name

    def potential(self, t: float, x: np.ndarray) -> float:
        return float(self._potential(float(np.mod(t, TWO_PI)), np.asarray(x, dtype=float)))

    def gradient(self, t: float, x: np.ndarray) -> np.ndarray:
        return np.asarray(self._gradient(float(np.mod(t, TWO_PI)), np.asarray(x, dtype=float)), dtype=float)

    def hessian(self, t: float, x: np.ndarray) -> np.ndarray:
        return np.asarray(self._hessian(float(np.mod(t, TWO_PI)), np.asarray(x, dtype=float)), dtype=float)

    def reverse_time(self) -> "GeneralPotential":
        return GeneralPotential(
            lambda t, x: self._potential(np.mod(-t, TWO_PI), x),
            lambda t, x: self._gradient(np.mod(-t, TWO_PI), x),
            lambda t, x: self._hessian(np.mod(-t, TWO_PI), x),
            name=f"{self.name}_reversed",
        )

    def shift_time(self, s: float) -> "GeneralPotential":
        return GeneralPotential(
            lambda t, x: self._potential(np.mod(t + s, TWO_PI), x),
            lambda t, x: self._gradient(np.mod(t + s, TWO_PI), x),
            lambda t, x: self._hessian(np.mod(t + s, TWO_PI), x),
            name=f"{self.name}_shifted",
        )

    def to_config(self) -> dict:
        raise ConfigError(f"potential {self.name} is not serializable")


class BuiltinPotential(GeneralPotential):
    """
    compiled-in potential depending on t through θ = direction·t + phase
    """
    name = "builtin"

    def __init__(self, k: float = 1.0, phase: float = 0.0, direction: int = 1):
        if direction not in (1, -1):
            raise ValueError("direction must be 1 or -1")
        self.k = float(k)
        self.phase = float(phase)
        self.direction = direction

    def _angle(self, t):
        return self.direction * np.asarray(t, dtype=float) + self.phase

    def potential(self, t: float, x: np.ndarray) -> float:
        return float(self.potential_batch(np.array([t]), np.array([complex(x[0], x[1])]))[0])

    def gradient(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.gradient_batch(np.array([t]), np.array([complex(x[0], x[1])]))[0]

    def hessian(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.hessian_batch(np.array([t]), np.array([complex(x[0], x[1])]))[0]

    def reverse_time(self) -> "BuiltinPotential":
        return type(self)(k=self.k, phase=self.phase, direction=-self.direction)

    def shift_time(self, s: float) -> "BuiltinPotential":
        return type(self)(k=self.k, phase=self.phase + self.direction * s, direction=self.direction)

    def to_config(self) -> dict:
        return {
            "type": "builtin",
            "name": self.name,
            "params": {"k": self.k, "phase": self.phase, "direction": self.direction},
        }

    def __repr__(self) -> str:
        return f"{type(self).__name__}(k={self.k}, phase={self.phase}, direction={self.direction})"


class HarmonicPotential(BuiltinPotential):
    """
    U = ½ k cos(θ) |x|²
    """
    name = "harmonic"

    def potential_batch(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        return 0.5 * self.k * np.cos(self._angle(t)) * np.abs(x) ** 2

    def gradient_batch(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        factor = self.k * np.cos(self._angle(t))
        return np.column_stack([factor * x.real, factor * x.imag])

    def hessian_batch(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        factor = self.k * np.cos(self._angle(t))
        return factor[:, None, None] * np.eye(2)[None, :, :]


class TidalPotential(BuiltinPotential):
    """
    U = ½ k (3<x, d>² - |x|²) with d = (cos θ, sin θ)
    """
    name = "tidal"

    def potential_batch(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        angle = self._angle(t)
        projection = x.real * np.cos(angle) + x.imag * np.sin(angle)
        return 0.5 * self.k * (3.0 * projection ** 2 - np.abs(x) ** 2)

    def gradient_batch(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        angle = self._angle(t)
        d1, d2 = np.cos(angle), np.sin(angle)
        projection = x.real * d1 + x.imag * d2
        return self.k * np.column_stack([3.0 * projection * d1 - x.real, 3.0 * projection * d2 - x.imag])

    def hessian_batch(self, t: np.ndarray, x: np.ndarray) -> np.ndarray:
        angle = np.atleast_1d(self._angle(t))
        d = np.stack([np.cos(angle), np.sin(angle)], axis=1)
        return self.k * (3.0 * d[:, :, None] * d[:, None, :] - np.eye(2)[None, :, :])


BUILTIN_POTENTIALS = {
    HarmonicPotential.name: HarmonicPotential,
    TidalPotential.name: TidalPotential,
}


def eval_forcing(f: ForcingModel, t):
    """
    p(t) of a linear forcing
    """
    if f.kind != ForcingKind.LINEAR_FORCING:
        raise WrongKindError(f"eval_forcing needs LinearForcing, got {f.kind.value}")
    return f.p(t)


def eval_potential(f: ForcingModel, t: float, x: any) -> tuple[float, np.ndarray, np.ndarray]:
    """
    :return: U, ∇ₓU and Dₓ²U at (t, x)
    """
    x = np.asarray(x, dtype=float)
    return f.potential(t, x), f.gradient(t, x), f.hessian(t, x)


def fourier_analyze(p: Callable, n_max: int, n_samples: int | None = None) -> FourierSpectrum:
    """
    c_n = (1/2π)∫ p(t) e^{-int} dt on a uniform grid, |n| <= n_max

    :param p: 2π-periodic map t -> complex, vectorized or not
    :param n_max: largest harmonic returned
    :param n_samples: grid size, at least 4·n_max + 4; defaults to the next power of two
    """
    min_samples = 4 * n_max + 4
    if n_samples is None:
        n_samples = 1 << int(np.ceil(np.log2(min_samples)))
    if n_samples < min_samples:
        raise ValueError(f"n_samples must be at least {min_samples}, got {n_samples}")
    if n_samples & (n_samples - 1):
        logger.debug("fourier_analyze with %d samples, not a power of two", n_samples)

    t = TWO_PI * np.arange(n_samples) / n_samples
    try:
        samples = np.asarray(p(t), dtype=complex)
        if samples.shape != t.shape:
            raise ValueError
    except (TypeError, ValueError):
        samples = np.array([complex(p(ti)) for ti in t])

    coefficients = np.fft.fft(samples) / n_samples
    return FourierSpectrum({n: coefficients[n % n_samples] for n in range(-n_max, n_max + 1)})


def two_harmonic_forcing(a: complex, N: int = 1) -> LinearForcing:
    """
    p(t) = e^{iNt} + a e^{-iNt}
    """
    if N == 0:
        raise ValueError("N must be nonzero")
    return LinearForcing({N: 1.0, -N: complex(a)})


def forcing_from_config(config: dict) -> ForcingModel:
    """
    {"type": "fourier", "terms": [{"n", "re", "im"}, ...]} or {"type": "builtin", "name", "params"}
    """
    kind = config.get("type")
    if kind == "fourier":
        terms = config.get("terms", [])
        coefficients: dict[int, complex] = {}
        for term in terms:
            if "n" not in term:
                raise ConfigError("every fourier term needs an n")
            n = int(term["n"])
            coefficients[n] = coefficients.get(n, 0j) + complex(float(term.get("re", 0.0)), float(term.get("im", 0.0)))
        return LinearForcing(coefficients)

    if kind == "builtin":
        name = config.get("name")
        if name not in BUILTIN_POTENTIALS:
            raise ConfigError(f"unknown builtin potential {name}")
        params = dict(config.get("params", {}))
        unknown = set(params) - {"k", "phase", "direction"}
        if unknown:
            raise ConfigError(f"unknown parameters {sorted(unknown)} for builtin potential {name}")
        return BUILTIN_POTENTIALS[name](**params)

    raise ConfigError(f"unknown forcing type {kind}")


def forcing_to_config(f: ForcingModel) -> dict:
    return f.to_config()
