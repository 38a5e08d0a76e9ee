"""
charts of the planar Kepler problem

astronomical (a, e, l, g), Delaunay (l, L, g, G) and Poincaré (λ, Λ, η, ξ) coordinates,
the Kepler equation and the derivatives of the Poincaré chart at the circular locus η = ξ = 0.
positions and velocities are identified with complex numbers x = x1 + i x2 where convenient.
canonical ordering of the Poincaré chart is (λ, η, Λ, ξ), of the Cartesian one (x1, x2, y1, y2).
"""
import dataclasses
import logging

import numpy as np

from .exceptions import (
    CircularLocusError,
    NoConvergenceError,
    NotClosedError,
    NotEllipticError,
    OutOfDomainError,
    PathThroughOriginError,
)
from .utils import TWO_PI, angle_difference, wrap_angle

logger = logging.getLogger(__name__)

TOL_CIRC = 1e-9
KEPLER_MAX_ITER = 50


@dataclasses.dataclass(frozen=True, eq=False)
class CartesianState:
    x: np.ndarray
    y: np.ndarray

    @classmethod
    def from_values(cls, x1: float, x2: float, y1: float, y2: float) -> "CartesianState":
        return cls(x=np.array([x1, x2], dtype=float), y=np.array([y1, y2], dtype=float))

    @classmethod
    def from_vector(cls, vector: any) -> "CartesianState":
        v = np.asarray(vector, dtype=float)
        if v.shape != (4,):
            raise ValueError(f"cartesian state needs 4 values, got shape {v.shape}")
        return cls.from_values(*v)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])

    @property
    def z(self) -> complex:
        return complex(self.x[0], self.x[1])

    @property
    def velocity(self) -> complex:
        return complex(self.y[0], self.y[1])

    def to_dict(self) -> dict:
        return {"chart": "cartesian", "values": [float(v) for v in self.as_vector()]}


@dataclasses.dataclass(frozen=True)
class AstroCoords:
    a: float
    e: float
    l: float
    g: float

    def to_dict(self) -> dict:
        return {"chart": "astro", "values": [self.a, self.e, self.l, self.g]}


@dataclasses.dataclass(frozen=True)
class DelaunayCoords:
    l: float
    L: float
    g: float
    G: float

    def to_dict(self) -> dict:
        return {"chart": "delaunay", "values": [self.l, self.L, self.g, self.G]}


@dataclasses.dataclass(frozen=True)
class PoincareState:
    lam: float
    Lambda: float
    eta: float
    xi: float

    def canonical(self) -> np.ndarray:
        """
        (λ, η, Λ, ξ)
        """
        return np.array([self.lam, self.eta, self.Lambda, self.xi], dtype=float)

    @classmethod
    def from_canonical(cls, values: any) -> "PoincareState":
        lam, eta, big_lambda, xi = (float(v) for v in values)
        return cls(lam=wrap_angle(lam), Lambda=big_lambda, eta=eta, xi=xi)

    @property
    def radius_squared(self) -> float:
        return self.eta * self.eta + self.xi * self.xi

    def to_dict(self) -> dict:
        return {"chart": "poincare", "values": [self.lam, self.Lambda, self.eta, self.xi]}


@dataclasses.dataclass(frozen=True, eq=False)
class PoincareJet2:
    """
    value at (λ, Λ, 0, 0) with derivatives in (λ, η, ξ)

    d1[k, j] = ∂_j of component k of (x1, x2, y1, y2); d2[k, i, j] = ∂_i ∂_j of the same component
    """
    value: CartesianState
    d1: np.ndarray
    d2: np.ndarray


@dataclasses.dataclass(frozen=True)
class RegularizingAuxiliaries:
    e: float
    gamma: float
    A: float
    B: float
    alpha: float
    beta: float
    w: float


def state_from_dict(data: dict) -> CartesianState | PoincareState | DelaunayCoords | AstroCoords:
    chart = data.get("chart")
    values = [float(v) for v in data.get("values", [])]
    if len(values) != 4:
        raise ValueError(f"state needs 4 values, got {len(values)}")
    if chart == "cartesian":
        return CartesianState.from_values(*values)
    if chart == "poincare":
        return PoincareState(*values)
    if chart == "delaunay":
        return DelaunayCoords(*values)
    if chart == "astro":
        return AstroCoords(*values)
    raise ValueError(f"unknown chart {chart}")


def energy(s: CartesianState) -> float:
    return float(0.5 * np.dot(s.y, s.y) - 1.0 / np.linalg.norm(s.x))


def angular_momentum(s: CartesianState) -> float:
    return float(s.x[0] * s.y[1] - s.x[1] * s.y[0])


def in_elliptic_region(s: CartesianState) -> bool:
    return np.linalg.norm(s.x) > 0 and energy(s) < 0 and angular_momentum(s) > 0


def on_circular_surface(s: CartesianState, tol: float = 1e-10) -> bool:
    """
    2EM² = -1 characterizes circular motions
    """
    return abs(2.0 * energy(s) * angular_momentum(s) ** 2 + 1.0) <= tol


def resonant_Lambda(N: int) -> float:
    """
    Λ_N = |N|^(-1/3): the unperturbed orbit has period 2π/|N|
    """
    if N == 0:
        raise ValueError("winding number must be nonzero")
    return abs(N) ** (-1.0 / 3.0)


def h_second_derivative(N: int) -> float:
    """
    h''(r_N) = -3|N|^(4/3) for h(r) = -1/(2r²)
    """
    return -3.0 / resonant_Lambda(N) ** 4


def tau_n(N: int) -> float:
    """
    shear of the unperturbed monodromy P_*: τ_N = 2π h''(r_N) = -6π|N|^(4/3)
    """
    return TWO_PI * h_second_derivative(N)


def in_sigma_n(s: CartesianState, N: int, tol: float = 1e-10) -> bool:
    """
    membership in Σ_N: E = -|N|^(2/3)/2 and N·M > 0
    """
    if N == 0:
        raise ValueError("winding number must be nonzero")
    return abs(energy(s) + 0.5 * abs(N) ** (2.0 / 3.0)) <= tol and N * angular_momentum(s) > 0


def _shifted_kepler(alpha, beta, tol: float = 1e-15):
    """
    solve w = α sin w + β cos w, that is w = u - l for α = e cos l, β = e sin l
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    w = beta.copy()

    for _ in range(KEPLER_MAX_ITER):
        sin_w, cos_w = np.sin(w), np.cos(w)
        residual = w - alpha * sin_w - beta * cos_w
        if np.all(np.abs(residual) <= tol):
            return w
        # derivative is 1 - e cos u >= 1 - e > 0
        w = w - residual / (1.0 - alpha * cos_w + beta * sin_w)

    residual = w - alpha * np.sin(w) - beta * np.cos(w)
    stuck = np.abs(residual) > 10 * tol
    if np.any(stuck):
        logger.debug("kepler newton did not settle for %d points, switching to bisection", int(np.sum(stuck)))
        e = np.hypot(alpha, beta)
        lo, hi = -e, np.array(e)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            f_mid = mid - alpha * np.sin(mid) - beta * np.cos(mid)
            lo = np.where(f_mid < 0, mid, lo)
            hi = np.where(f_mid < 0, hi, mid)
        w = np.where(stuck, 0.5 * (lo + hi), w)
        residual = w - alpha * np.sin(w) - beta * np.cos(w)
        if np.any(np.abs(residual) > 1e-12):
            raise NoConvergenceError("kepler equation did not converge")
    return w


def solve_kepler(e: float, l: float, tol: float = 1e-12) -> float:
    """
    eccentric anomaly u with u - e sin u = l

    :param e: eccentricity in [0, 1)
    :param l: mean anomaly
    :param tol: residual tolerance
    :return: u in [0, 2π)
    """
    if not 0 <= e < 1:
        raise ValueError(f"eccentricity must be in [0, 1), got {e}")

    l = wrap_angle(l)
    w = float(_shifted_kepler(e * np.cos(l), e * np.sin(l), tol=min(tol, 1e-15)))
    u = l + w
    if abs(u - e * np.sin(u) - l) > max(tol, 1e-13):
        raise NoConvergenceError(f"kepler equation residual exceeds {tol} for e={e}, l={l}")
    return wrap_angle(u)


def _rotate(vector: np.ndarray, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([c * vector[0] - s * vector[1], s * vector[0] + c * vector[1]])


def astro_to_cartesian(c: AstroCoords) -> CartesianState:
    if c.a <= 0 or not 0 <= c.e < 1:
        raise ValueError(f"astronomical coordinates need a > 0 and 0 <= e < 1, got a={c.a}, e={c.e}")

    u = solve_kepler(c.e, c.l)
    s = np.sqrt(1.0 - c.e * c.e)
    x = c.a * np.array([np.cos(u) - c.e, s * np.sin(u)])
    y = np.array([-np.sin(u), s * np.cos(u)]) / (np.sqrt(c.a) * (1.0 - c.e * np.cos(u)))
    return CartesianState(x=_rotate(x, c.g), y=_rotate(y, c.g))


def astro_to_delaunay(c: AstroCoords) -> DelaunayCoords:
    big_l = np.sqrt(c.a)
    return DelaunayCoords(l=wrap_angle(c.l), L=float(big_l), g=wrap_angle(c.g), G=float(big_l * np.sqrt(1 - c.e ** 2)))


def delaunay_to_astro(d: DelaunayCoords) -> AstroCoords:
    if d.L <= 0 or not 0 < d.G <= d.L:
        raise ValueError(f"delaunay coordinates need 0 < G <= L, got L={d.L}, G={d.G}")
    e = np.sqrt((d.L - d.G) * (d.L + d.G)) / d.L
    return AstroCoords(a=d.L * d.L, e=float(e), l=wrap_angle(d.l), g=wrap_angle(d.g))


def delaunay_to_cartesian(d: DelaunayCoords) -> CartesianState:
    return astro_to_cartesian(delaunay_to_astro(d))


def poincare_to_delaunay(p: PoincareState, tol_circ: float = TOL_CIRC) -> DelaunayCoords:
    """
    H = (η² + ξ²)/2, G = Λ - H, h = atan2(η, ξ), g = -h, l = λ - g
    """
    r2 = p.radius_squared
    if r2 < tol_circ:
        raise CircularLocusError(f"g and l are undefined on the circular locus (η² + ξ² = {r2:.3e})")
    big_h = 0.5 * r2
    h = np.arctan2(p.eta, p.xi)
    return DelaunayCoords(l=wrap_angle(p.lam + h), L=p.Lambda, g=wrap_angle(-h), G=p.Lambda - big_h)


def delaunay_to_poincare(d: DelaunayCoords) -> PoincareState:
    big_h = d.L - d.G
    h = -d.g
    rho = np.sqrt(2.0 * big_h)
    return PoincareState(lam=wrap_angle(d.l + d.g), Lambda=d.L, eta=float(rho * np.sin(h)), xi=float(rho * np.cos(h)))


def _check_omega(big_lambda, r2) -> None:
    if np.any(np.asarray(big_lambda) <= 0):
        raise OutOfDomainError("Λ must be positive")
    if np.any(np.asarray(r2) >= 2.0 * np.asarray(big_lambda)):
        raise OutOfDomainError("η² + ξ² must be smaller than 2Λ")


def poincare_to_cartesian_arrays(lam, big_lambda, eta, xi) -> tuple[np.ndarray, np.ndarray]:
    """
    vectorized Poincaré chart through the regularizing functions e, γ, A, B, α, β;
    analytic across the circular locus

    :return: complex position and complex velocity arrays
    """
    lam, big_lambda, eta, xi = np.broadcast_arrays(
        np.asarray(lam, dtype=float), np.asarray(big_lambda, dtype=float),
        np.asarray(eta, dtype=float), np.asarray(xi, dtype=float),
    )
    r2 = eta * eta + xi * xi
    _check_omega(big_lambda, r2)

    gamma = np.sqrt(1.0 / big_lambda - r2 / (4.0 * big_lambda * big_lambda))
    big_a = gamma * xi
    big_b = gamma * eta
    cos_l, sin_l = np.cos(lam), np.sin(lam)
    alpha = big_a * cos_l - big_b * sin_l
    beta = big_b * cos_l + big_a * sin_l

    w = _shifted_kepler(alpha, beta)
    e_cos_u = alpha * np.cos(w) - beta * np.sin(w)
    ecc2 = r2 * gamma * gamma
    s = np.sqrt(1.0 - ecc2)

    eccentricity_vector = big_a - 1j * big_b
    phase = np.exp(1j * (lam + w))
    x = big_lambda ** 2 * (phase - eccentricity_vector - 1j * eccentricity_vector * w / (1.0 + s))
    y = 1j * (phase - eccentricity_vector * e_cos_u / (1.0 + s)) / (big_lambda * (1.0 - e_cos_u))
    return x, y


def poincare_to_cartesian(p: PoincareState) -> CartesianState:
    x, y = poincare_to_cartesian_arrays(p.lam, p.Lambda, p.eta, p.xi)
    x, y = complex(x), complex(y)
    return CartesianState.from_values(x.real, x.imag, y.real, y.imag)


def regularizing_auxiliaries(p: PoincareState) -> RegularizingAuxiliaries:
    """
    e, γ = e/√(η² + ξ²), A = γξ, B = γη, α = e cos l, β = e sin l and w = u - l
    """
    r2 = p.radius_squared
    _check_omega(p.Lambda, r2)
    gamma = float(np.sqrt(1.0 / p.Lambda - r2 / (4.0 * p.Lambda ** 2)))
    big_a, big_b = gamma * p.xi, gamma * p.eta
    alpha = big_a * np.cos(p.lam) - big_b * np.sin(p.lam)
    beta = big_b * np.cos(p.lam) + big_a * np.sin(p.lam)
    return RegularizingAuxiliaries(
        e=float(np.sqrt(r2) * gamma),
        gamma=gamma,
        A=float(big_a),
        B=float(big_b),
        alpha=float(alpha),
        beta=float(beta),
        w=float(_shifted_kepler(alpha, beta)),
    )


def cartesian_to_poincare(s: CartesianState) -> PoincareState:
    """
    inverse chart through the Laplace-Runge-Lenz vector; smooth across circular orbits
    """
    radius = float(np.linalg.norm(s.x))
    if radius == 0:
        raise NotEllipticError("position must be nonzero")
    e_value = energy(s)
    m_value = angular_momentum(s)
    if e_value >= 0:
        raise NotEllipticError(f"energy must be negative, got {e_value}")
    if m_value <= 0:
        raise NotEllipticError(f"angular momentum must be positive, got {m_value}")

    a = -0.5 / e_value
    big_lambda = np.sqrt(a)
    xy = float(np.dot(s.x, s.y))
    lrl = (np.dot(s.y, s.y) - 1.0 / radius) * s.x - xy * s.y
    eccentricity_vector = complex(lrl[0], lrl[1])

    s_ratio = float(np.clip(m_value / big_lambda, 0.0, 1.0))
    w = xy / big_lambda
    z = s.z / a + eccentricity_vector + 1j * eccentricity_vector * w / (1.0 + s_ratio)
    lam = np.angle(z) - w

    k = np.sqrt(2.0 * big_lambda / (1.0 + s_ratio))
    return PoincareState(
        lam=wrap_angle(lam),
        Lambda=float(big_lambda),
        eta=float(-k * eccentricity_vector.imag),
        xi=float(k * eccentricity_vector.real),
    )


def kepler_flow_poincare(p: PoincareState, t: float) -> PoincareState:
    """
    unperturbed flow: λ advances at rate Λ⁻³
    """
    return dataclasses.replace(p, lam=wrap_angle(p.lam + t / p.Lambda ** 3))


def chart_jacobian(p: PoincareState, step: float = 1e-6) -> np.ndarray:
    """
    ∂(x1, x2, y1, y2)/∂(λ, η, Λ, ξ) by central differences
    """
    base = p.canonical()
    columns = []
    for j in range(4):
        shift = np.zeros(4)
        shift[j] = step
        plus = poincare_to_cartesian(_from_canonical_raw(base + shift)).as_vector()
        minus = poincare_to_cartesian(_from_canonical_raw(base - shift)).as_vector()
        columns.append((plus - minus) / (2.0 * step))
    return np.column_stack(columns)


def cartesian_chart_jacobian(s: CartesianState, step: float = 1e-7) -> np.ndarray:
    """
    ∂(λ, η, Λ, ξ)/∂(x1, x2, y1, y2) by central differences, λ differenced modulo 2π
    """
    base = s.as_vector()
    columns = []
    for j in range(4):
        shift = np.zeros(4)
        shift[j] = step
        plus = cartesian_to_poincare(CartesianState.from_vector(base + shift)).canonical()
        minus = cartesian_to_poincare(CartesianState.from_vector(base - shift)).canonical()
        diff = plus - minus
        diff[0] = angle_difference(plus[0], minus[0])
        columns.append(diff / (2.0 * step))
    return np.column_stack(columns)


def _from_canonical_raw(values: np.ndarray) -> PoincareState:
    lam, eta, big_lambda, xi = (float(v) for v in values)
    return PoincareState(lam=lam, Lambda=big_lambda, eta=eta, xi=xi)


def _radial_jet_complex(lam, big_lambda: float, h: float):
    """
    ∂_r x̃, ∂_r² x̃ at r = 0 and their λ-derivatives, x̃(λ, Λ, r, h) = x(λ, Λ, r sin h, r cos h)
    """
    theta = np.asarray(lam, dtype=float) + h
    rot = np.exp(-1j * h)
    d1 = 0.5 * big_lambda ** 1.5 * rot * (-3.0 + np.exp(2j * theta))
    d1_lam = 0.5 * big_lambda ** 1.5 * rot * 2j * np.exp(2j * theta)
    d2 = big_lambda * rot * (-np.exp(1j * theta) + 0.25 * (np.exp(-1j * theta) + 3.0 * np.exp(3j * theta)))
    d2_lam = big_lambda * rot * (
        -1j * np.exp(1j * theta) + 0.25 * (-1j * np.exp(-1j * theta) + 9j * np.exp(3j * theta))
    )
    return d1, d2, d1_lam, d2_lam


def radial_chart_jet(lam: float, big_lambda: float, h: float) -> tuple[np.ndarray, np.ndarray]:
    """
    first and second r-derivatives of x̃ at r = 0 as Cartesian vectors
    """
    if big_lambda <= 0:
        raise ValueError("Λ must be positive")
    d1, d2, _, _ = _radial_jet_complex(lam, big_lambda, h)
    d1, d2 = complex(d1), complex(d2)
    return np.array([d1.real, d1.imag]), np.array([d2.real, d2.imag])


def circular_position_jet(lam, big_lambda: float):
    """
    complex position x = x1 + i x2 at η = ξ = 0 with its (λ, η, ξ)-derivatives, vectorized over λ

    the η and ξ columns come from the radial jet with h = π/2 and h = 0, the mixed one from h = π/4

    :return: x, first (3, ...), second (3, 3, ...), and the λ-derivatives of first and second
    """
    lam = np.asarray(lam, dtype=float)
    phase = np.exp(1j * lam)
    d1_eta, d2_eta, d1_eta_lam, d2_eta_lam = _radial_jet_complex(lam, big_lambda, 0.5 * np.pi)
    d1_xi, d2_xi, d1_xi_lam, d2_xi_lam = _radial_jet_complex(lam, big_lambda, 0.0)
    _, d2_diag, _, d2_diag_lam = _radial_jet_complex(lam, big_lambda, 0.25 * np.pi)

    x = big_lambda ** 2 * phase
    x_l = 1j * x
    x_ll = -x
    x_lll = -1j * x
    x_eta_xi = d2_diag - 0.5 * (d2_eta + d2_xi)
    x_eta_xi_lam = d2_diag_lam - 0.5 * (d2_eta_lam + d2_xi_lam)
    d1_eta_ll = -2j * big_lambda ** 1.5 * np.exp(2j * lam)
    d1_xi_ll = -2.0 * big_lambda ** 1.5 * np.exp(2j * lam)

    first = np.array([x_l, d1_eta, d1_xi])
    first_lam = np.array([x_ll, d1_eta_lam, d1_xi_lam])
    second = np.array([
        [x_ll, d1_eta_lam, d1_xi_lam],
        [d1_eta_lam, d2_eta, x_eta_xi],
        [d1_xi_lam, x_eta_xi, d2_xi],
    ])
    second_lam = np.array([
        [x_lll, d1_eta_ll, d1_xi_ll],
        [d1_eta_ll, d2_eta_lam, x_eta_xi_lam],
        [d1_xi_ll, x_eta_xi_lam, d2_xi_lam],
    ])
    return x, first, second, first_lam, second_lam


def poincare_jet_circular(lam: float, big_lambda: float) -> PoincareJet2:
    """
    value, first and second (λ, η, ξ)-derivatives of (x, y) at η = ξ = 0

    velocity derivatives use y = Λ⁻³ ∂_λ x, valid along the unperturbed flow
    """
    if big_lambda <= 0:
        raise ValueError("Λ must be positive")

    x, first, second, first_lam, second_lam = circular_position_jet(float(lam), big_lambda)
    scale = big_lambda ** -3

    d1 = np.stack([first.real, first.imag, scale * first_lam.real, scale * first_lam.imag])
    d2 = np.stack([second.real, second.imag, scale * second_lam.real, scale * second_lam.imag])
    y = scale * first[0]
    value = CartesianState.from_values(x.real, x.imag, y.real, y.imag)
    return PoincareJet2(value=value, d1=d1, d2=d2)


def winding_number(path: any, origin_tol: float = 1e-9, closure_tol: float = 1e-6) -> int:
    """
    number of turns of a closed loop around the origin

    :param path: sequence of CartesianState, complex positions or (n, 2) positions
    :param origin_tol: smallest admissible |x|
    :param closure_tol: admissible distance between first and last sample
    """
    if len(path) > 0 and isinstance(path[0], CartesianState):
        z = np.array([s.z for s in path])
    else:
        arr = np.asarray(path)
        z = arr[:, 0] + 1j * arr[:, 1] if arr.ndim == 2 else arr.astype(complex)

    if len(z) < 3:
        raise ValueError("path needs at least three samples")
    if np.min(np.abs(z)) < origin_tol:
        raise PathThroughOriginError(f"path passes within {origin_tol} of the origin")
    if abs(z[-1] - z[0]) > closure_tol * max(1.0, abs(z[0])):
        raise NotClosedError(f"path endpoints differ by {abs(z[-1] - z[0]):.3e}")

    turns = np.sum(angle_difference(np.angle(z[1:]), np.angle(z[:-1]))) / TWO_PI
    n = int(np.rint(turns))
    if abs(turns - n) >= 0.1:
        raise NotClosedError(f"winding residual {abs(turns - n):.3f} is too large")
    return n
