"""
averaged perturbation γ_N on the resonant solid torus Λ = Λ_N and its critical points

γ_N(λ, η, ξ) = (1/2π)∫ U(t, x(λ + |N|t, Λ_N, η, ξ)) dt, evaluated with the periodic trapezoid rule.
negative winding numbers are handled through the time-reversed forcing t -> -t.
"""
import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd

from .exceptions import NoConvergenceError, OutOfTorusError
from .forcing import ForcingModel
from .kepler_geometry import (
    CartesianState,
    cartesian_to_poincare,
    circular_position_jet,
    h_second_derivative,
    poincare_to_cartesian_arrays,
    resonant_Lambda,
    tau_n,
)
from .symplectic_spectra import Verdict
from .utils import TWO_PI, angle_difference, angle_distance, detect_anomaly, wrap_angle

logger = logging.getLogger(__name__)

QUADRATURE_NODES = 256
TOL_GRAD = 1e-9
DEDUP_TOL = 1e-6
NEWTON_MAX_ITER = 40
TIKHONOV = 1e-10
MAX_NEWTON_STEP = 0.25
# relative size of σ_min(D²γ) and ∂²_λλγ under which no verdict is given
PREDICTION_TOL = 1e-6
# newton keeps polishing past tol_grad until its step drops below this
POLISH_STEP = 1e-10
# candidates along the flat direction of a singular critical point are merged into it
DEGENERATE_MERGE_TOL = 1e-2
DEGENERATE_ACROSS_TOL = 1e-4
FLAT_TOL = 1e-12
# below this η² + ξ² the closed-form jets at the circular locus are used
ON_LOCUS = 1e-20
JET_STEP_FIRST = 1e-5
JET_STEP_SECOND = 1e-4
FD_STEP_GRADIENT = 1e-5
FD_STEP_HESSIAN = 1e-3


@dataclasses.dataclass(frozen=True)
class AveragedFunction:
    N: int
    forcing: ForcingModel
    quadrature_nodes: int = QUADRATURE_NODES

    def __post_init__(self):
        if self.N == 0:
            raise ValueError("winding number must be nonzero")
        if self.quadrature_nodes < 4:
            raise ValueError("quadrature_nodes must be at least 4")

    @property
    def Lambda_N(self) -> float:
        return resonant_Lambda(self.N)

    @property
    def winding(self) -> int:
        return abs(self.N)

    @property
    def effective_forcing(self) -> ForcingModel:
        """
        the forcing seen by the prograde orbit; reversed in time for N < 0
        """
        return self.forcing if self.N > 0 else self.forcing.reverse_time()

    @property
    def nodes(self) -> np.ndarray:
        return TWO_PI * np.arange(self.quadrature_nodes) / self.quadrature_nodes


@dataclasses.dataclass(frozen=True, eq=False)
class CriticalPoint:
    lam: float
    eta: float
    xi: float
    gradient_norm: float
    hessian: np.ndarray
    d2_lambda_lambda: float
    hessian_det: float
    predicted_class: Verdict
    N: int = 1

    @property
    def point(self) -> tuple[float, float, float]:
        return self.lam, self.eta, self.xi

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "lambda": self.lam,
            "eta": self.eta,
            "xi": self.xi,
            "gradient_norm": self.gradient_norm,
            "hessian": [[float(v) for v in row] for row in self.hessian],
            "d2_lambda_lambda": self.d2_lambda_lambda,
            "hessian_det": self.hessian_det,
            "predicted_class": self.predicted_class.value,
        }


@dataclasses.dataclass
class CriticalPointSearch:
    points: list[CriticalPoint]
    failures: list[tuple[tuple[float, float, float], str]]
    flat_points: int = 0

    @property
    def degenerate(self) -> bool:
        """
        every converged seed sat on a flat region: the gradient vanishes identically
        """
        return not self.points and self.flat_points > 0


def _check_torus(f: AveragedFunction, eta: float, xi: float, margin: float = 0.0) -> None:
    r2 = (abs(eta) + margin) ** 2 + (abs(xi) + margin) ** 2
    if r2 >= 2.0 * f.Lambda_N:
        raise OutOfTorusError(f"(η, ξ) = ({eta}, {xi}) is outside the solid torus of radius √(2Λ_N)")


def gamma(f: AveragedFunction, lam: float, eta: float, xi: float) -> float:
    """
    quadrature value of γ_N at (λ, η, ξ)
    """
    _check_torus(f, eta, xi)
    t = f.nodes
    x, _ = poincare_to_cartesian_arrays(lam + f.winding * t, f.Lambda_N, eta, xi)
    return float(np.mean(f.effective_forcing.potential_batch(t, x)))


def _chart_position_jet(theta: np.ndarray, big_lambda: float, eta: float, xi: float):
    """
    complex position with first and second (λ, η, ξ)-derivatives by central differences of the chart
    """
    def position(shift: np.ndarray) -> np.ndarray:
        x, _ = poincare_to_cartesian_arrays(theta + shift[0], big_lambda, eta + shift[1], xi + shift[2])
        return x

    unit = np.eye(3)
    x0 = position(np.zeros(3))
    first = np.array([
        (position(JET_STEP_FIRST * unit[j]) - position(-JET_STEP_FIRST * unit[j])) / (2.0 * JET_STEP_FIRST)
        for j in range(3)
    ])

    h = JET_STEP_SECOND
    second = np.zeros((3, 3) + theta.shape, dtype=complex)
    for j in range(3):
        second[j, j] = (position(h * unit[j]) - 2.0 * x0 + position(-h * unit[j])) / (h * h)
        for k in range(j + 1, 3):
            mixed = (
                position(h * (unit[j] + unit[k])) - position(h * (unit[j] - unit[k]))
                - position(h * (unit[k] - unit[j])) + position(-h * (unit[j] + unit[k]))
            ) / (4.0 * h * h)
            second[j, k] = second[k, j] = mixed
    return x0, first, second


def _jet_gradient_hessian(f: AveragedFunction, lam: float, eta: float, xi: float) -> tuple[np.ndarray, np.ndarray]:
    t = f.nodes
    theta = lam + f.winding * t
    if eta * eta + xi * xi <= ON_LOCUS:
        x, first, second, _, _ = circular_position_jet(theta, f.Lambda_N)
    else:
        _check_torus(f, eta, xi, margin=2.0 * JET_STEP_SECOND)
        x, first, second = _chart_position_jet(theta, f.Lambda_N, eta, xi)

    forcing = f.effective_forcing
    grad_u = forcing.gradient_batch(t, x)
    hess_u = forcing.hessian_batch(t, x)

    # real 2-vectors of the position derivatives, shape (3, n, 2)
    d1 = np.stack([first.real, first.imag], axis=-1)
    d2 = np.stack([second.real, second.imag], axis=-1)

    gradient = np.mean(np.einsum("ni,jni->jn", grad_u, d1), axis=1)
    hessian = (
        np.mean(np.einsum("jni,nik,lnk->jln", d1, hess_u, d1), axis=2)
        + np.mean(np.einsum("ni,jlni->jln", grad_u, d2), axis=2)
    )
    return gradient, 0.5 * (hessian + hessian.T)


def _richardson(estimate, h: float) -> float:
    return (4.0 * estimate(0.5 * h) - estimate(h)) / 3.0


def _fd_gradient_hessian(f: AveragedFunction, lam: float, eta: float, xi: float) -> tuple[np.ndarray, np.ndarray]:
    _check_torus(f, eta, xi, margin=2.0 * FD_STEP_HESSIAN)
    base = np.array([lam, eta, xi])
    unit = np.eye(3)

    def value(shift: np.ndarray) -> float:
        p = base + shift
        return gamma(f, p[0], p[1], p[2])

    g0 = value(np.zeros(3))
    gradient = np.array([
        _richardson(lambda h, j=j: (value(h * unit[j]) - value(-h * unit[j])) / (2.0 * h), FD_STEP_GRADIENT)
        for j in range(3)
    ])

    hessian = np.zeros((3, 3))
    for j in range(3):
        hessian[j, j] = _richardson(
            lambda h, j=j: (value(h * unit[j]) - 2.0 * g0 + value(-h * unit[j])) / (h * h),
            FD_STEP_HESSIAN,
        )
        for k in range(j + 1, 3):
            hessian[j, k] = hessian[k, j] = _richardson(
                lambda h, j=j, k=k: (
                    value(h * (unit[j] + unit[k])) - value(h * (unit[j] - unit[k]))
                    - value(h * (unit[k] - unit[j])) + value(-h * (unit[j] + unit[k]))
                ) / (4.0 * h * h),
                FD_STEP_HESSIAN,
            )
    return gradient, hessian


def gamma_gradient_hessian(
        f: AveragedFunction,
        point: tuple[float, float, float],
        method: str = "jet",
) -> tuple[np.ndarray, np.ndarray]:
    """
    gradient and Hessian of γ_N in (λ, η, ξ)

    args:
        f: averaged function
        point: (λ, η, ξ) inside the solid torus
        method: "jet" differentiates under the integral through the chart jets and ∇U, D²U;
            "finite_difference" differences γ_N itself with Richardson refinement
    returns:
        gradient (3,) and symmetric Hessian (3, 3)
    """
    lam, eta, xi = (float(v) for v in point)
    if method == "jet":
        gradient, hessian = _jet_gradient_hessian(f, lam, eta, xi)
    elif method == "finite_difference":
        gradient, hessian = _fd_gradient_hessian(f, lam, eta, xi)
    else:
        raise ValueError(f"unknown method {method} for gamma derivatives")

    detect_anomaly({"gradient": gradient, "hessian": hessian})
    return gradient, hessian


def _flat_direction(hessian: np.ndarray, tol: float = PREDICTION_TOL) -> np.ndarray | None:
    """
    unit kernel vector of D²γ when σ_min <= tol σ_max, otherwise None
    """
    _, sigma, vt = np.linalg.svd(np.asarray(hessian, dtype=float))
    if sigma[0] == 0 or sigma[-1] <= tol * sigma[0]:
        return vt[-1]
    return None


def hessian_prediction(hessian: np.ndarray, h2: float, tol: float = PREDICTION_TOL) -> Verdict:
    """
    linear stability predicted from D²γ_N at a critical point and h''(r_N)

    elliptic if h'' < 0, ∂²_λλγ > 0 and det D²γ > 0; unstable if h''∂²_λλγ > 0 or h'' det D²γ > 0;
    no verdict when ∂²_λλγ or the smallest singular value of D²γ vanishes within tol relative to the
    largest one. the determinant itself is not compared, a nearly flat direction makes its sign noise
    """
    hessian = np.asarray(hessian, dtype=float)
    scale = max(float(np.max(np.abs(hessian))), np.finfo(float).tiny)
    d2_ll = hessian[0, 0]

    if abs(d2_ll) <= tol * scale or _flat_direction(hessian, tol) is not None:
        return Verdict.INCONCLUSIVE
    det = float(np.linalg.det(hessian))
    if h2 * d2_ll > 0 or h2 * det > 0:
        return Verdict.UNSTABLE
    return Verdict.ELLIPTIC


def critical_point_at(f: AveragedFunction, point: tuple[float, float, float], method: str = "jet") -> CriticalPoint:
    """
    CriticalPoint record at a known point
    """
    gradient, hessian = gamma_gradient_hessian(f, point, method=method)
    lam, eta, xi = point
    return CriticalPoint(
        lam=wrap_angle(lam),
        eta=float(eta),
        xi=float(xi),
        gradient_norm=float(np.linalg.norm(gradient)),
        hessian=hessian,
        d2_lambda_lambda=float(hessian[0, 0]),
        hessian_det=float(np.linalg.det(hessian)),
        predicted_class=hessian_prediction(hessian, h_second_derivative(f.N)),
        N=f.N,
    )


def _newton_step(hessian: np.ndarray, gradient: np.ndarray) -> np.ndarray:
    if np.linalg.cond(hessian) > 1e12:
        hessian = hessian + TIKHONOV * np.eye(3)
    step = np.linalg.solve(hessian, -gradient)
    step_norm = float(np.linalg.norm(step))
    if step_norm > MAX_NEWTON_STEP:
        step *= MAX_NEWTON_STEP / step_norm
    return step


def _newton(f: AveragedFunction, seed: tuple[float, float, float], tol_grad: float) -> tuple[np.ndarray, np.ndarray]:
    """
    newton on ∇γ_N; once |∇γ| < tol_grad the iteration polishes until the step is below POLISH_STEP or
    |∇γ| stops decreasing, and returns the best point seen
    """
    point = np.array(seed, dtype=float)
    best = None
    for iteration in range(NEWTON_MAX_ITER):
        gradient, hessian = gamma_gradient_hessian(f, point)
        norm = float(np.linalg.norm(gradient))
        logger.debug("newton on grad γ: seed %s iteration %d |grad| %.3e", seed, iteration, norm)
        if best is not None and norm >= best[2]:
            return best[0], best[1]

        step = _newton_step(hessian, gradient)
        if norm < tol_grad:
            best = (point, hessian, norm)
            if np.linalg.norm(step) < POLISH_STEP:
                return point, hessian

        trial = point + step
        trial[0] = wrap_angle(trial[0])
        try:
            _check_torus(f, trial[1], trial[2])
        except OutOfTorusError:
            if best is not None:
                return best[0], best[1]
            raise
        point = trial

    if best is not None:
        return best[0], best[1]
    raise NoConvergenceError(f"newton on grad γ did not converge from seed {seed} in {NEWTON_MAX_ITER} iterations")


def _point_distance(a: tuple[float, float, float], b: tuple[float, float, float]) -> float:
    return float(np.sqrt(angle_distance(a[0], b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2))


def _on_flat_direction(candidate: CriticalPoint, anchor: CriticalPoint, direction: np.ndarray) -> bool:
    offset = np.array([
        angle_difference(candidate.lam, anchor.lam),
        candidate.eta - anchor.eta,
        candidate.xi - anchor.xi,
    ])
    across = offset - np.dot(offset, direction) * direction
    return np.linalg.norm(offset) < DEGENERATE_MERGE_TOL and np.linalg.norm(across) < DEGENERATE_ACROSS_TOL


def _merge_degenerate(points: list[CriticalPoint]) -> list[CriticalPoint]:
    """
    a singular critical point attracts newton to a whole valley of points with |∇γ| at noise level;
    those along its kernel direction are dropped, singular points first and by increasing |∇γ|
    """
    flat = {id(cp): _flat_direction(cp.hessian) for cp in points}
    order = sorted(points, key=lambda cp: (flat[id(cp)] is None, cp.gradient_norm))
    kept: list[CriticalPoint] = []
    for cp in order:
        anchors = [other for other in kept if flat[id(other)] is not None]
        if any(_on_flat_direction(cp, other, flat[id(other)]) for other in anchors):
            continue
        kept.append(cp)
    merged = len(points) - len(kept)
    if merged:
        logger.info("%d critical point candidates merged into singular critical points", merged)
    return sorted(kept, key=lambda cp: cp.point)


def search_critical_points(
        f: AveragedFunction,
        seeds: list[tuple[float, float, float]],
        tol_grad: float = TOL_GRAD,
        dedup_tol: float = DEDUP_TOL,
        max_workers: int = 1,
) -> CriticalPointSearch:
    """
    newton on ∇γ_N from every seed; per-seed failures are recorded, flat points are discarded

    :param f: averaged function
    :param seeds: starting points (λ, η, ξ)
    :param tol_grad: gradient norm accepted as critical
    :param dedup_tol: wrap-aware distance under which two points are the same
    :param max_workers: threads used for independent seeds
    """
    def run(seed):
        try:
            return seed, _newton(f, seed, tol_grad), None
        except (NoConvergenceError, OutOfTorusError) as e:
            return seed, None, str(e)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            outcomes = list(pool.map(run, seeds))
    else:
        outcomes = [run(seed) for seed in seeds]

    found: list[tuple[float, float, float]] = []
    failures = []
    flat_points = 0
    for seed, result, error in outcomes:
        if error is not None:
            logger.warning("critical point search failed from seed %s: %s", seed, error)
            failures.append((tuple(seed), error))
            continue
        point, hessian = result
        if np.max(np.abs(hessian)) <= FLAT_TOL:
            flat_points += 1
            continue
        candidate = (wrap_angle(point[0]), float(point[1]), float(point[2]))
        if all(_point_distance(candidate, other) >= dedup_tol for other in found):
            found.append(candidate)

    if flat_points:
        logger.warning("%d seeds converged on a flat region of γ_N (degenerate continuum), discarded", flat_points)

    points = _merge_degenerate([critical_point_at(f, p) for p in found])
    return CriticalPointSearch(points=points, failures=failures, flat_points=flat_points)


def find_critical_points(
        f: AveragedFunction,
        seeds: list[tuple[float, float, float]],
        tol_grad: float = TOL_GRAD,
) -> list[CriticalPoint]:
    return search_critical_points(f, seeds, tol_grad=tol_grad).points


def grid_axes(f: AveragedFunction, resolution: tuple[int, int, int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n_lam, n_eta, n_xi = resolution
    if min(resolution) < 2:
        raise ValueError(f"grid resolution must be at least 2 in each axis, got {resolution}")
    # corners stay at η² + ξ² = Λ_N, well inside the torus
    rho = 0.5 * np.sqrt(2.0 * f.Lambda_N)
    return (
        np.linspace(0.0, TWO_PI, n_lam, endpoint=False),
        np.linspace(-rho, rho, n_eta),
        np.linspace(-rho, rho, n_xi),
    )


def seed_grid(f: AveragedFunction, resolution: tuple[int, int, int] = (8, 3, 3)) -> list[tuple[float, float, float]]:
    lams, etas, xis = grid_axes(f, resolution)
    return [(float(lam), float(eta), float(xi)) for lam in lams for eta in etas for xi in xis]


def gamma_grid(f: AveragedFunction, resolution: tuple[int, int, int]) -> pd.DataFrame:
    """
    row-major samples of γ_N with columns lambda, eta, xi, gamma
    """
    rows = [(lam, eta, xi, gamma(f, lam, eta, xi)) for lam, eta, xi in seed_grid(f, resolution)]
    return pd.DataFrame(rows, columns=["lambda", "eta", "xi", "gamma"])


def averaged_displacement(f: AveragedFunction, point: tuple[float, float, float]) -> np.ndarray:
    """
    first-order change of (η, Λ, ξ) over one period per unit ε: 2π(-∂_ξγ, ∂_λγ, ∂_ηγ)
    """
    gradient, _ = gamma_gradient_hessian(f, point)
    return TWO_PI * np.array([-gradient[2], gradient[0], gradient[1]])


def gamma_on_sigma(f: AveragedFunction, s: CartesianState, tol: float = 1e-8) -> float:
    """
    Γ_N at a phase point of Σ_N, through Γ_N = γ_N ∘ 𝒫⁻¹
    """
    if f.N < 0:
        s = CartesianState(x=s.x, y=-s.y)
    p = cartesian_to_poincare(s)
    if abs(p.Lambda - f.Lambda_N) > tol:
        raise ValueError(f"state is not on Σ_N: Λ = {p.Lambda}, expected {f.Lambda_N}")
    return gamma(f, p.lam, p.eta, p.xi)


def predicted_det_coefficient(N: int, hessian: np.ndarray) -> float:
    """
    leading coefficient c in det(S(ε) - I) ≈ c ε³: -τ_N (2π)³ det D²γ_N
    """
    return float(-tau_n(N) * TWO_PI ** 3 * np.linalg.det(hessian))


def predicted_trace_coefficient(N: int, hessian: np.ndarray) -> float:
    """
    leading coefficient c in tr S(ε) - 4 ≈ c ε: 4π² h''(r_N) ∂²_λλγ_N
    """
    return float(TWO_PI ** 2 * h_second_derivative(N) * np.asarray(hessian)[0, 0])
