"""
newton-shooting continuation in ε of the 2π-periodic orbits bifurcating from critical points of γ_N

the fixed-point problem Π_ε(s) = s is solved on the full four-dimensional phase space, written in the
Poincaré chart where the unperturbed period map only shears λ; the reduced system of the averaging
analysis (θ' = θ + 2πN solved for r, then q, p, θ) is only used to seed the first point and to predict
the classification.

for N < 0 the critical point lives on the time-reversed problem: seeds are the reversal (x, -y) of the
prograde orbit and classification relies on the Cartesian monodromy, whose spectrum, trace and
det(S - I) do not depend on the chart.
"""
import dataclasses
import logging
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd
from scipy.optimize import least_squares
from sklearn.linear_model import LinearRegression

from .averaging import CriticalPoint, predicted_det_coefficient, predicted_trace_coefficient
from .exceptions import (
    CollisionGuardError,
    ConfigError,
    EmptyBranchError,
    InsufficientPointsError,
    KeplerAveragingError,
    NoConvergenceError,
    NotEllipticError,
    OutOfDomainError,
    SingularJacobianError,
    StepFailureError,
)
from .flow_integrator import IntegratorConfig, TrajectoryRecord, integrate, monodromy_in_poincare
from .forcing import ForcingModel
from .kepler_geometry import (
    CartesianState,
    PoincareState,
    angular_momentum,
    cartesian_chart_jacobian,
    cartesian_to_poincare,
    chart_jacobian,
    poincare_to_cartesian,
    resonant_Lambda,
    winding_number,
)
from .symplectic_spectra import (
    Monodromy4,
    SpectralSummary,
    StabilityClass,
    Verdict,
    classify_local,
    verdict_from_class,
)
from .utils import TWO_PI, angle_difference, angle_distance

logger = logging.getLogger(__name__)

# accepted symplectic defect of integrated monodromies
MONODROMY_TOL_SYMP = 1e-7
MAX_CONDITION = 1e13
# scaled residual returned for least-squares trials outside the elliptic region
REJECTED_RESIDUAL = 1e6
TOL_DET_FLOOR = 1e-12
ELLIPTIC_MARGIN = 10.0
THREADS_ENV = "KEPLER_AVG_THREADS"


@dataclasses.dataclass(frozen=True)
class ShootingConfig:
    tol_shoot: float = 1e-10
    max_iter: int = 25
    max_halvings: int = 8

    def __post_init__(self):
        if not self.tol_shoot > 0:
            raise ConfigError(f"tol_shoot must be positive, got {self.tol_shoot}")
        if self.max_iter < 1 or self.max_halvings < 0:
            raise ConfigError("max_iter must be positive and max_halvings non-negative")


def default_eps_grid() -> list[float]:
    return [float(v) for v in np.geomspace(1e-4, 1e-2, 9)]


def max_workers() -> int:
    """
    thread cap from KEPLER_AVG_THREADS, default 1
    """
    value = os.getenv(THREADS_ENV)
    if value is None or value == "":
        return 1
    try:
        workers = int(value)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {value!r}")
    if workers < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {value!r}")
    return workers


@dataclasses.dataclass(frozen=True, eq=False)
class BranchPoint:
    eps: float
    s0: CartesianState
    poincare0: PoincareState
    newton_residual: float
    monodromy: Monodromy4
    monodromy_summary: SpectralSummary
    winding: int
    iterations: int = 0
    poincare_monodromy: Monodromy4 | None = None

    @property
    def max_multiplier_gap(self) -> float:
        """
        max |μ - 1| over the spectrum
        """
        return float(np.max(np.abs(self.monodromy_summary.eigenvalues - 1.0)))

    def to_dict(self) -> dict:
        summary = self.monodromy_summary
        return {
            "eps": self.eps,
            "s0": self.s0.to_dict(),
            "poincare0": self.poincare0.to_dict(),
            "residual": self.newton_residual,
            "class": summary.stability_class.value,
            "eigenvalues": [[float(mu.real), float(mu.imag)] for mu in summary.eigenvalues],
            "trace": summary.trace,
            "det_s_minus_i": summary.det_s_minus_i,
            "winding": self.winding,
            "monodromy": self.monodromy.to_json(),
        }


@dataclasses.dataclass(frozen=True, eq=False)
class Branch:
    N: int
    critical_point: CriticalPoint
    points: list[BranchPoint]
    predicted_class: Verdict
    truncated: bool = False
    failure: str | None = None

    @property
    def eps(self) -> np.ndarray:
        return np.array([p.eps for p in self.points])

    def seed_distance(self, point: BranchPoint) -> float:
        """
        distance in (λ, Λ, η, ξ) between a branch point and the seeding critical point
        """
        cp = self.critical_point
        p = point.poincare0
        return float(np.sqrt(
            angle_distance(p.lam, cp.lam) ** 2
            + (p.Lambda - resonant_Lambda(self.N)) ** 2
            + (p.eta - cp.eta) ** 2
            + (p.xi - cp.xi) ** 2
        ))

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for p in self.points:
            summary = p.monodromy_summary
            rows.append({
                "eps": p.eps,
                "residual": p.newton_residual,
                "class": summary.stability_class.value,
                "trace": summary.trace,
                "det_s_minus_i": summary.det_s_minus_i,
                "delta1": summary.delta1,
                "delta2": summary.delta2,
                "max_multiplier_gap": p.max_multiplier_gap,
                "seed_distance": self.seed_distance(p),
                "winding": p.winding,
            })
        return pd.DataFrame(rows, columns=[
            "eps", "residual", "class", "trace", "det_s_minus_i", "delta1", "delta2",
            "max_multiplier_gap", "seed_distance", "winding",
        ])

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "critical_point": self.critical_point.to_dict(),
            "predicted_class": self.predicted_class.value,
            "truncated": self.truncated,
            "failure": self.failure,
            "points": [p.to_dict() for p in self.points],
        }


def _time_reversed(s: CartesianState) -> CartesianState:
    return CartesianState(x=s.x, y=-s.y)


def seed_from_critical_point(cp: CriticalPoint, N: int) -> CartesianState:
    """
    phase point of the resonant circular-family orbit (λ*, Λ_N, η*, ξ*)
    """
    s = poincare_to_cartesian(PoincareState(lam=cp.lam, Lambda=resonant_Lambda(N), eta=cp.eta, xi=cp.xi))
    return s if N > 0 else _time_reversed(s)


@dataclasses.dataclass(frozen=True, eq=False)
class _Evaluation:
    """
    one period of the flow from the phase point with chart coordinates z = (λ, η, Λ, ξ)
    """
    z: np.ndarray
    s0: CartesianState
    end: CartesianState
    record: TrajectoryRecord
    chart_residual: np.ndarray
    cartesian_residual: float


def _evaluate(f: ForcingModel, eps: float, z: np.ndarray, cfg: IntegratorConfig, retrograde: bool) -> _Evaluation:
    s0 = poincare_to_cartesian(PoincareState.from_canonical(z))
    s0 = _time_reversed(s0) if retrograde else s0
    record = integrate(f, eps, s0, (0.0, TWO_PI), cfg, with_variational=True)
    s1 = CartesianState.from_vector(record.states[-1])
    end = _time_reversed(s1) if retrograde else s1
    image = cartesian_to_poincare(end).canonical()
    residual = image - z
    residual[0] = angle_difference(image[0], z[0])
    return _Evaluation(
        z=z,
        s0=s0,
        end=end,
        record=record,
        chart_residual=residual,
        cartesian_residual=float(np.linalg.norm(record.states[-1] - s0.as_vector())),
    )


def _chart_jacobian(ev: _Evaluation, retrograde: bool) -> np.ndarray:
    """
    D𝒫⁻¹(s1) DΠ D𝒫(z) - I, conjugated by the reversal for retrograde orbits
    """
    flip = np.diag([1.0, 1.0, -1.0, -1.0]) if retrograde else np.eye(4)
    inner = chart_jacobian(PoincareState.from_canonical(ev.z))
    outer = cartesian_chart_jacobian(ev.end)
    return outer @ flip @ ev.record.monodromy.entries @ flip @ inner - np.eye(4)


def _try_evaluate(f, eps, z, cfg, retrograde) -> _Evaluation | None:
    try:
        return _evaluate(f, eps, z, cfg, retrograde)
    except (CollisionGuardError, StepFailureError, OutOfDomainError, NotEllipticError) as e:
        logger.debug("shooting eps=%g: trial rejected, %s", eps, e)
        return None


def _damped_newton(f, eps, ev: _Evaluation, cfg, retrograde, tol, shooting) -> tuple[_Evaluation, int, str | None]:
    """
    newton in chart coordinates with the natural monotonicity test on the simplified step

    :return: last iterate, number of iterations and the reason of a stall, None on convergence
    """
    iterations = 0
    while ev.cartesian_residual >= tol:
        if iterations >= shooting.max_iter:
            return ev, iterations, (
                f"no convergence in {shooting.max_iter} iterations, residual {ev.cartesian_residual:.3e}"
            )
        iterations += 1

        jacobian = _chart_jacobian(ev, retrograde)
        condition = np.linalg.cond(jacobian)
        if not np.isfinite(condition) or condition > MAX_CONDITION:
            raise SingularJacobianError(f"DΠ - I is singular at eps={eps:g}: condition number {condition:.3e}")
        step = np.linalg.solve(jacobian, -ev.chart_residual)
        step_norm = float(np.linalg.norm(step))

        for halving in range(shooting.max_halvings + 1):
            damping = 0.5 ** halving
            trial = _try_evaluate(f, eps, ev.z + damping * step, cfg, retrograde)
            if trial is None:
                continue
            if trial.cartesian_residual < tol:
                break
            simplified = float(np.linalg.norm(np.linalg.solve(jacobian, -trial.chart_residual)))
            if simplified < (1.0 - damping / 4.0) * step_norm:
                break
        else:
            return ev, iterations, (
                f"no contraction of the newton step {step_norm:.3e} after {shooting.max_halvings} halvings"
            )

        logger.debug(
            "shooting eps=%g iteration %d residual %.3e -> %.3e (%d halvings)",
            eps, iterations, ev.cartesian_residual, trial.cartesian_residual, halving,
        )
        ev = trial
    return ev, iterations, None


def _levenberg_marquardt(f, eps, ev: _Evaluation, cfg, retrograde, shooting) -> tuple[_Evaluation, int]:
    """
    least-squares fallback on the chart residual with the O(ε) rows rescaled to order one
    """
    scale = np.array([1.0, 1.0 / eps, 1.0 / eps, 1.0 / eps])
    cache = {ev.z.tobytes(): ev}

    def evaluate(z):
        key = z.tobytes()
        if key not in cache:
            if len(cache) > 2:
                cache.clear()
            cache[key] = _try_evaluate(f, eps, np.array(z, dtype=float), cfg, retrograde)
        return cache[key]

    def residual(z):
        trial = evaluate(z)
        return np.full(4, REJECTED_RESIDUAL) if trial is None else scale * trial.chart_residual

    def jacobian(z):
        return scale[:, None] * _chart_jacobian(evaluate(z), retrograde)

    result = least_squares(
        residual,
        ev.z,
        jac=jacobian,
        method="lm",
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=4 * shooting.max_iter,
    )
    final = evaluate(result.x)
    if final is None:
        raise NoConvergenceError(f"least-squares shooting at eps={eps:g} ended outside the elliptic region")
    return final, int(result.nfev)


def shoot(
        f: ForcingModel,
        eps: float,
        guess: CartesianState,
        cfg: IntegratorConfig | None = None,
        tol_shoot: float | None = None,
        shooting: ShootingConfig | None = None,
) -> BranchPoint:
    """
    solve Π_ε(s) = s by newton in the Poincaré chart z = (λ, η, Λ, ξ)

    the residual is 𝒫⁻¹(Π_ε(s(z))) - z with λ compared modulo 2π and the Jacobian is DΠ - I from the
    variational flow pulled into the chart. in these coordinates the unperturbed period map is linear in
    λ, η, ξ, so the O(ε) correction of Λ and the O(ε) shift along the flat directions are found in a few
    steps from the averaging seed. a step is halved until the simplified newton step contracts; when
    halving stalls, scipy's levenberg-marquardt takes over from the last iterate. retrograde orbits are
    solved in the chart of their time reversal.

    the monodromy is classified in Cartesian coordinates; poincare_monodromy is the same matrix
    transported to the chart for export, with identical trace and det(S - I)

    args:
        f: forcing model
        eps: perturbation size, positive
        guess: starting phase point
        cfg: integrator settings
        tol_shoot: accepted |Π_ε(s) - s|, overrides shooting.tol_shoot
        shooting: newton settings
    returns:
        BranchPoint whose residual comes from an integration at the returned point
    """
    cfg = cfg or IntegratorConfig()
    shooting = shooting or ShootingConfig()
    tol = shooting.tol_shoot if tol_shoot is None else tol_shoot
    if eps == 0:
        raise SingularJacobianError("period map minus identity is singular at eps = 0")
    if eps < 0:
        raise ValueError(f"eps must be positive, got {eps}")

    retrograde = angular_momentum(guess) < 0
    start = _time_reversed(guess) if retrograde else guess
    ev = _evaluate(f, eps, cartesian_to_poincare(start).canonical(), cfg, retrograde)
    ev, iterations, stall = _damped_newton(f, eps, ev, cfg, retrograde, tol, shooting)
    if stall is not None:
        logger.info("shooting at eps=%g: %s; switching to levenberg-marquardt", eps, stall)
        ev, evaluations = _levenberg_marquardt(f, eps, ev, cfg, retrograde, shooting)
        iterations += evaluations
        if ev.cartesian_residual >= tol:
            raise NoConvergenceError(
                f"shooting at eps={eps:g} did not converge: {stall}; "
                f"levenberg-marquardt stopped at residual {ev.cartesian_residual:.3e}"
            )

    record = ev.record
    s0 = ev.s0
    winding = winding_number(record.positions)
    summary = classify_local(record.monodromy, tol_symp=MONODROMY_TOL_SYMP)
    poincare_monodromy = None
    if winding > 0:
        poincare_monodromy = monodromy_in_poincare(record.monodromy, s0)

    return BranchPoint(
        eps=float(eps),
        s0=s0,
        poincare0=cartesian_to_poincare(_time_reversed(s0) if retrograde else s0),
        newton_residual=ev.cartesian_residual,
        monodromy=record.monodromy,
        monodromy_summary=summary,
        winding=winding,
        iterations=iterations,
        poincare_monodromy=poincare_monodromy,
    )


def continue_branch(
        f: ForcingModel,
        cp: CriticalPoint,
        N: int | None = None,
        eps_grid: list[float] | None = None,
        cfg: IntegratorConfig | None = None,
        shooting: ShootingConfig | None = None,
) -> Branch:
    """
    predictor-corrector along eps_grid: the first point is seeded from the critical point, the next one
    from the previous solution and later ones by secant extrapolation in ε; stops at the first failure

    :param f: forcing model
    :param cp: critical point of γ_N
    :param N: winding number, defaults to cp.N
    :param eps_grid: positive, strictly increasing
    :param cfg: integrator settings
    :param shooting: newton settings
    """
    N = cp.N if N is None else N
    eps_grid = default_eps_grid() if eps_grid is None else [float(e) for e in eps_grid]
    if not eps_grid:
        raise ValueError("eps_grid is empty")
    if eps_grid[0] <= 0 or np.any(np.diff(eps_grid) <= 0):
        raise ValueError("eps_grid must be positive and strictly increasing")

    points: list[BranchPoint] = []
    failure = None
    for k, eps in enumerate(eps_grid):
        if not points:
            guess = seed_from_critical_point(cp, N)
        elif len(points) == 1:
            guess = points[-1].s0
        else:
            previous, last = points[-2], points[-1]
            slope = (last.s0.as_vector() - previous.s0.as_vector()) / (last.eps - previous.eps)
            guess = CartesianState.from_vector(last.s0.as_vector() + slope * (eps - last.eps))

        try:
            point = shoot(f, eps, guess, cfg, shooting=shooting)
        except KeplerAveragingError as e:
            if not points:
                raise EmptyBranchError(f"first shooting at eps={eps:g} failed: {e}") from e
            failure = f"eps={eps:g}: {e}"
            logger.warning("branch from λ=%.6f truncated at %s", cp.lam, failure)
            break

        if point.winding != N:
            failure = f"eps={eps:g}: winding number {point.winding} instead of {N}"
            if not points:
                raise EmptyBranchError(f"first shooting converged to a different family, {failure}")
            logger.warning("branch from λ=%.6f truncated at %s", cp.lam, failure)
            break

        logger.info(
            "branch from λ=%.6f: eps=%g converged in %d iterations, class %s",
            cp.lam, eps, point.iterations, point.monodromy_summary.stability_class.value,
        )
        points.append(point)

    return Branch(
        N=N,
        critical_point=cp,
        points=points,
        predicted_class=cp.predicted_class,
        truncated=failure is not None,
        failure=failure,
    )


@dataclasses.dataclass(frozen=True, eq=False)
class BranchOutcome:
    critical_point: CriticalPoint
    branch: Branch | None
    error: str | None = None


def continue_branches(
        f: ForcingModel,
        critical_points: list[CriticalPoint],
        eps_grid: list[float] | None = None,
        cfg: IntegratorConfig | None = None,
        shooting: ShootingConfig | None = None,
        workers: int | None = None,
) -> list[BranchOutcome]:
    """
    one branch per critical point, independent branches on a thread pool; failures are recorded
    """
    def run(cp):
        try:
            return BranchOutcome(cp, continue_branch(f, cp, cp.N, eps_grid, cfg, shooting))
        except KeplerAveragingError as e:
            logger.warning("branch from λ=%.6f failed: %s", cp.lam, e)
            return BranchOutcome(cp, None, str(e))

    workers = max_workers() if workers is None else workers
    if workers > 1 and len(critical_points) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, critical_points))
    return [run(cp) for cp in critical_points]


def tol_det(eps: float, N: int, hessian: np.ndarray | None = None) -> float:
    """
    tolerance for sign calls on det(S - I) = O(ε³)
    """
    if hessian is None:
        return TOL_DET_FLOOR
    return max(TOL_DET_FLOOR, eps ** 3 * 0.01 * abs(predicted_det_coefficient(N, hessian)))


def observed_verdict(summary: SpectralSummary, tolerance: float) -> Verdict:
    """
    verdict of one monodromy; elliptic calls need det(S - I) and 4 - tr S beyond ten tolerances
    """
    verdict = verdict_from_class(summary.stability_class)
    if verdict == Verdict.ELLIPTIC:
        margin = ELLIPTIC_MARGIN * tolerance
        if abs(summary.det_s_minus_i) <= margin or summary.trace >= 4.0 - margin:
            return Verdict.INCONCLUSIVE
    return verdict


@dataclasses.dataclass(frozen=True, eq=False)
class BranchClassification:
    verdict: Verdict
    predicted: Verdict
    table: pd.DataFrame

    @property
    def all_agree(self) -> bool:
        return bool(self.table["agrees"].all())

    @property
    def outside_chart(self) -> bool:
        return bool(self.table["outside_chart"].any())

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "predicted": self.predicted.value,
            "all_agree": self.all_agree,
            "outside_chart": self.outside_chart,
            "points": self.table.to_dict(orient="records"),
        }


def classify_branch(branch: Branch) -> BranchClassification:
    """
    prediction from the critical point Hessian against the per-ε classification of the monodromy

    the verdict is the prediction when every point agrees with it, Inconclusive otherwise
    """
    if not branch.points:
        raise EmptyBranchError("branch has no points")

    hessian = branch.critical_point.hessian
    predicted = branch.predicted_class
    rows = []
    for p in branch.points:
        summary = p.monodromy_summary
        observed = observed_verdict(summary, tol_det(p.eps, branch.N, hessian))
        rows.append({
            "eps": p.eps,
            "class": summary.stability_class.value,
            "observed": observed.value,
            "agrees": observed == predicted,
            "outside_chart": summary.stability_class == StabilityClass.OUTSIDE_LOCAL_CHART,
            "seed_distance": branch.seed_distance(p),
        })
    table = pd.DataFrame(rows, columns=["eps", "class", "observed", "agrees", "outside_chart", "seed_distance"])

    if table["outside_chart"].any():
        logger.warning("branch from λ=%.6f has points outside the local chart", branch.critical_point.lam)

    verdict = predicted if table["agrees"].all() else Verdict.INCONCLUSIVE
    return BranchClassification(verdict=verdict, predicted=predicted, table=table)


@dataclasses.dataclass(frozen=True)
class ExpansionFit:
    eps_used: tuple[float, ...]
    det_slope: float
    det_log_intercept: float
    det_coefficient: float
    predicted_det_coefficient: float
    det_sign: int
    trace_coefficient: float
    predicted_trace_coefficient: float

    @property
    def det_rel_error(self) -> float:
        return _relative_error(self.det_coefficient, self.predicted_det_coefficient)

    @property
    def trace_rel_error(self) -> float:
        return _relative_error(self.trace_coefficient, self.predicted_trace_coefficient)

    def passed(self, slope_tol: float = 0.1, det_tol: float = 0.1, trace_tol: float = 0.05) -> bool:
        return (
            abs(self.det_slope - 3.0) <= slope_tol
            and self.det_rel_error <= det_tol
            and self.trace_rel_error <= trace_tol
        )

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["eps_used"] = list(self.eps_used)
        data["det_rel_error"] = self.det_rel_error
        data["trace_rel_error"] = self.trace_rel_error
        data["passed"] = self.passed()
        return data


def _relative_error(value: float, reference: float) -> float:
    if reference == 0:
        return float("inf") if value != 0 else 0.0
    return abs(value - reference) / abs(reference)


def _fit_points(branch: Branch) -> list[BranchPoint]:
    if len(branch.points) < 4:
        raise InsufficientPointsError(f"expansion fits need at least 4 branch points, got {len(branch.points)}")
    if branch.points[-1].eps < 10.0 * branch.points[0].eps:
        raise InsufficientPointsError("branch points must span a decade in eps")

    points = branch.points[2:] if len(branch.points) - 2 >= 3 else list(branch.points)
    kept = []
    reference = None
    for p in points:
        current = p.monodromy_summary.stability_class
        if current == StabilityClass.DEGENERATE:
            continue
        if reference is None:
            reference = current
        elif current != reference:
            break
        kept.append(p)

    if len(kept) < 3:
        raise InsufficientPointsError(f"only {len(kept)} usable points left for the expansion fits")
    return kept


def expansion_check(branch: Branch, gamma_hessian: np.ndarray | None = None) -> ExpansionFit:
    """
    fits det(S(ε) - I) ≈ c₃ε³ and tr S(ε) - 4 ≈ c₁ε against the averaging predictions

    args:
        branch: branch with at least 4 points spanning a decade in eps
        gamma_hessian: D²γ_N at the critical point, defaults to the stored one
    returns:
        ExpansionFit with the log-log slope of |det(S - I)|, the fitted coefficients and the predicted ones
    """
    hessian = branch.critical_point.hessian if gamma_hessian is None else np.asarray(gamma_hessian, dtype=float)
    points = _fit_points(branch)

    eps = np.array([p.eps for p in points])
    det = np.array([p.monodromy_summary.det_s_minus_i for p in points])
    trace = np.array([p.monodromy_summary.trace for p in points])
    if np.any(det == 0):
        raise InsufficientPointsError("det(S - I) vanishes at a fitted point")

    log_fit = LinearRegression().fit(np.log(eps).reshape(-1, 1), np.log(np.abs(det)))
    det_fit = LinearRegression().fit(eps.reshape(-1, 1), det / eps ** 3)
    trace_fit = LinearRegression(fit_intercept=False).fit(np.column_stack([eps, eps ** 2]), trace - 4.0)

    signs = np.sign(det)
    fit = ExpansionFit(
        eps_used=tuple(float(e) for e in eps),
        det_slope=float(log_fit.coef_[0]),
        det_log_intercept=float(log_fit.intercept_),
        det_coefficient=float(det_fit.intercept_),
        predicted_det_coefficient=predicted_det_coefficient(branch.N, hessian),
        det_sign=int(signs[0]) if np.all(signs == signs[0]) else 0,
        trace_coefficient=float(trace_fit.coef_[0]),
        predicted_trace_coefficient=predicted_trace_coefficient(branch.N, hessian),
    )
    logger.info(
        "expansion fit: det slope %.4f, det coefficient %.4e (predicted %.4e), trace coefficient %.4e (predicted %.4e)",
        fit.det_slope, fit.det_coefficient, fit.predicted_det_coefficient,
        fit.trace_coefficient, fit.predicted_trace_coefficient,
    )
    return fit
