"""
integration of ẍ = -x/|x|³ + ε∇ₓU(t, x) in Cartesian coordinates with the first variational equations
"""
import dataclasses
import logging

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from .exceptions import CollisionGuardError, ConfigError, StepFailureError
from .forcing import ForcingModel
from .kepler_geometry import (
    CartesianState,
    angular_momentum,
    cartesian_chart_jacobian,
    energy,
    tau_n,
)
from .symplectic_spectra import Monodromy4
from .utils import TWO_PI

logger = logging.getLogger(__name__)

__all__ = [
    "IntegratorConfig",
    "TrajectoryRecord",
    "integrate",
    "period_map",
    "monodromy_in_poincare",
    "unperturbed_period",
    "tau_n",
]


@dataclasses.dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-11
    abs_tol: float = 1e-11
    max_step: float = np.inf
    min_radius_guard: float = 1e-3
    method: str = "DOP853"
    n_samples: int = 257

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "min_radius_guard"):
            value = getattr(self, name)
            if not value > 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.method not in ("DOP853", "RK45", "Radau", "LSODA"):
            raise ConfigError(f"unknown integration method {self.method}")
        if self.n_samples < 2:
            raise ConfigError("n_samples must be at least 2")

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        # inf is not valid json
        data["max_step"] = None if np.isinf(self.max_step) else self.max_step
        return data

    @classmethod
    def from_dict(cls, data: dict | None) -> "IntegratorConfig":
        data = dict(data or {})
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown integrator settings {sorted(unknown)}")
        if data.get("max_step") is None:
            data.pop("max_step", None)
        return cls(**data)


@dataclasses.dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """
    samples ordered along the integration; monodromy is the fundamental matrix at the final time
    """
    times: np.ndarray
    states: np.ndarray
    eps: float
    monodromy: Monodromy4 | None = None
    energy_drift: float | None = None
    angular_momentum_drift: float | None = None

    @property
    def samples(self) -> list[tuple[float, CartesianState]]:
        return [(float(t), CartesianState.from_vector(s)) for t, s in zip(self.times, self.states)]

    @property
    def final_state(self) -> CartesianState:
        return CartesianState.from_vector(self.states[-1])

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, 0] + 1j * self.states[:, 1]

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.states, columns=["x1", "x2", "y1", "y2"])
        df.insert(0, "t", self.times)
        return df


def unperturbed_period(big_lambda: float) -> float:
    """
    Kepler's third law: 2πa^(3/2) = 2πΛ³
    """
    return TWO_PI * big_lambda ** 3


def _kepler_hessian(x: np.ndarray) -> np.ndarray:
    """
    Jacobian of -x/|x|³, i.e. (3xxᵀ - |x|²I)/|x|⁵
    """
    r2 = float(x @ x)
    return (3.0 * np.outer(x, x) - r2 * np.eye(2)) / r2 ** 2.5


def integrate(
        f: ForcingModel,
        eps: float,
        s0: CartesianState,
        t_span: tuple[float, float],
        cfg: IntegratorConfig | None = None,
        with_variational: bool = False,
) -> TrajectoryRecord:
    """
    solve the perturbed Kepler problem, optionally with the 4x4 fundamental matrix started at I

    args:
        f: forcing model
        eps: perturbation size
        s0: initial state, x != 0
        t_span: (t0, t1); t1 < t0 integrates backwards
        cfg: integrator settings
        with_variational: co-integrate the fundamental matrix as 16 extra components
    returns:
        TrajectoryRecord with cfg.n_samples samples
    """
    cfg = cfg or IntegratorConfig()
    t0, t1 = (float(v) for v in t_span)
    if t1 == t0:
        raise ValueError("t_span must have positive length")
    if np.linalg.norm(s0.x) <= 0:
        raise ValueError("initial position must be nonzero")

    perturbed = eps != 0

    def rhs(t, z):
        x, y = z[0:2], z[2:4]
        r = np.sqrt(x @ x)
        acceleration = -x / r ** 3
        if perturbed:
            acceleration = acceleration + eps * f.gradient(t, x)
        if not with_variational:
            return np.concatenate([y, acceleration])

        stiffness = _kepler_hessian(x)
        if perturbed:
            stiffness = stiffness + eps * f.hessian(t, x)
        phi = z[4:].reshape(4, 4)
        d_phi = np.vstack([phi[2:4], stiffness @ phi[0:2]])
        return np.concatenate([y, acceleration, d_phi.ravel()])

    def collision(t, z):
        return np.hypot(z[0], z[1]) - cfg.min_radius_guard

    collision.terminal = True
    collision.direction = -1

    z0 = s0.as_vector()
    if with_variational:
        z0 = np.concatenate([z0, np.eye(4).ravel()])

    solution = solve_ivp(
        rhs,
        (t0, t1),
        z0,
        method=cfg.method,
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        max_step=cfg.max_step,
        t_eval=np.linspace(t0, t1, cfg.n_samples),
        events=collision,
    )
    logger.debug("integration over [%g, %g] at eps=%g used %d evaluations", t0, t1, eps, solution.nfev)

    if solution.status == 1:
        t_hit = float(solution.t_events[0][0])
        raise CollisionGuardError(f"|x| dropped below {cfg.min_radius_guard} at t={t_hit:.6f}")
    if solution.status != 0 or not solution.success:
        raise StepFailureError(f"integration failed: {solution.message}")

    states = solution.y[0:4].T
    monodromy = None
    if with_variational:
        monodromy = Monodromy4.from_matrix(solution.y[4:, -1].reshape(4, 4))

    energy_drift = None
    momentum_drift = None
    if not perturbed:
        energies = np.array([energy(CartesianState.from_vector(s)) for s in states])
        momenta = np.array([angular_momentum(CartesianState.from_vector(s)) for s in states])
        energy_drift = float(np.max(np.abs(energies - energies[0])))
        momentum_drift = float(np.max(np.abs(momenta - momenta[0])))

    return TrajectoryRecord(
        times=solution.t,
        states=states,
        eps=float(eps),
        monodromy=monodromy,
        energy_drift=energy_drift,
        angular_momentum_drift=momentum_drift,
    )


def period_map(
        f: ForcingModel,
        eps: float,
        s0: CartesianState,
        cfg: IntegratorConfig | None = None,
) -> tuple[CartesianState, Monodromy4]:
    """
    state at t = 2π and the Cartesian monodromy DΠ
    """
    record = integrate(f, eps, s0, (0.0, TWO_PI), cfg, with_variational=True)
    return record.final_state, record.monodromy


def monodromy_in_poincare(
        dpi: Monodromy4,
        s0: CartesianState,
        s1: CartesianState | None = None,
        invariant_tol: float = 1e-6,
) -> Monodromy4:
    """
    transport DΠ to the Poincaré chart in canonical ordering (λ, η, Λ, ξ)

    S = D𝒫⁻¹(s1) DΠ D𝒫⁻¹(s0)⁻¹ with D𝒫⁻¹ the finite-difference Jacobian of cartesian_to_poincare;
    s1 defaults to s0, the closed-orbit case
    """
    s1 = s0 if s1 is None else s1
    jac_in = cartesian_chart_jacobian(s0)
    jac_out = cartesian_chart_jacobian(s1)
    transported = jac_out @ dpi.entries @ np.linalg.inv(jac_in)

    # trace and det(S - I) are similarity invariants; the eigenvalues near a Jordan block are not reliable
    if s1 is s0:
        scale = max(1.0, float(np.max(np.abs(dpi.entries))))
        trace_gap = abs(np.trace(transported) - np.trace(dpi.entries))
        det_gap = abs(np.linalg.det(transported - np.eye(4)) - np.linalg.det(dpi.entries - np.eye(4)))
        if trace_gap > invariant_tol * scale or det_gap > invariant_tol * scale ** 3:
            logger.warning(
                "chart transport changed similarity invariants: trace by %.3e, det(S - I) by %.3e",
                trace_gap,
                det_gap,
            )
    return Monodromy4.from_matrix(transported)
