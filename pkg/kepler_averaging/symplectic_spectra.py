"""
spectral analysis of real 4x4 symplectic matrices near the parabolic matrix P_*

all matrices use the canonical ordering (q1, q2, p1, p2), so J = [[0, I], [-I, 0]]
"""
import dataclasses
import enum
import logging

import numpy as np
from scipy.linalg import expm

from .exceptions import PairingAmbiguousError
from .utils import check_matrix

logger = logging.getLogger(__name__)

TOL_SYMP = 1e-8
TOL_EIG = 1e-6
PAIRING_TOL = 1e-6
DEGENERATE_BAND = 1e-10

J4 = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])

# the three ways to split four eigenvalues into two reciprocal pairs
_MATCHINGS = (((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2)))


class StabilityClass(str, enum.Enum):
    ELLIPTIC = "Elliptic"
    HYPERBOLIC = "Hyperbolic"
    MIXED = "MixedEllipticHyperbolic"
    DEGENERATE = "Degenerate"
    OUTSIDE_LOCAL_CHART = "OutsideLocalChart"
    # only produced by the direct spectral verdict: a complex quadruple off the unit circle
    LOXODROMIC = "Loxodromic"


class Verdict(str, enum.Enum):
    ELLIPTIC = "Elliptic"
    UNSTABLE = "Unstable"
    INCONCLUSIVE = "Inconclusive"


def verdict_from_class(stability_class: StabilityClass) -> Verdict:
    if stability_class == StabilityClass.ELLIPTIC:
        return Verdict.ELLIPTIC
    if stability_class in (StabilityClass.HYPERBOLIC, StabilityClass.MIXED):
        return Verdict.UNSTABLE
    return Verdict.INCONCLUSIVE


def symplectic_defect(matrix: any) -> float:
    """
    operator 2-norm of SᵀJS - J
    """
    s = check_matrix(matrix, (4, 4), "symplectic matrix")
    return float(np.linalg.norm(s.T @ J4 @ s - J4, ord=2))


def is_symplectic(matrix: any, tol: float = TOL_SYMP) -> bool:
    return symplectic_defect(matrix) <= tol


@dataclasses.dataclass(frozen=True, eq=False)
class Monodromy4:
    entries: np.ndarray
    symplectic_defect: float

    @classmethod
    def from_matrix(cls, matrix: any) -> "Monodromy4":
        entries = check_matrix(matrix, (4, 4), "monodromy")
        entries = entries.copy()
        entries.setflags(write=False)
        return cls(entries=entries, symplectic_defect=symplectic_defect(entries))

    def to_json(self) -> list[float]:
        """
        row-major list of the 16 entries
        """
        return [float(v) for v in self.entries.ravel()]

    @classmethod
    def from_json(cls, values: list[float]) -> "Monodromy4":
        if len(values) != 16:
            raise ValueError(f"monodromy needs 16 entries, got {len(values)}")
        return cls.from_matrix(np.asarray(values, dtype=float).reshape(4, 4))


def as_monodromy(matrix: any) -> Monodromy4:
    if isinstance(matrix, Monodromy4):
        return matrix
    return Monodromy4.from_matrix(matrix)


@dataclasses.dataclass(frozen=True, eq=False)
class SpectralSummary:
    """
    eigenvalues are stored as [μ1, μ2, μ3, μ4] with μ1μ3 = 1 and μ2μ4 = 1,
    delta1 = μ1 + μ3 <= delta2 = μ2 + μ4 (real parts when deltas_real is false)
    """
    delta1: float
    delta2: float
    trace: float
    det_s_minus_i: float
    eigenvalues: np.ndarray
    stability_class: StabilityClass | None = None
    spectral_class: StabilityClass | None = None
    deltas_real: bool = True
    pairing_residual: float = 0.0

    def to_dict(self) -> dict:
        return {
            "delta1": self.delta1,
            "delta2": self.delta2,
            "deltas_real": self.deltas_real,
            "trace": self.trace,
            "det_s_minus_i": self.det_s_minus_i,
            "eigenvalues": [[float(mu.real), float(mu.imag)] for mu in self.eigenvalues],
            "class": None if self.stability_class is None else self.stability_class.value,
            "spectral_class": None if self.spectral_class is None else self.spectral_class.value,
        }


def _delta_roots(s: np.ndarray) -> tuple[float, float, bool]:
    """
    Δ1, Δ2 as roots of Δ² - (tr S)Δ + (b - 2), b the second coefficient of the characteristic polynomial
    """
    a = np.trace(s)
    b = 0.5 * (a * a - np.trace(s @ s))
    disc = a * a - 4.0 * (b - 2.0)
    if disc >= -1e-12 * max(1.0, a * a):
        root = np.sqrt(max(disc, 0.0))
        return 0.5 * (a - root), 0.5 * (a + root), True
    return 0.5 * a, 0.5 * a, False


def eigen_pairing(matrix: Monodromy4 | np.ndarray, tol_symp: float = TOL_SYMP) -> SpectralSummary:
    """
    group the spectrum into reciprocal pairs and compute Δ1, Δ2, tr S and det(S - I)

    :param matrix: symplectic matrix with defect below tol_symp
    :param tol_symp: accepted symplectic defect
    :return: SpectralSummary without a class
    """
    m = as_monodromy(matrix)
    if m.symplectic_defect > tol_symp:
        raise ValueError(f"matrix is not symplectic: defect {m.symplectic_defect:.3e} exceeds {tol_symp:.1e}")

    s = m.entries
    mu = np.linalg.eigvals(s)

    residuals = [
        max(abs(mu[i] * mu[j] - 1.0), abs(mu[k] * mu[l] - 1.0))
        for (i, j), (k, l) in _MATCHINGS
    ]
    best = int(np.argmin(residuals))
    if residuals[best] > PAIRING_TOL:
        raise PairingAmbiguousError(
            f"no reciprocal pairing of the spectrum, best residual {residuals[best]:.3e}"
        )

    pairs = []
    for i, j in _MATCHINGS[best]:
        first, second = mu[i], mu[j]
        # outside-or-upper member first
        if (abs(second), second.imag) > (abs(first), first.imag):
            first, second = second, first
        pairs.append((first, second))
    pairs.sort(key=lambda p: (p[0] + p[1]).real)

    delta1, delta2, deltas_real = _delta_roots(s)
    if not deltas_real:
        delta1, delta2 = sorted(float((p[0] + p[1]).real) for p in pairs)

    eigenvalues = np.array([pairs[0][0], pairs[1][0], pairs[0][1], pairs[1][1]], dtype=complex)

    return SpectralSummary(
        delta1=float(delta1),
        delta2=float(delta2),
        trace=float(np.trace(s)),
        det_s_minus_i=float(np.linalg.det(s - np.eye(4))),
        eigenvalues=eigenvalues,
        deltas_real=deltas_real,
        pairing_residual=float(residuals[best]),
    )


def spectral_class(eigenvalues: np.ndarray, tol_eig: float = TOL_EIG) -> StabilityClass:
    """
    direct verdict from a paired spectrum [μ1, μ2, μ3, μ4] (μ1μ3 = μ2μ4 = 1)
    """
    mu = np.asarray(eigenvalues, dtype=complex)
    if np.any(np.abs(mu - 1.0) <= tol_eig) or np.any(np.abs(mu + 1.0) <= tol_eig):
        return StabilityClass.DEGENERATE

    kinds = []
    for pair in (mu[[0, 2]], mu[[1, 3]]):
        if np.all(np.abs(np.abs(pair) - 1.0) <= tol_eig):
            kinds.append("circle")
        elif np.all(np.abs(pair.imag) <= tol_eig * np.maximum(1.0, np.abs(pair))):
            kinds.append("real")
        else:
            kinds.append("off")

    if "off" in kinds:
        return StabilityClass.LOXODROMIC
    if kinds == ["circle", "circle"]:
        return StabilityClass.ELLIPTIC
    if kinds == ["real", "real"]:
        return StabilityClass.HYPERBOLIC
    return StabilityClass.MIXED


def _trace_det_class(summary: SpectralSummary) -> StabilityClass:
    if summary.det_s_minus_i < 0:
        return StabilityClass.MIXED
    if summary.trace < 4.0:
        return StabilityClass.ELLIPTIC
    return StabilityClass.HYPERBOLIC


def classify_local(
        matrix: Monodromy4 | np.ndarray,
        chart_radius: float | None = None,
        tol_eig: float = TOL_EIG,
        degenerate_band: float = DEGENERATE_BAND,
        tol_symp: float = TOL_SYMP,
) -> SpectralSummary:
    """
    classify a symplectic matrix near P_* with the criterion det(S - I) > 0, tr S < 4,
    cross-checked against the spectrum

    args:
        matrix: symplectic 4x4 matrix
        chart_radius: size of the neighbourhood the caller believes in, only logged
        tol_eig: tolerance for |μ| = 1 and μ = ±1
        degenerate_band: |det(S - I)| below this gives Degenerate
        tol_symp: accepted symplectic defect
    returns:
        SpectralSummary with stability_class and spectral_class populated
    """
    summary = eigen_pairing(matrix, tol_symp=tol_symp)
    if chart_radius is not None:
        logger.debug("classify_local called with chart radius %.3e", chart_radius)

    direct = spectral_class(summary.eigenvalues, tol_eig=tol_eig)

    if abs(summary.det_s_minus_i) < degenerate_band:
        result = StabilityClass.DEGENERATE
    else:
        by_trace = _trace_det_class(summary)
        if by_trace == direct:
            result = by_trace
        else:
            logger.debug(
                "trace/det verdict %s disagrees with spectrum %s: outside local chart",
                by_trace.value,
                direct.value,
            )
            result = StabilityClass.OUTSIDE_LOCAL_CHART

    return dataclasses.replace(summary, stability_class=result, spectral_class=direct)


def parabolic_matrix(tau: float) -> np.ndarray:
    """
    P_* = [[I, T], [0, I]] with T = diag(tau, 0)
    """
    p = np.eye(4)
    p[0, 2] = tau
    return p


def kernel_dimension(matrix: any, tol: float = 1e-9) -> int:
    """
    dim ker(S - I) from singular values
    """
    s = check_matrix(matrix, (4, 4))
    sv = np.linalg.svd(s - np.eye(4), compute_uv=False)
    return int(np.sum(sv <= tol * max(1.0, sv[0])))


def check_parabolic(matrix: any, tol: float = 1e-9) -> dict[str, bool | int]:
    """
    conditions of a parabolic matrix: symplectic, P != I, dim ker(P - I) != 2, σ(P) = {1}

    :return: dict with every condition and the kernel dimension
    """
    s = check_matrix(matrix, (4, 4))
    kernel = kernel_dimension(s, tol)
    mu = np.linalg.eigvals(s)
    # a Jordan block of size k moves the eigenvalues by ~eps^(1/k)
    spectrum_one = bool(np.all(np.abs(mu - 1.0) <= 1e-4))
    return {
        "symplectic": is_symplectic(s),
        "not_identity": bool(np.linalg.norm(s - np.eye(4)) > tol),
        "kernel_dimension": kernel,
        "kernel_not_two": kernel != 2,
        "spectrum_one": spectrum_one,
    }


def _planar_block(top_left: np.ndarray, top_right: np.ndarray, bottom_right: np.ndarray) -> np.ndarray:
    return np.block([[top_left, top_right], [np.zeros((2, 2)), bottom_right]])


def unipotent_shear_limit() -> np.ndarray:
    """
    blockdiag(βᵀ, β⁻¹) with β = [[1, 0], [-1, 1]]: spectrum {1} but dim ker(P - I) = 2
    """
    beta = np.array([[1.0, 0.0], [-1.0, 1.0]])
    return _planar_block(beta.T, np.zeros((2, 2)), np.linalg.inv(beta))


def make_remark_fixtures(eps: float, tau: float) -> list[Monodromy4]:
    """
    the matrices S_ε = Q_ε B_ε Q_ε⁻¹, ℰ_ε = Q_ε E_ε Q_ε⁻¹ and P_*(τ)

    S_ε satisfies the trace/det criterion without being elliptic; ℰ_ε is elliptic with the double
    eigenvalues e^{±iε²}, and tends to a non-diagonalizable matrix as ε -> 0

    :param eps: nonzero deformation parameter
    :param tau: shear of P_* and of E_ε
    :return: [S_ε, ℰ_ε, P_*]
    """
    if eps == 0:
        raise ValueError("eps must be nonzero")

    a = np.diag([1.0, eps])
    a_inv = np.diag([1.0, 1.0 / eps])
    m = np.diag([0.0, 1.0])
    q = _planar_block(a, m, a_inv)
    q_inv = _planar_block(a_inv, -m, a)

    c = np.array([[1.0, eps], [-eps, 1.0]])
    b = _planar_block(c.T, np.zeros((2, 2)), np.linalg.inv(c))

    angle = eps * eps
    r = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    e = _planar_block(r, np.diag([tau, -tau]), r)

    return [
        Monodromy4.from_matrix(q @ b @ q_inv),
        Monodromy4.from_matrix(q @ e @ q_inv),
        Monodromy4.from_matrix(parabolic_matrix(tau)),
    ]


def is_linearly_stable(matrix: any, tol_eig: float = TOL_EIG, cluster_tol: float = 1e-5) -> bool:
    """
    bounded powers: spectrum on the unit circle and S diagonalizable

    eigenvalues closer than cluster_tol are treated as one multiple eigenvalue
    """
    s = check_matrix(matrix, (4, 4))
    mu = np.linalg.eigvals(s)
    if np.any(np.abs(np.abs(mu) - 1.0) > tol_eig):
        return False

    scale = max(1.0, float(np.linalg.norm(s, ord=2)))
    unused = list(range(4))
    while unused:
        i = unused.pop(0)
        cluster = [i] + [j for j in unused if abs(mu[j] - mu[i]) <= cluster_tol]
        unused = [j for j in unused if j not in cluster]
        if len(cluster) == 1:
            continue
        # the cluster mean is accurate even when the individual eigenvalues are not
        centre = np.mean(mu[cluster])
        sv = np.linalg.svd(s - centre * np.eye(4), compute_uv=False)
        geometric = int(np.sum(sv <= 1e-6 * scale))
        if geometric < len(cluster):
            return False
    return True


def random_symplectic(rng: np.random.Generator, n_factors: int = 4, scale: float = 0.5) -> np.ndarray:
    """
    product of random symplectic shears [[I, A], [0, I]], [[I, 0], [A, I]] and rotations exp(J H)

    :param rng: numpy random generator
    :param n_factors: number of factors of each kind
    :param scale: size of the random symmetric blocks
    """
    result = np.eye(4)
    for _ in range(n_factors):
        a = rng.normal(scale=scale, size=(2, 2))
        a = 0.5 * (a + a.T)
        upper = np.block([[np.eye(2), a], [np.zeros((2, 2)), np.eye(2)]])

        a = rng.normal(scale=scale, size=(2, 2))
        a = 0.5 * (a + a.T)
        lower = np.block([[np.eye(2), np.zeros((2, 2))], [a, np.eye(2)]])

        h = rng.normal(scale=scale, size=(4, 4))
        h = 0.5 * (h + h.T)
        rotation = expm(J4 @ h)

        for factor in (upper, lower, rotation):
            result = result @ factor
    return result
