"""
explicit analysis of a linear forcing p(t) = Σ c_n e^{int} at circular orbits

on the manifold c₀ = c_{2N} = 0 with c_N ≠ 0 the averaged function has exactly the two equator critical
points (λ*, 0, 0) and (λ* + π, 0, 0), e^{iλ*} = c_N/|c_N|, and
D²γ_N(λ*, 0, 0) = blockdiag(Λ_N²|c_N|, Λ_N M(p)); the Hessian at λ* + π is the negation.
"""
import dataclasses
import logging

import numpy as np
import pandas as pd

from .averaging import AveragedFunction, critical_point_at, gamma_gradient_hessian
from .continuation import ShootingConfig, classify_branch, continue_branch
from .exceptions import DegenerateEquatorError, KeplerAveragingError, OffManifoldError
from .flow_integrator import IntegratorConfig
from .forcing import FourierSpectrum, LinearForcing, two_harmonic_forcing
from .kepler_geometry import resonant_Lambda
from .symplectic_spectra import Verdict
from .utils import angle_distance, wrap_angle

logger = logging.getLogger(__name__)

# relative to the largest |c_n|
COEFFICIENT_TOL = 1e-12
DET_M_TOL = 1e-10
HESSIAN_MATCH_TOL = 1e-6


def _spectrum_of(spectrum: FourierSpectrum | LinearForcing) -> FourierSpectrum:
    if isinstance(spectrum, LinearForcing):
        return spectrum.spectrum
    return spectrum


def _check_winding(N: int) -> None:
    if N < 1:
        raise ValueError(f"N must be a positive integer, got {N}")


@dataclasses.dataclass(frozen=True)
class EquatorConditions:
    solvable: bool
    lambda_solutions: list[float]
    continuum: bool = False
    note: str = ""


def equator_critical_conditions(spectrum: FourierSpectrum | LinearForcing, N: int) -> EquatorConditions:
    """
    critical points of γ_N on the equator η = ξ = 0

    solvable iff 3|c₀| = |c_{2N}| and c₀c_{2N}conj(c_N)² is real non-negative; the λ solve
    Im(e^{-iλ}c_N) = 0 and e^{-2iλ}c_{2N} = 3conj(c₀)
    """
    _check_winding(N)
    spectrum = _spectrum_of(spectrum)
    c0, c_n, c_2n = (spectrum.coefficient(k * N) for k in (0, 1, 2))
    tol = COEFFICIENT_TOL * spectrum.max_abs()

    if max(abs(c0), abs(c_n), abs(c_2n)) <= tol:
        return EquatorConditions(
            solvable=True,
            lambda_solutions=[],
            continuum=True,
            note="continuum of critical points along the equator",
        )

    if abs(3.0 * abs(c0) - abs(c_2n)) > tol:
        return EquatorConditions(solvable=False, lambda_solutions=[], note="3|c_0| != |c_2N|")

    product = c0 * c_2n * np.conj(c_n) ** 2
    size = abs(product)
    if abs(product.imag) > COEFFICIENT_TOL * size or product.real < -COEFFICIENT_TOL * size:
        return EquatorConditions(solvable=False, lambda_solutions=[], note="c_0 c_2N conj(c_N)^2 is not in [0, inf)")

    if abs(c_n) > tol:
        lam = float(np.angle(c_n))
        return EquatorConditions(solvable=True, lambda_solutions=[wrap_angle(lam), wrap_angle(lam + np.pi)])

    # c_N = 0: only e^{-2iλ}c_{2N} = 3conj(c₀) constrains λ
    half = 0.5 * float(np.angle(c_2n) - np.angle(3.0 * np.conj(c0)))
    return EquatorConditions(
        solvable=True,
        lambda_solutions=[wrap_angle(half), wrap_angle(half + np.pi)],
        note="c_N vanishes: solutions of the second condition only",
    )


@dataclasses.dataclass(frozen=True)
class FamilyPrediction:
    sign: int
    lam: float
    verdict: Verdict

    @property
    def base(self) -> str:
        return f"{'+' if self.sign > 0 else '-'}e^(i(λ*+Nt))"

    def sentence(self) -> str:
        if self.verdict == Verdict.INCONCLUSIVE:
            return f"family {self.base} at λ = {self.lam:.6f}: no verdict, det M(p) vanishes"
        return f"family {self.base} at λ = {self.lam:.6f} is {self.verdict.value.lower()}"


@dataclasses.dataclass(frozen=True, eq=False)
class CircularReport:
    N: int
    c0: complex
    cN: complex
    c2N: complex
    cNeg: complex
    c3N: complex
    on_linear_manifold: bool
    lambda_star: float | None
    M_matrix: np.ndarray
    det_M: float
    family_predictions: tuple[FamilyPrediction, FamilyPrediction]
    gamma_hessian: np.ndarray

    def hessian_at(self, lam: float, tol: float = 1e-9) -> np.ndarray:
        """
        D²γ_N at (λ*, 0, 0) or (λ* + π, 0, 0)
        """
        if angle_distance(lam, self.lambda_star) <= tol:
            return self.gamma_hessian.copy()
        if angle_distance(lam, self.lambda_star + np.pi) <= tol:
            return -self.gamma_hessian
        raise ValueError(f"λ = {lam} is not an equator critical point")

    def to_dict(self) -> dict:
        def pair(c: complex) -> list[float]:
            return [float(c.real), float(c.imag)]

        return {
            "N": self.N,
            "coefficients": {
                "c0": pair(self.c0),
                "cN": pair(self.cN),
                "c2N": pair(self.c2N),
                "c-N": pair(self.cNeg),
                "c3N": pair(self.c3N),
            },
            "on_linear_manifold": self.on_linear_manifold,
            "lambda_star": self.lambda_star,
            "M": [[float(v) for v in row] for row in self.M_matrix],
            "det_M": self.det_M,
            "gamma_hessian": [[float(v) for v in row] for row in self.gamma_hessian],
            "families": [
                {"base": p.base, "lambda": p.lam, "class": p.verdict.value, "prediction": p.sentence()}
                for p in self.family_predictions
            ],
        }


def _family_predictions(lam_star: float, det_m: float, tol: float) -> tuple[FamilyPrediction, FamilyPrediction]:
    if abs(det_m) <= tol:
        first = second = Verdict.INCONCLUSIVE
    elif det_m > 0:
        first, second = Verdict.ELLIPTIC, Verdict.UNSTABLE
    else:
        first = second = Verdict.UNSTABLE
    return (
        FamilyPrediction(sign=1, lam=wrap_angle(lam_star), verdict=first),
        FamilyPrediction(sign=-1, lam=wrap_angle(lam_star + np.pi), verdict=second),
    )


def m_matrix(spectrum: FourierSpectrum | LinearForcing, N: int) -> CircularReport:
    """
    M(p) and the predictions for the two circular families

    M11 = |c_N| + ¼Re(c_N c_{-N}/|c_N| + 3conj(c_N)³c_{3N}/|c_N|³)
    M12 = ¼Im(c_N c_{-N}/|c_N| - 3conj(c_N)³c_{3N}/|c_N|³)
    M22 = |c_N| - ¼Re(c_N c_{-N}/|c_N| + 3conj(c_N)³c_{3N}/|c_N|³)

    :param spectrum: Fourier coefficients of p, or a LinearForcing
    :param N: positive winding number
    """
    _check_winding(N)
    spectrum = _spectrum_of(spectrum)
    c0, c_n, c_2n, c_neg, c_3n = (spectrum.coefficient(k) for k in (0, N, 2 * N, -N, 3 * N))
    tol = COEFFICIENT_TOL * spectrum.max_abs()

    if abs(c0) > tol or abs(c_2n) > tol:
        raise OffManifoldError(f"linear manifold needs c_0 = c_2N = 0, got |c_0| = {abs(c0):.3e}, |c_2N| = {abs(c_2n):.3e}")
    if abs(c_n) <= tol:
        raise DegenerateEquatorError("c_N vanishes: the equator critical points are not isolated")

    modulus = abs(c_n)
    mirror = c_n * c_neg / modulus
    cubic = 3.0 * np.conj(c_n) ** 3 * c_3n / modulus ** 3
    sym = 0.25 * (mirror + cubic).real
    m = np.array([
        [modulus + sym, 0.25 * (mirror - cubic).imag],
        [0.25 * (mirror - cubic).imag, modulus - sym],
    ])
    det_m = float(np.linalg.det(m))

    big_lambda = resonant_Lambda(N)
    hessian = np.zeros((3, 3))
    hessian[0, 0] = big_lambda ** 2 * modulus
    hessian[1:, 1:] = big_lambda * m

    lam_star = wrap_angle(float(np.angle(c_n)))
    return CircularReport(
        N=N,
        c0=c0,
        cN=c_n,
        c2N=c_2n,
        cNeg=c_neg,
        c3N=c_3n,
        on_linear_manifold=True,
        lambda_star=lam_star,
        M_matrix=m,
        det_M=det_m,
        family_predictions=_family_predictions(lam_star, det_m, DET_M_TOL * modulus ** 2),
        gamma_hessian=hessian,
    )


def two_harmonic_report(a: complex, N: int = 1) -> CircularReport:
    """
    m_matrix for p(t) = e^{iNt} + a e^{-iNt}
    """
    return m_matrix(two_harmonic_forcing(a, N).spectrum, N)


@dataclasses.dataclass(frozen=True, eq=False)
class CrossValidation:
    hessian_table: pd.DataFrame
    class_table: pd.DataFrame

    @property
    def hessian_match(self) -> bool:
        return bool(self.hessian_table["match"].all())

    @property
    def classes_match(self) -> bool:
        return bool(self.class_table["match"].all()) if not self.class_table.empty else True

    @property
    def passed(self) -> bool:
        return self.hessian_match and self.classes_match

    def mismatches(self) -> pd.DataFrame:
        """
        diff table of the failed comparisons
        """
        hessian = self.hessian_table.loc[~self.hessian_table["match"]].assign(check="hessian")
        if self.class_table.empty:
            return hessian
        classes = self.class_table.loc[~self.class_table["match"]].assign(check="class")
        return pd.concat([hessian, classes], ignore_index=True)


def cross_validate(
        report: CircularReport,
        f: LinearForcing,
        eps_grid: list[float] | None = None,
        cfg: IntegratorConfig | None = None,
        shooting: ShootingConfig | None = None,
        run_continuation: bool = True,
        quadrature_nodes: int | None = None,
) -> CrossValidation:
    """
    compare the closed-form Hessian with the averaging engine and the predictions with continuation runs;
    mismatches are reported in the tables, not raised. a family matches when every grid point is observed
    in the predicted class; threshold families carry no verdict and always match

    args:
        report: output of m_matrix
        f: the matching linear forcing
        eps_grid: continuation grid
        cfg: integrator settings
        shooting: newton settings
        run_continuation: False compares the Hessians only
        quadrature_nodes: quadrature size of γ_N
    returns:
        CrossValidation with a Hessian table and a per-family class table
    """
    averaged = AveragedFunction(report.N, f) if quadrature_nodes is None else AveragedFunction(report.N, f, quadrature_nodes)
    scale = max(1.0, float(np.max(np.abs(report.gamma_hessian))))

    hessian_rows = []
    class_rows = []
    for family in report.family_predictions:
        point = (family.lam, 0.0, 0.0)
        analytic = report.hessian_at(family.lam)
        _, numerical = gamma_gradient_hessian(averaged, point)
        for i in range(3):
            for j in range(i, 3):
                diff = abs(numerical[i, j] - analytic[i, j])
                hessian_rows.append({
                    "family": family.base,
                    "entry": f"{i}{j}",
                    "analytic": analytic[i, j],
                    "numerical": numerical[i, j],
                    "diff": diff,
                    "match": diff <= HESSIAN_MATCH_TOL * scale,
                })

        if not run_continuation:
            continue
        cp = critical_point_at(averaged, point)
        try:
            branch = continue_branch(f, cp, report.N, eps_grid, cfg, shooting)
        except KeplerAveragingError as e:
            logger.warning("continuation of family %s failed: %s", family.base, e)
            class_rows.append({
                "family": family.base,
                "predicted": family.verdict.value,
                "observed": None,
                "min_det_s_minus_i": np.nan,
                "match": family.verdict == Verdict.INCONCLUSIVE,
                "error": str(e),
            })
            continue

        classification = classify_branch(branch)
        observed = classification.table["observed"]
        uniform = observed.nunique() == 1
        observed_value = observed.iloc[0] if uniform else "mixed"
        if family.verdict == Verdict.INCONCLUSIVE:
            # no verdict to compare at the threshold
            match = True
        else:
            match = uniform and observed_value == family.verdict.value and not branch.truncated
        class_rows.append({
            "family": family.base,
            "predicted": family.verdict.value,
            "observed": observed_value,
            "min_det_s_minus_i": float(branch.to_frame()["det_s_minus_i"].min()),
            "match": match,
            "error": branch.failure,
        })

    validation = CrossValidation(
        hessian_table=pd.DataFrame(hessian_rows),
        class_table=pd.DataFrame(
            class_rows, columns=["family", "predicted", "observed", "min_det_s_minus_i", "match", "error"]
        ),
    )
    if not validation.passed:
        logger.warning("cross validation failed:\n%s", validation.mismatches().to_string())
    return validation
