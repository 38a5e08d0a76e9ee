import numpy as np
import pytest

from kepler_averaging.exceptions import PairingAmbiguousError
from kepler_averaging.symplectic_spectra import (
    J4,
    Monodromy4,
    StabilityClass,
    Verdict,
    check_parabolic,
    classify_local,
    eigen_pairing,
    is_linearly_stable,
    is_symplectic,
    make_remark_fixtures,
    parabolic_matrix,
    random_symplectic,
    unipotent_shear_limit,
    spectral_class,
    symplectic_defect,
    verdict_from_class,
)


def rotations(a: float, b: float) -> np.ndarray:
    """
    rotation by a in the (q1, p1) plane and by b in the (q2, p2) plane
    """
    s = np.zeros((4, 4))
    for q, p, angle in ((0, 2, a), (1, 3, b)):
        s[q, q] = s[p, p] = np.cos(angle)
        s[q, p] = np.sin(angle)
        s[p, q] = -np.sin(angle)
    return s


def hyperbolic(a: float, b: float) -> np.ndarray:
    return np.diag([np.exp(a), np.exp(b), np.exp(-a), np.exp(-b)])


class TestSymplecticDefect:
    @pytest.mark.parametrize(
        "matrix",
        [
            np.eye(4),
            J4,
            parabolic_matrix(-6 * np.pi),
            rotations(np.pi / 3, np.pi / 4),
            hyperbolic(0.3, -1.2),
        ],
        ids=[
            "identity",
            "standard_structure",
            "parabolic",
            "rotations",
            "hyperbolic",
        ],
    )
    def test_symplectic_matrices(self, matrix):
        assert symplectic_defect(matrix) < 1e-12
        assert is_symplectic(matrix)

    def test_non_symplectic(self):
        assert not is_symplectic(2.0 * np.eye(4))

    def test_wrong_shape(self):
        with pytest.raises(ValueError) as excinfo:
            symplectic_defect(np.eye(3))
        assert "must have shape (4, 4)" in str(excinfo.value)


class TestMonodromy4:
    def test_json(self):
        m = Monodromy4.from_matrix(rotations(0.1, 0.2))
        restored = Monodromy4.from_json(m.to_json())
        assert len(m.to_json()) == 16
        np.testing.assert_array_equal(restored.entries, m.entries)

    def test_entries_are_read_only(self):
        m = Monodromy4.from_matrix(np.eye(4))
        with pytest.raises(ValueError):
            m.entries[0, 0] = 2.0

    def test_from_json_needs_16_entries(self):
        with pytest.raises(ValueError) as excinfo:
            Monodromy4.from_json([1.0] * 15)
        assert "16 entries" in str(excinfo.value)


class TestEigenPairing:
    @pytest.mark.parametrize(
        "matrix, delta1, delta2, det",
        [
            (np.eye(4), 2.0, 2.0, 0.0),
            (parabolic_matrix(-6 * np.pi), 2.0, 2.0, 0.0),
            (rotations(np.pi / 3, np.pi / 4), 1.0, np.sqrt(2.0), 2.0 - np.sqrt(2.0)),
        ],
        ids=[
            "identity",
            "parabolic",
            "rotations",
        ],
    )
    def test_examples(self, matrix, delta1, delta2, det):
        summary = eigen_pairing(matrix)
        assert summary.deltas_real
        assert summary.delta1 == pytest.approx(delta1, abs=1e-9)
        assert summary.delta2 == pytest.approx(delta2, abs=1e-9)
        assert summary.det_s_minus_i == pytest.approx(det, abs=1e-9)

    def test_eigenvalues_are_paired(self):
        summary = eigen_pairing(hyperbolic(0.5, 1.5))
        mu = summary.eigenvalues
        assert abs(mu[0] * mu[2] - 1) < 1e-12
        assert abs(mu[1] * mu[3] - 1) < 1e-12
        assert summary.delta1 == pytest.approx(2 * np.cosh(0.5))
        assert summary.delta2 == pytest.approx(2 * np.cosh(1.5))

    def test_parabolic_spectrum(self):
        summary = eigen_pairing(parabolic_matrix(-6 * np.pi))
        np.testing.assert_allclose(summary.eigenvalues, np.ones(4), atol=1e-12)

    def test_non_symplectic_input(self):
        with pytest.raises(ValueError) as excinfo:
            eigen_pairing(np.diag([1.0, 2.0, 3.0, 4.0]))
        assert "not symplectic" in str(excinfo.value)

    def test_pairing_ambiguous(self):
        with pytest.raises(PairingAmbiguousError) as excinfo:
            eigen_pairing(np.diag([1.0, 2.0, 3.0, 4.0]), tol_symp=np.inf)
        assert "no reciprocal pairing" in str(excinfo.value)

    def test_summary_to_dict(self):
        summary = classify_local(rotations(np.pi / 3, np.pi / 4))
        data = summary.to_dict()
        assert data["class"] == "Elliptic"
        assert len(data["eigenvalues"]) == 4


class TestClassifyLocal:
    @pytest.mark.parametrize(
        "matrix, expected",
        [
            (rotations(np.pi / 3, np.pi / 4), StabilityClass.ELLIPTIC),
            (hyperbolic(0.3, 0.7), StabilityClass.HYPERBOLIC),
            (hyperbolic(0.3, 0.0) @ rotations(0.0, 0.4), StabilityClass.MIXED),
            (np.eye(4), StabilityClass.DEGENERATE),
            (parabolic_matrix(-6 * np.pi), StabilityClass.DEGENERATE),
            (-hyperbolic(0.3, 0.7), StabilityClass.OUTSIDE_LOCAL_CHART),
        ],
        ids=[
            "rotations_elliptic",
            "real_pairs_hyperbolic",
            "real_and_circle_mixed",
            "identity_degenerate",
            "parabolic_degenerate",
            "negative_multipliers_outside_chart",
        ],
    )
    def test_examples(self, matrix, expected):
        assert classify_local(matrix).stability_class == expected

    @pytest.mark.parametrize("eps", [0.05, 0.1, 0.2], ids=["eps_0.05", "eps_0.1", "eps_0.2"])
    def test_sheared_family_is_outside_chart(self, eps):
        s_eps, _, _ = make_remark_fixtures(eps, 1.0)
        summary = classify_local(s_eps)
        assert summary.det_s_minus_i > 0
        assert summary.trace < 4
        assert summary.spectral_class == StabilityClass.LOXODROMIC
        assert summary.stability_class == StabilityClass.OUTSIDE_LOCAL_CHART

    @pytest.mark.parametrize("eps", [0.5, 1.0, 1.5], ids=["eps_0.5", "eps_1.0", "eps_1.5"])
    def test_rotated_family_is_elliptic(self, eps):
        _, e_eps, _ = make_remark_fixtures(eps, 1.0)
        assert classify_local(e_eps).stability_class == StabilityClass.ELLIPTIC

    def test_elliptic_jordan_block_is_not_stable(self):
        r = np.array([[np.cos(0.25), -np.sin(0.25)], [np.sin(0.25), np.cos(0.25)]])
        s = np.block([[r, 2.0 * r], [np.zeros((2, 2)), r]])
        assert is_symplectic(s)
        assert classify_local(s).stability_class == StabilityClass.ELLIPTIC
        assert not is_linearly_stable(s)

    def test_chart_radius_is_accepted(self):
        summary = classify_local(rotations(0.5, 0.7), chart_radius=0.1)
        assert summary.stability_class == StabilityClass.ELLIPTIC

    def test_never_elliptic_off_circle(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            s = random_symplectic(rng)
            try:
                summary = classify_local(s)
            except ValueError:
                continue
            if summary.stability_class == StabilityClass.ELLIPTIC:
                assert np.all(np.abs(np.abs(summary.eigenvalues) - 1) <= 1e-6)


class TestRandomSuite:
    @pytest.fixture(autouse=True)
    def setup(self):
        rng = np.random.default_rng(20240611)
        self.matrices = [random_symplectic(rng) for _ in range(1000)]

    def test_generator_is_symplectic(self):
        for s in self.matrices:
            scale = max(1.0, np.linalg.norm(s, 2)) ** 2
            assert symplectic_defect(s) <= 1e-12 * scale

    def test_trace_and_determinant_identities(self):
        for s in self.matrices:
            if symplectic_defect(s) > 1e-8:
                continue
            summary = eigen_pairing(s)
            if not summary.deltas_real:
                continue
            scale = max(1.0, np.linalg.norm(s, 2)) ** 4
            assert summary.trace == pytest.approx(summary.delta1 + summary.delta2, rel=1e-9, abs=1e-12 * scale)
            product = (2 - summary.delta1) * (2 - summary.delta2)
            assert summary.det_s_minus_i == pytest.approx(product, rel=1e-9, abs=1e-12 * scale)

    def test_spectrum_inversion_symmetry(self):
        for s in self.matrices:
            mu = np.linalg.eigvals(s)
            gaps = np.abs(mu[:, None] - mu[None, :]) + np.eye(4)
            if gaps.min() < 1e-3:
                continue
            for value in mu:
                assert np.min(np.abs(mu - 1 / value)) <= 1e-8 * max(1.0, abs(1 / value))

    def test_trace_det_agrees_with_spectrum_inside_chart(self):
        checked = 0
        for s in self.matrices:
            if symplectic_defect(s) > 1e-8:
                continue
            try:
                summary = classify_local(s)
            except PairingAmbiguousError:
                continue
            d1, d2 = summary.delta1, summary.delta2
            margin = 1e-3
            if not summary.deltas_real or min(d1, d2) <= -2 + margin:
                continue
            if min(abs(d1 - 2), abs(d2 - 2), abs(d1 - d2)) <= margin:
                continue
            checked += 1
            assert summary.stability_class == summary.spectral_class
        assert checked > 0


class TestParabolic:
    def test_parabolic_conditions(self):
        conditions = check_parabolic(parabolic_matrix(-6 * np.pi))
        assert conditions == {
            "symplectic": True,
            "not_identity": True,
            "kernel_dimension": 3,
            "kernel_not_two": True,
            "spectrum_one": True,
        }

    def test_shear_limit_has_two_dimensional_kernel(self):
        conditions = check_parabolic(unipotent_shear_limit())
        assert conditions["spectrum_one"]
        assert conditions["kernel_dimension"] == 2
        assert not conditions["kernel_not_two"]

    def test_rank_one(self):
        assert np.linalg.matrix_rank(parabolic_matrix(-6 * np.pi) - np.eye(4)) == 1


class TestNearParabolicFixtures:
    def test_fixtures_are_symplectic(self):
        for m in make_remark_fixtures(0.1, 1.0):
            assert m.symplectic_defect < 1e-8

    def test_s_eps_blocks(self):
        s_eps, _, _ = make_remark_fixtures(0.1, 1.0)
        mu = np.sort_complex(np.linalg.eigvals(s_eps.entries))
        expected = np.sort_complex(np.array([1 + 0.1j, 1 - 0.1j, 1 / (1 + 0.1j), 1 / (1 - 0.1j)]))
        np.testing.assert_allclose(mu, expected, atol=1e-9)

    def test_limit(self):
        distances = [
            np.linalg.norm(make_remark_fixtures(eps, 1.0)[0].entries - unipotent_shear_limit())
            for eps in (1e-1, 1e-2, 1e-3)
        ]
        assert distances[0] > distances[1] > distances[2]
        assert distances[2] < 1e-2

    def test_e_eps_spectrum(self):
        _, e_eps, _ = make_remark_fixtures(0.5, 1.0)
        mu = np.linalg.eigvals(e_eps.entries)
        assert np.sum(np.abs(mu - np.exp(0.25j)) < 1e-6) == 2
        assert np.sum(np.abs(mu - np.exp(-0.25j)) < 1e-6) == 2

    def test_zero_eps(self):
        with pytest.raises(ValueError) as excinfo:
            make_remark_fixtures(0.0, 1.0)
        assert "eps must be nonzero" in str(excinfo.value)


class TestLinearStability:
    @pytest.mark.parametrize(
        "matrix, expected",
        [
            (rotations(0.4, 1.1), True),
            (np.eye(4), True),
            (parabolic_matrix(-6 * np.pi), False),
            (hyperbolic(0.2, 0.0), False),
        ],
        ids=[
            "rotations",
            "identity",
            "parabolic_jordan_block",
            "hyperbolic",
        ],
    )
    def test_is_linearly_stable(self, matrix, expected):
        assert is_linearly_stable(matrix) == expected


class TestVerdicts:
    @pytest.mark.parametrize(
        "stability_class, expected",
        [
            (StabilityClass.ELLIPTIC, Verdict.ELLIPTIC),
            (StabilityClass.HYPERBOLIC, Verdict.UNSTABLE),
            (StabilityClass.MIXED, Verdict.UNSTABLE),
            (StabilityClass.DEGENERATE, Verdict.INCONCLUSIVE),
            (StabilityClass.OUTSIDE_LOCAL_CHART, Verdict.INCONCLUSIVE),
        ],
        ids=["elliptic", "hyperbolic", "mixed", "degenerate", "outside_chart"],
    )
    def test_verdict_from_class(self, stability_class, expected):
        assert verdict_from_class(stability_class) == expected

    def test_spectral_class_loxodromic(self):
        z = 1.2 * np.exp(0.3j)
        mu = np.array([z, np.conj(z), 1 / z, 1 / np.conj(z)])
        assert spectral_class(mu) == StabilityClass.LOXODROMIC
