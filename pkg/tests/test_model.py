import numpy as np
import pytest

from cwlm.errors import NegativeEigenvalue
from cwlm.model import (
    MeasurementSetup,
    NoiseData,
    build_big_C,
    dissipator,
    lindblad_set,
    minimum_decoherence_margin,
    validate_setup,
)
from conftest import random_density, random_hermitian, random_valid_setup


def make_setup(S_det, S_cross=None, S_op=None, a_cross=None, a_op=None, ops=None, h=None):
    noise = NoiseData.create(S_det, S_cross=S_cross, S_op=S_op, a_cross=a_cross, a_op=a_op)
    m = noise.n_operators
    if ops is None:
        ops = tuple(np.diag([1.0, -1.0]).astype(complex) for _ in range(m))
    d = ops[0].shape[0] if ops else 2
    if h is None:
        h = np.zeros((d, d))
    return MeasurementSetup(hamiltonian=h, measured_ops=tuple(ops), noise=noise)


class TestBuildBigC:
    def test_single_detector_operator(self):
        noise = NoiseData.create(S_det=[[1.0]], S_op=[[1.0]], a_cross=[[1.0]])
        c = build_big_C(noise)
        expected = np.array([[1.0, -0.5j], [0.5j, 1.0]])
        assert np.allclose(c, expected, atol=1e-15)

    def test_zero_susceptibilities_gives_real_s(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(2, 2))
        s_det = a @ a.T + np.eye(2)
        s_cross = rng.normal(size=(2, 2))
        b = rng.normal(size=(2, 2))
        s_op = b @ b.T + np.eye(2)
        noise = NoiseData.create(S_det=s_det, S_cross=s_cross, S_op=s_op)
        c = build_big_C(noise)
        assert np.max(np.abs(c.imag)) == 0.0
        assert np.allclose(c[:2, :2], s_det)
        assert np.allclose(c[:2, 2:], s_cross.T)
        assert np.allclose(c[2:, 2:], s_op)

    def test_random_blocks_hermitian(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            a = rng.normal(size=(2, 2))
            b = rng.normal(size=(2, 2))
            noise = NoiseData.create(
                S_det=a @ a.T + np.eye(2),
                S_cross=rng.normal(size=(2, 2)),
                S_op=b @ b.T,
                a_cross=rng.normal(size=(2, 2)),
                a_op=rng.normal(size=(2, 2)),
            )
            c = build_big_C(noise)
            assert np.max(np.abs(c - c.conj().T)) < 1e-14

    def test_asymmetric_noise_rejected(self):
        with pytest.raises(ValueError):
            NoiseData.create(S_det=[[1.0, 0.2], [0.1, 1.0]])


class TestValidateSetup:
    def test_detector_operator_violation(self):
        setup = make_setup([[1.0]], S_op=[[1.0]], a_cross=[[2.0]])
        report = validate_setup(setup)
        check = report.check("detector_operator_coupling")
        assert not check.passed
        assert check.margin == pytest.approx(1.0 - 4.0)
        assert not report.overall

    def test_detector_pair_margin(self):
        setup = make_setup([[1.0, 0.9], [0.9, 1.0]])
        report = validate_setup(setup)
        check = report.check("detector_pair_cross_noise")
        assert check.passed
        assert check.margin == pytest.approx(0.19)

    def test_boundary_follows_paper_inequality(self):
        # S_aa must exceed 1 for S_det=1, a=1 per the stated inequality;
        # S_aa = 0.5 fails even though the combined matrix stays positive
        setup = make_setup([[1.0]], S_op=[[0.5]], a_cross=[[1.0]])
        report = validate_setup(setup)
        assert not report.check("detector_operator_coupling").passed
        assert report.check("big_c_positivity").passed
        passing = make_setup([[1.0]], S_op=[[1.0 + 1e-6]], a_cross=[[1.0]])
        assert validate_setup(passing).check("detector_operator_coupling").passed

    def test_saturated_flag(self):
        setup = make_setup([[1.0]], S_op=[[1.0]], a_cross=[[1.0]])
        report = validate_setup(setup)
        check = report.check("detector_operator_coupling")
        assert check.passed and check.saturated
        assert report.overall

    def test_non_hermitian_hamiltonian_reported(self):
        setup = make_setup(
            [[1.0]], S_op=[[1.0]], a_cross=[[0.5]], h=np.array([[0.0, 1.0], [0.0, 0.0]])
        )
        report = validate_setup(setup)
        assert not report.check("hamiltonian_hermiticity").passed

    def test_pure_reproducible(self):
        rng = np.random.default_rng(7)
        setup = random_valid_setup(rng)
        r1 = validate_setup(setup)
        r2 = validate_setup(setup)
        assert [(c.name, c.passed, c.margin) for c in r1.checks] == [
            (c.name, c.passed, c.margin) for c in r2.checks
        ]

    def test_triple_index_violation_caught_by_big_c(self):
        # pairwise checks pass but a 3-index direction is negative
        setup = make_setup(
            [[1.0, 0.8], [0.8, 1.0]],
            S_cross=[[0.6, -0.6]],
            S_op=[[1.0]],
            a_cross=[[0.0], [0.0]],
        )
        report = validate_setup(setup)
        assert report.check("detector_pair_cross_noise").passed
        assert report.check("detector_operator_coupling").passed
        assert not report.check("big_c_positivity").passed

    def test_subset_checks_necessary_for_positivity(self):
        # whenever the combined matrix is positive, every 1- and 2-index check passes
        rng = np.random.default_rng(21)
        for _ in range(20):
            setup = random_valid_setup(rng)
            report = validate_setup(setup)
            if report.check("big_c_positivity").passed and not report.check(
                "big_c_positivity"
            ).saturated:
                eigs = np.linalg.eigvalsh(build_big_C(setup.noise))
                if eigs[0] > 1e-9:
                    assert report.check("diagonal_noise_positivity").passed
                    assert report.check("detector_pair_cross_noise").passed


class TestLindbladSet:
    def test_single_operator(self, pauli):
        _, _, sz = pauli
        gamma = 0.7
        setup = make_setup([[1.0]], S_op=[[gamma]], a_cross=[[0.5]], ops=(sz,))
        channels = lindblad_set(setup)
        assert len(channels) == 1
        rate, l_op = channels[0]
        assert rate == pytest.approx(gamma)
        assert np.allclose(np.abs(l_op), np.sqrt(gamma) * np.abs(sz))

    def test_zero_eigenvalue_dropped(self, pauli):
        sx, _, sz = pauli
        s_op = np.array([[1.0, 1.0], [1.0, 1.0]])  # rank one
        setup = make_setup(
            [[1.0]], S_cross=[[0.0], [0.0]], S_op=s_op, a_cross=[[0.2, 0.2]], ops=(sz, sx)
        )
        channels = lindblad_set(setup)
        assert len(channels) == 1

    def test_negative_kernel_raises(self, pauli):
        _, _, sz = pauli
        setup = make_setup([[1.0]], S_op=[[-0.5]], a_cross=[[0.0]], ops=(sz,))
        with pytest.raises(NegativeEigenvalue):
            lindblad_set(setup)

    def test_reconstruction_matches_direct_form(self):
        # channel form vs literal double-sum over the coupling matrix
        rng = np.random.default_rng(3)
        for trial in range(5):
            setup = random_valid_setup(rng, d=3, n=2, m=2)
            channels = lindblad_set(setup)
            apply_channels = dissipator(channels)
            noise = setup.noise
            ops = setup.measured_ops
            for _ in range(20):
                rho = random_density(rng, 3)
                direct = np.zeros((3, 3), dtype=complex)
                for a in range(2):
                    for b in range(2):
                        oa, ob = ops[a], ops[b]
                        coef = noise.S_op[b, a] + 0.5j * (noise.a_op[b, a] - noise.a_op[a, b])
                        direct -= coef * (
                            0.5 * (ob @ oa @ rho + rho @ ob @ oa) - oa @ rho @ ob
                        )
                assert np.max(np.abs(apply_channels(rho) - direct)) < 1e-10


class TestMinimumDecoherence:
    def test_no_cross_terms_margin_is_kernel_eigenvalue(self, pauli):
        _, _, sz = pauli
        setup = make_setup([[1.0]], S_op=[[0.4]], a_cross=[[0.0]], ops=(sz,))
        assert minimum_decoherence_margin(setup) == pytest.approx(0.4)

    def test_saturation(self):
        a = 1.3
        setup = make_setup([[1.0]], S_op=[[a**2 / 4.0]], a_cross=[[a]])
        assert abs(minimum_decoherence_margin(setup)) < 1e-12

    def test_consistent_with_big_c_positivity(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            setup = random_valid_setup(rng)
            eigs = np.linalg.eigvalsh(build_big_C(setup.noise))
            if eigs[0] >= 0.0:
                assert minimum_decoherence_margin(setup) >= -1e-10
