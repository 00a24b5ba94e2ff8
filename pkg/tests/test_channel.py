import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from fris.channel import (AssembledChannel, ChannelRealization, PathComponent, assemble,
                          direct_channels, effective_channels, path_loss_amplitude,
                          sample_realization, steering_bs, steering_ris, write_paths_csv)
from fris.config import ScenarioConfig
from fris.sph_harmonics import basis_vector, isotropic_coefficients, pattern_gain


def bank_pattern(omega):
    return lambda theta, phi: np.array([pattern_gain(w, theta, phi) for w in omega])


def random_bank(rs, M, I):  # noqa: E741
    return rs.standard_normal((M, I)) + 1j * rs.standard_normal((M, I))


class TestPathLoss:
    def test_reference_distance(self):
        assert_allclose(path_loss_amplitude(1.0, 0.01, 3.3), 0.1)

    def test_table_value(self):
        # -20 dB at 200 m with exponent 2.6: exp(-0.5 * (ln 100 + 2.6 ln 200))
        ref = math.exp(-0.5 * (math.log(100.0) + 2.6 * math.log(200.0)))
        assert_allclose(path_loss_amplitude(200.0, 10 ** -2, 2.6), ref, rtol=1e-13)
        assert_allclose(ref, 1.02014e-4, rtol=1e-5)

    @given(d=st.floats(0.1, 1e4), alpha=st.floats(1.0, 5.0))
    def test_doubling(self, d, alpha):
        ratio = path_loss_amplitude(2 * d, 0.01, alpha) / path_loss_amplitude(d, 0.01, alpha)
        assert_allclose(ratio, 2 ** (-alpha / 2), rtol=1e-12)

    @pytest.mark.parametrize("d,rho", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)])
    def test_errors(self, d, rho):
        with pytest.raises(ValueError):
            path_loss_amplitude(d, rho, 2.0)


class TestSteering:
    def test_broadside_is_ones(self):
        assert_allclose(steering_ris(math.pi / 2, 0.0, 3, 4), np.ones(12), atol=1e-15)
        assert_allclose(steering_bs(0.0, 1.2, 5), np.ones(5))

    def test_half_wavelength_examples(self):
        assert_allclose(steering_ris(math.pi / 2, math.pi / 2, 2, 1), [1, np.exp(-1j * math.pi)],
                        atol=1e-15)
        assert_allclose(steering_bs(math.pi / 2, 0.0, 2), [1, np.exp(-1j * math.pi)], atol=1e-15)

    def test_z_fastest_ordering(self):
        th, ph = 1.1, 0.4
        a = steering_ris(th, ph, 3, 2)
        for ty in range(3):
            for tz in range(2):
                ref = np.exp(-1j * math.pi * (ty * math.sin(th) * math.sin(ph) + tz * math.cos(th)))
                assert_allclose(a[ty * 2 + tz], ref, rtol=1e-14)

    @given(theta=st.floats(0, math.pi), phi=st.floats(-math.pi, math.pi),
           my=st.integers(1, 6), mz=st.integers(1, 6), nt=st.integers(1, 8))
    def test_unit_modulus_first_entry_one(self, theta, phi, my, mz, nt):
        for a in (steering_ris(theta, phi, my, mz), steering_bs(theta, phi, nt)):
            assert_allclose(np.abs(a), 1.0, rtol=1e-14)
            assert a[0] == 1


class TestSampling:
    def test_deterministic(self):
        cfg = ScenarioConfig()
        assert sample_realization(cfg, 3) == sample_realization(cfg, 3)
        assert sample_realization(cfg, 3) != sample_realization(cfg, 4)

    def test_L_mean(self):
        cfg = ScenarioConfig(K=1, weights=[1.0])
        Ls = [len(sample_realization(cfg, s).bs_ris_paths) - 1 for s in range(10_000)]
        assert abs(np.mean(Ls) - 5.5) < 0.1
        assert min(Ls) == 3 and max(Ls) == 8

    def test_supports(self):
        cfg = ScenarioConfig()
        for s in range(50):
            r = sample_realization(cfg, s)
            nlos = [p for p in r.bs_ris_paths if not p.is_los]
            assert all(math.radians(90) <= p.ris_theta <= math.radians(180) for p in nlos)
            assert all(math.radians(-90) <= p.ris_phi <= math.radians(-30) for p in nlos)
            assert all(cfg.d_br <= p.distance <= 1.2 * cfg.d_br for p in r.bs_ris_paths)
            for paths in r.ris_ue_paths:
                assert sum(p.is_los for p in paths) == 1
                los = paths[0]
                assert math.radians(100) <= los.ris_theta <= math.radians(110)
                assert 3 <= len(paths) - 1 <= 8
            assert sum(p.is_los for p in r.bs_ris_paths) == 1

    def test_normalizers(self):
        r = sample_realization(ScenarioConfig(), 0)
        assert_allclose(r.gamma1, math.sqrt(1 / len(r.bs_ris_paths)))
        assert_allclose(r.gamma2(1), math.sqrt(1 / len(r.ris_ue_paths[1])))

    def test_invalid_support(self):
        with pytest.raises(ValueError):
            ScenarioConfig(angles={"ris_aoa_theta": (180.0, 90.0)})


def single_path_realization(gain=0.7 - 0.2j):
    bs = (PathComponent(gain, 10.0, math.pi / 2, 0.0, 0.0, 0.0, True),)
    ue = ((PathComponent(1.0, 5.0, math.pi / 2, 0.0, is_los=True),),)
    return ChannelRealization(bs, ue, 1, 1, 1, 0.01, 2.0)


class TestAssemble:
    def test_single_path_scalar(self):
        r = single_path_realization()
        a = assemble(r, 1)
        ref = r.gamma1 * path_loss_amplitude(10.0, 0.01, 2.0) * (0.7 - 0.2j) / math.sqrt(4 * math.pi)
        assert_allclose(a.A, [[ref]], rtol=1e-14)

    def test_shapes(self):
        cfg = ScenarioConfig(M_y=2, M_z=3, N_t=4, I=9)
        a = assemble(sample_realization(cfg, 1), 9)
        assert a.A.shape == (9 * 6, 4)
        assert a.b(0).shape == (9 * 6,)
        assert (a.M, a.I, a.N_t, a.K) == (6, 9, 4, 3)

    def test_dense_block_diagonal_form(self):
        cfg = ScenarioConfig(M_y=2, M_z=2, N_t=3, I=4)
        a = assemble(sample_realization(cfg, 2), 4)
        omega = random_bank(np.random.default_rng(0), 4, 4)
        Om = np.zeros((16, 4), dtype=complex)
        for m in range(4):
            Om[4 * m:4 * m + 4, m] = omega[m]
        H, h = effective_channels(omega, a)
        assert_allclose(H, Om.conj().T @ a.A, rtol=1e-12, atol=0)
        assert_allclose(h[1], Om.conj().T @ a.b(1), rtol=1e-12)

    def test_isotropic_bank_matches_identity_pattern(self):
        cfg = ScenarioConfig(M_y=2, M_z=2, N_t=3, I=9)
        r = sample_realization(cfg, 5)
        H, h = effective_channels(np.tile(isotropic_coefficients(9), (4, 1)), assemble(r, 9))
        H0, h0 = direct_channels(r, lambda t, p: np.ones(4))
        assert_allclose(H, H0, rtol=1e-12)
        assert_allclose(h, h0, rtol=1e-12)


class TestEffectiveChannels:
    def test_zero_bank(self, small_assembled):
        H, h = effective_channels(np.zeros((4, 9)), small_assembled)
        assert not H.any() and not h.any()

    def test_shape_mismatch(self, small_assembled):
        with pytest.raises(ValueError):
            effective_channels(np.zeros((4, 4)), small_assembled)

    @given(alpha=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
    def test_conjugate_linear(self, small_assembled, alpha):
        omega = random_bank(np.random.default_rng(8), 4, 9)
        H, h = effective_channels(omega, small_assembled)
        Ha, ha = effective_channels(alpha * omega, small_assembled)
        assert_allclose(Ha, np.conj(alpha) * H, rtol=1e-12, atol=1e-300)
        assert_allclose(ha, np.conj(alpha) * h, rtol=1e-12, atol=1e-300)

    @given(seed=st.integers(0, 10_000), my=st.integers(1, 4), mz=st.integers(1, 2),
           nt=st.integers(1, 4), n=st.integers(1, 9))
    def test_factorization_matches_direct(self, seed, my, mz, nt, n):
        cfg = ScenarioConfig(M_y=my, M_z=mz, N_t=nt, I=n)
        r = sample_realization(cfg, seed)
        omega = random_bank(np.random.default_rng(seed), r.M, n)
        H, h = effective_channels(omega, assemble(r, n))
        H0, h0 = direct_channels(r, bank_pattern(omega))
        assert np.max(np.abs(H - H0)) <= 1e-10 * np.max(np.abs(H0))
        assert np.max(np.abs(h - h0)) <= 1e-10 * np.max(np.abs(h0))


def test_noise_normalization_keeps_sinr_ratio(small_config):
    r = sample_realization(small_config, 3)
    a = assemble(r, 9, noise=[2.0, 8.0])
    n = a.noise_normalized()
    assert_allclose(n.noise, 1.0)
    assert_allclose(n.b_blocks[1], a.b_blocks[1] / math.sqrt(8.0))
    assert isinstance(n, AssembledChannel)


def test_paths_csv(tmp_path):
    r = sample_realization(ScenarioConfig(), 0)
    path = tmp_path / "paths.csv"
    write_paths_csv(path, r)
    lines = path.read_text().splitlines()
    assert len(lines) == 1 + len(r.bs_ris_paths) + sum(len(p) for p in r.ris_ue_paths)


def test_basis_column_in_A():
    # the A block of a single path is a_R[m] * eta * conj(a_B)^T
    r = single_path_realization()
    a = assemble(r, 4)
    eta = basis_vector(math.pi / 2, 0.0, 4).values
    scale = r.gamma1 * path_loss_amplitude(10.0, 0.01, 2.0) * (0.7 - 0.2j)
    assert_allclose(a.A_blocks[0, :, 0], scale * eta, rtol=1e-14)
