import math

import numpy as np
import pytest

from igacq.cqm import (
    CqmConfig,
    CqmError,
    butcher_radau_iia,
    characteristic_delta,
    frequency_problems,
    march,
    stability_function,
    weighted_dft,
)


def exp_conv_t3(t):
    """``int_0^t exp(-(t - u)) u^3 du``."""
    return t ** 3 - 3 * t ** 2 + 6 * t - 6 + 6 * np.exp(-t)


class TestTableau:
    @pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
    def test_order_conditions(self, m):
        tab = butcher_radau_iia(m)
        for k in range(2 * m - 1):
            assert tab.b @ tab.c ** k == pytest.approx(1.0 / (k + 1), rel=1e-13)
        for k in range(m):
            np.testing.assert_allclose(tab.A @ tab.c ** k, tab.c ** (k + 1) / (k + 1), atol=1e-14)

    @pytest.mark.parametrize("m", [2, 3, 4])
    def test_stiffly_accurate(self, m):
        tab = butcher_radau_iia(m)
        np.testing.assert_allclose(tab.A[-1], tab.b, atol=1e-15)
        assert tab.c[-1] == 1.0
        assert abs(stability_function(tab, -1e8)) < 1e-7

    def test_three_stage_nodes(self):
        r6 = math.sqrt(6.0)
        tab = butcher_radau_iia(3)
        np.testing.assert_allclose(tab.c, [(4 - r6) / 10, (4 + r6) / 10, 1.0], atol=1e-15)
        np.testing.assert_allclose(tab.b, [(16 - r6) / 36, (16 + r6) / 36, 1 / 9], atol=1e-15)
        assert tab.order == 5 and tab.stage_order == 3

    def test_backward_euler(self):
        tab = butcher_radau_iia(1)
        assert stability_function(tab, 0.5) == pytest.approx(2.0)
        assert characteristic_delta(tab, 0.3)[0, 0] == pytest.approx(0.7)

    def test_two_stage_stability(self):
        z = -0.7 + 0.4j
        ref = (1 + z / 3) / (1 - 2 * z / 3 + z * z / 6)
        assert stability_function(butcher_radau_iia(2), z) == pytest.approx(ref, rel=1e-14)

    @pytest.mark.parametrize("m", [0, 6, 2.5])
    def test_unsupported(self, m):
        with pytest.raises(CqmError):
            butcher_radau_iia(m)

    def test_delta_domain(self):
        with pytest.raises(CqmError):
            characteristic_delta(butcher_radau_iia(2), 1.0)


class TestConfig:
    def test_defaults(self):
        cfg = CqmConfig(N=10, dt=0.1)
        assert cfg.n_freq == 10
        assert cfg.radius == pytest.approx(1e-14 ** (1 / 20))
        np.testing.assert_allclose(cfg.step_times(), cfg.stage_times()[:, -1])

    @pytest.mark.parametrize("kw", [{"N": 0, "dt": 1.0}, {"N": 4, "dt": 0.0}, {"N": 4, "dt": 1.0, "L": 3},
                                    {"N": 4, "dt": 1.0, "R": 1.0}])
    def test_invalid(self, kw):
        with pytest.raises(CqmError):
            CqmConfig(**kw)

    def test_frequency_count(self):
        assert len(frequency_problems(CqmConfig(N=7, dt=0.1))) == 4
        assert len(frequency_problems(CqmConfig(N=8, dt=0.1))) == 5

    def test_stage_parameters_in_right_half_plane(self):
        for pr in frequency_problems(CqmConfig(N=16, dt=0.05)):
            assert np.all(pr.s.real > 0)
            np.testing.assert_allclose(pr.E @ np.diag(pr.s) @ pr.Einv,
                                       characteristic_delta(butcher_radau_iia(3), pr.radius * np.exp(
                                           2j * np.pi * pr.index / 16)) / 0.05, rtol=1e-10, atol=1e-9)


class TestWeightedDft:
    @pytest.mark.parametrize("fft", [True, False])
    def test_round_trip(self, fft):
        x = np.random.default_rng(0).random((12, 3))
        X = weighted_dft(x, 0.9, 12, use_fft=fft)
        np.testing.assert_allclose(weighted_dft(X, 0.9, 12, inverse=True, use_fft=fft).real, x, atol=1e-12)

    def test_fft_matches_direct(self):
        x = np.random.default_rng(1).random(9)
        np.testing.assert_allclose(weighted_dft(x, 0.8, 9, use_fft=True), weighted_dft(x, 0.8, 9, use_fft=False),
                                   atol=1e-12)

    def test_padded_length(self):
        x = np.random.default_rng(2).random(5)
        X = weighted_dft(x, 0.7, 8)
        np.testing.assert_allclose(weighted_dft(X, 0.7, 8, inverse=True, n_out=5).real, x, atol=1e-12)


class TestMarch:
    def test_identity(self):
        cfg = CqmConfig(N=20, dt=0.1)
        g = np.sin(cfg.stage_times())
        np.testing.assert_allclose(march(cfg, lambda s, r: r, g), g, atol=1e-6)

    def test_integration_of_polynomial(self):
        cfg = CqmConfig(N=10, dt=0.2, L=20, eps=1e-20)
        t = cfg.stage_times()
        # stages are exact up to degree m - 1, step ends up to 2m - 2
        out = march(cfg, lambda s, r: r / s, t ** 2)
        np.testing.assert_allclose(out, t ** 3 / 3, atol=1e-9)
        out = march(cfg, lambda s, r: r / s, t ** 4)
        np.testing.assert_allclose(out[:, -1], t[:, -1] ** 5 / 5, atol=1e-8)

    def test_half_and_full_spectrum_agree(self):
        cfg = CqmConfig(N=9, dt=0.2)
        g = cfg.stage_times() ** 2
        f = lambda s, r: r / (s + 1.0)  # noqa: E731
        np.testing.assert_allclose(march(cfg, f, g), march(cfg, f, g, full_spectrum=True), atol=1e-12)

    def test_vector_data(self):
        cfg = CqmConfig(N=6, dt=0.25)
        t = cfg.stage_times()
        data = np.stack([t, t ** 2], axis=-1)
        out = march(cfg, lambda s, r: 2.0 * r, data)
        assert out.shape == (6, 3, 2)
        np.testing.assert_allclose(out, 2.0 * data, atol=1e-5)

    def test_fifth_order_at_steps(self):
        T = 2.0
        errs = []
        for N in (8, 16, 32):
            cfg = CqmConfig(N=N, dt=T / N, L=2 * N, eps=1e-20)
            out = march(cfg, lambda s, r: r / (s + 1.0), cfg.stage_times() ** 3)
            errs.append(np.max(np.abs(out[:, -1] - exp_conv_t3(cfg.step_times()))))
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(rates > 4.5)

    def test_shape_mismatch(self):
        with pytest.raises(CqmError):
            march(CqmConfig(N=4, dt=0.1), lambda s, r: r, np.zeros((5, 3)))


def integrate_sin(N, T=10.0, L=None):
    cfg = CqmConfig(N=N, dt=T / N, L=L)
    out = march(cfg, lambda s, r: r / s, np.sin(2.0 * cfg.stage_times()))
    exact = (1.0 - np.cos(2.0 * cfg.step_times())) / 2.0
    return np.max(np.abs(out[:, -1] - exact))


class TestExamples:
    def test_two_stage_tableau(self):
        tab = butcher_radau_iia(2)
        np.testing.assert_allclose(tab.c, [1 / 3, 1.0], atol=1e-15)
        np.testing.assert_allclose(tab.A, [[5 / 12, -1 / 12], [3 / 4, 1 / 4]], atol=1e-15)

    @pytest.mark.parametrize("m", [1, 2, 3, 5])
    def test_last_row_of_inverse(self, m):
        tab = butcher_radau_iia(m)
        e = np.zeros(m)
        e[-1] = 1.0
        np.testing.assert_allclose(tab.b @ np.linalg.inv(tab.A), e, atol=1e-12)

    @pytest.mark.parametrize("m", [1, 2, 3, 5])
    def test_stability_function(self, m):
        tab = butcher_radau_iia(m)
        assert stability_function(tab, 0.0) == pytest.approx(1.0, abs=1e-14)
        # below y ~ 1 the gap 1 - |R(iy)| ~ y^(2m) is under machine precision
        assert abs(stability_function(tab, 0.1j)) <= 1.0
        for y in (1.0, 10.0, 1e3):
            assert abs(stability_function(tab, 1j * y)) < 1.0
        assert abs(stability_function(tab, -1e14)) < 1e-12

    def test_strong_damping(self):
        assert abs(stability_function(butcher_radau_iia(3), -1e6)) < 1e-5

    def test_delta_at_origin(self):
        tab = butcher_radau_iia(3)
        np.testing.assert_allclose(characteristic_delta(tab, 0.0), np.linalg.inv(tab.A), atol=1e-12)

    def test_right_half_plane_small_radius(self):
        for pr in frequency_problems(CqmConfig(N=8, dt=0.1, R=0.85)):
            assert np.all(pr.s.real > 0)

    def test_backward_euler_parameters(self):
        cfg = CqmConfig(N=8, dt=0.25, stages=1, R=0.9)
        probs = frequency_problems(cfg)
        assert len(probs) == 8 // 2 + 1
        for pr in probs:
            ref = (1.0 - 0.9 * np.exp(2j * np.pi * pr.index / 8)) / 0.25
            assert pr.s[0] == pytest.approx(ref, rel=1e-14)


class TestTransformExamples:
    def test_half_spectrum_round_trip(self):
        cfg = CqmConfig(N=16, dt=0.1, L=16, R=0.85)
        g = np.random.default_rng(3).standard_normal((16, 3))
        np.testing.assert_allclose(march(cfg, lambda s, r: r, g), g, atol=1e-10)

    def test_constant_signal(self):
        R = 0.85
        X = weighted_dft(np.ones(16), R, 16)
        assert X[0].real == pytest.approx((1 - R ** 16) / (1 - R), rel=1e-14)


class TestMarchExamples:
    def test_zero_data(self):
        cfg = CqmConfig(N=12, dt=0.1)
        out = march(cfg, lambda s, r: r / (s + 1.0), np.zeros((12, 3)))
        assert np.max(np.abs(out)) < 1e-13

    @staticmethod
    def masked_change(L_factor):
        N = 16
        cfg = CqmConfig(N=N, dt=0.2, L=L_factor * N)
        t = cfg.stage_times()
        g = np.sin(t)
        h = g.copy()
        h[8:] += np.cos(3.0 * t[8:])
        f = lambda s, r: r / (s + 1.0)  # noqa: E731
        return np.max(np.abs(march(cfg, f, h)[:8] - march(cfg, f, g)[:8])), cfg.radius ** N

    def test_causality(self):
        change, _ = self.masked_change(2)
        assert change < 1e-10

    def test_causality_leak_with_minimal_contour(self):
        # with L = N the periodic transform aliases late data at size R^N
        change, alias = self.masked_change(1)
        assert alias / 100 < change < 100 * alias

    def test_linearity(self):
        cfg = CqmConfig(N=10, dt=0.2)
        t = cfg.stage_times()
        f = lambda s, r: r / (s * s + 1.0)  # noqa: E731
        a, b = np.sin(t), t ** 2
        np.testing.assert_allclose(march(cfg, f, 2.0 * a - 3.0 * b),
                                   2.0 * march(cfg, f, a) - 3.0 * march(cfg, f, b), atol=1e-11)

    def test_exact_integration_sits_at_floor(self):
        for N in (8, 16, 32, 64):
            cfg = CqmConfig(N=N, dt=10.0 / N)
            t = cfg.stage_times()
            out = march(cfg, lambda s, r: r / s, t ** 2)
            assert np.max(np.abs(out[:, -1] - t[:, -1] ** 3 / 3)) < 1e-6 * 1000.0 / 3.0

    def test_integrator_rate(self):
        q = butcher_radau_iia(3).order
        errs = [integrate_sin(N) for N in (8, 16, 32, 64)]
        rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert rates[0] >= q and rates[1] >= q
        assert rates[-1] >= 3.5
        errs2 = [integrate_sin(N, L=2 * N) for N in (8, 16, 32, 64)]
        rates2 = np.log2(np.array(errs2[:-1]) / np.array(errs2[1:]))
        assert np.all(rates2 >= q - 0.05)
