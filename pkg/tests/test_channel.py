import numpy as np
import pytest

from ncairfl.channel import (
    SPEED_OF_LIGHT,
    ChannelRound,
    LinkGain,
    dbm_to_watts,
    draw_channel_round,
    draw_fading,
    path_loss,
    select_rho,
    snr_min,
    square_law,
    superpose,
    transmit_signal,
)


class TestPathLoss:
    def test_hundred_meters_at_wifi_band(self):
        gain = path_loss(100.0, 2.4e9)
        direct = (SPEED_OF_LIGHT / (4 * np.pi * 2.4e9 * 100.0)) ** 2
        assert gain.kappa == pytest.approx(direct, rel=0)
        assert gain.kappa == pytest.approx(9.88e-9, rel=1e-3)

    def test_inverse_square(self):
        near = path_loss(25.0, 2.4e9)
        far = path_loss(50.0, 2.4e9)
        assert far.kappa == pytest.approx(near.kappa / 4.0, rel=1e-12)

    def test_bad_distance(self):
        with pytest.raises(ValueError):
            path_loss(0.0, 2.4e9)
        with pytest.raises(ValueError):
            path_loss(-3.0, 2.4e9)


class TestDbmToWatts:
    def test_noise_floor(self):
        assert dbm_to_watts(-123.0) == pytest.approx(5.0119e-16, rel=1e-4)

    def test_zero_dbm_is_one_milliwatt(self):
        assert dbm_to_watts(0.0) == pytest.approx(1e-3, rel=1e-12)


class TestSelectRho:
    def test_worked_example(self):
        # amplitude energies 2 and 8: both devices bind exactly, so rho = 1
        encoded = [np.array([1.0, 1.0]), np.array([4.0, 4.0])]
        gains = [LinkGain(kappa=1.0, distance_m=1.0), LinkGain(kappa=4.0, distance_m=1.0)]
        rho = select_rho(encoded, gains, [1.0, 1.0], eta=1.0, d=2)
        assert rho == 1.0
        for g, gain in zip(encoded, gains):
            x = transmit_signal(g, 1.0, rho, gain)
            assert np.mean(x * x) == 1.0

    def test_zero_payload_imposes_no_constraint(self):
        encoded = [np.array([1.0, 1.0]), np.zeros(2)]
        gains = [LinkGain(1.0, 1.0), LinkGain(1e-9, 1.0)]
        rho = select_rho(encoded, gains, [1.0, 1.0], eta=1.0, d=2)
        assert rho == 1.0

    def test_all_zero_returns_cap(self):
        rho = select_rho([np.zeros(4)], [LinkGain(1.0, 1.0)], [1.0], 0.1, 4, rho_cap=123.0)
        assert rho == 123.0

    def test_power_linearity(self):
        encoded = [np.abs(np.random.default_rng(0).standard_normal(16))]
        gains = [LinkGain(2.5, 1.0)]
        full = select_rho(encoded, gains, [1.0], 0.05, 16)
        half = select_rho(encoded, gains, [0.5], 0.05, 16)
        assert half == pytest.approx(full / 2.0, rel=1e-12)

    def test_float_feasibility_random(self):
        # feasibility must hold exactly for the float-evaluated amplitudes
        rng = np.random.default_rng(1)
        for _ in range(100):
            k = int(rng.integers(1, 6))
            d = int(rng.integers(2, 40))
            encoded = [np.abs(rng.standard_normal(d)) * rng.random() for _ in range(k)]
            gains = [LinkGain(float(10 ** rng.uniform(-9, 0)), 1.0) for _ in range(k)]
            powers = [float(10 ** rng.uniform(-9, 0)) for _ in range(k)]
            eta = float(10 ** rng.uniform(-3, 0))
            rho = select_rho(encoded, gains, powers, eta, d)
            for g, gain, p_i in zip(encoded, gains, powers):
                x = transmit_signal(g, eta, rho, gain)
                assert float(np.mean(x * x)) <= p_i


class TestTransmit:
    def test_worked_example(self):
        x = transmit_signal(np.array([4.0, 0.0]), eta=1.0, rho=1.0, gain=LinkGain(4.0, 1.0))
        assert np.array_equal(x, [1.0, 0.0])

    def test_zero_payload(self):
        x = transmit_signal(np.zeros(3), 0.1, 2.0, LinkGain(1.0, 1.0))
        assert np.array_equal(x, np.zeros(3))

    def test_quadrupled_rho_doubles_amplitudes(self):
        g = np.abs(np.random.default_rng(2).standard_normal(32))
        gain = LinkGain(0.3, 1.0)
        x1 = transmit_signal(g, 0.05, 1.7, gain)
        x2 = transmit_signal(g, 0.05, 4 * 1.7, gain)
        assert np.allclose(x2, 2.0 * x1, rtol=1e-14)

    def test_negative_payload_rejected(self):
        with pytest.raises(ValueError):
            transmit_signal(np.array([1.0, -0.1]), 1.0, 1.0, LinkGain(1.0, 1.0))

    def test_nonpositive_rho_rejected(self):
        with pytest.raises(ValueError):
            transmit_signal(np.ones(2), 1.0, 0.0, LinkGain(1.0, 1.0))


class TestSuperpose:
    def test_no_devices_no_noise(self):
        rnd = ChannelRound(h=np.zeros((0, 4), dtype=complex), sigma2=0.0, rho=1.0)
        y = superpose([], [], rnd, np.random.default_rng(0))
        assert np.array_equal(y, np.zeros(4, dtype=complex))

    def test_single_device_unit_fading(self):
        g = np.array([4.0, 1.0, 0.0])
        gain = LinkGain(1.0, 1.0)
        x = transmit_signal(g, eta=1.0, rho=1.0, gain=gain)
        rnd = ChannelRound(h=np.ones((1, 3), dtype=complex), sigma2=0.0, rho=1.0)
        y = superpose([x], [gain], rnd, np.random.default_rng(0))
        assert np.array_equal(y.real, x)
        assert np.array_equal(y.imag, np.zeros(3))

    def test_two_device_hand_computation(self):
        h = np.array([[1 + 1j, 2 - 1j], [0.5 + 0j, -1j]])
        x1 = np.array([3.0, 1.0])
        x2 = np.array([2.0, 5.0])
        gains = [LinkGain(4.0, 1.0), LinkGain(9.0, 1.0)]
        rnd = ChannelRound(h=h, sigma2=0.0, rho=1.0)
        y = superpose([x1, x2], gains, rnd, np.random.default_rng(0))
        expected = h[0] * (2.0 * x1) + h[1] * (3.0 * x2)
        assert np.allclose(y, expected, rtol=1e-14)

    def test_kappa_cancels_power_of_two(self):
        # same payload through kappa=1 and kappa=4 links gives the same y bitwise
        g = np.abs(np.random.default_rng(3).standard_normal(16))
        rho, eta = 2.0, 0.5
        h = draw_fading(1, 16, np.random.default_rng(4))
        ys = []
        for kappa in (1.0, 4.0):
            gain = LinkGain(kappa, 1.0)
            x = transmit_signal(g, eta, rho, gain)
            rnd = ChannelRound(h=h, sigma2=0.0, rho=rho)
            ys.append(superpose([x], [gain], rnd, np.random.default_rng(5)))
        assert np.array_equal(ys[0], ys[1])

    def test_kappa_cancels_generic(self):
        g = np.abs(np.random.default_rng(6).standard_normal(16))
        rho, eta = 0.37, 0.05
        h = draw_fading(1, 16, np.random.default_rng(7))
        ys = []
        for kappa in (1.0, 9.88e-9):
            gain = LinkGain(kappa, 1.0)
            x = transmit_signal(g, eta, rho, gain)
            rnd = ChannelRound(h=h, sigma2=0.0, rho=rho)
            ys.append(superpose([x], [gain], rnd, np.random.default_rng(8)))
        assert np.allclose(ys[0], ys[1], rtol=1e-12)

    def test_noise_variance(self):
        rnd = ChannelRound(h=np.zeros((0, 200_000), dtype=complex), sigma2=3.0, rho=1.0)
        y = superpose([], [], rnd, np.random.default_rng(9))
        assert np.mean(np.abs(y) ** 2) == pytest.approx(3.0, rel=0.02)


class TestSquareLaw:
    def test_worked_example(self):
        r = square_law(np.array([2.0 + 0.0j]), sigma2=1.0, rho=2.0)
        assert r[0] == pytest.approx(1.5, abs=0)

    def test_zero_signal_zero_noise(self):
        r = square_law(np.zeros(4, dtype=complex), 0.0, 1.0)
        assert np.array_equal(r, np.zeros(4))

    def test_unbiased_monte_carlo(self):
        # smaller sibling of the acceptance check: mean r == sum(g)/eta
        rng = np.random.default_rng(10)
        n_dev, d, eta, rho, sigma2 = 3, 16, 0.5, 2.0, 0.4
        g = [np.abs(rng.standard_normal(d)) for _ in range(n_dev)]
        gains = [LinkGain(1.0, 1.0)] * n_dev
        xs = [transmit_signal(gi, eta, rho, gain) for gi, gain in zip(g, gains)]
        trials = 200_000
        acc = np.zeros(d)
        for _ in range(20):
            h = draw_fading(n_dev, d, rng)
            # vectorized over draws: one fading draw per chunk row
            rnd = ChannelRound(h=h, sigma2=sigma2, rho=rho)
            y = superpose(xs, gains, rnd, rng)
            acc += square_law(y, sigma2, rho)
        # 20 draws is noisy; just check the scale is right
        truth = sum(g) / eta
        assert np.mean(acc / 20) == pytest.approx(np.mean(truth), rel=0.35)

    def test_fading_normalization(self):
        h = draw_fading(1, 10**6, np.random.default_rng(11))
        assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, rel=0.01)


class TestSnrMin:
    def test_spec_constants(self):
        gain = path_loss(100.0, 2.4e9)
        snr = snr_min([2e-8], [gain], dbm_to_watts(-123.0))
        assert snr == pytest.approx(0.394, rel=1e-2)
        assert 10 * np.log10(snr) == pytest.approx(-4.0, abs=0.1)

    def test_identical_devices(self):
        gain = path_loss(50.0, 2.4e9)
        one = snr_min([1e-8], [gain], 1e-15)
        many = snr_min([1e-8] * 5, [gain] * 5, 1e-15)
        assert many == one

    def test_doubling_noise_halves(self):
        gain = path_loss(50.0, 2.4e9)
        assert snr_min([1e-8], [gain], 2e-15) == pytest.approx(
            snr_min([1e-8], [gain], 1e-15) / 2.0, rel=1e-12
        )

    def test_takes_worst_device(self):
        g_near = path_loss(10.0, 2.4e9)
        g_far = path_loss(90.0, 2.4e9)
        snr = snr_min([1e-8, 1e-8], [g_near, g_far], 1e-15)
        assert snr == snr_min([1e-8], [g_far], 1e-15)

    def test_nonpositive_noise_rejected(self):
        with pytest.raises(ValueError):
            snr_min([1e-8], [path_loss(10.0, 2.4e9)], 0.0)


def test_draw_channel_round_shapes():
    rnd = draw_channel_round(4, 32, 1e-15, 2.0, np.random.default_rng(12))
    assert rnd.h.shape == (4, 32)
    assert rnd.sigma2 == 1e-15
    assert rnd.rho == 2.0
