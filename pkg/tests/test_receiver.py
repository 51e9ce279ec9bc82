"""Non-iterative / iterative receiver chain and noise estimation tests."""

import numpy as np
import pytest

from jcesd.channel import (ChannelParams, correlation_for, correlation_matrices,
                           slot_seed, synthesize_slot)
from jcesd.grid import HALF_SQRT2, PilotPattern
from jcesd.receiver import (DegenerateChannelError, ReceiverConfig,
                            estimate_noise_variance, extrapolate_first_symbol,
                            ls_full, ls_pilot_estimate, mmse_detect,
                            run_iterative, run_noniterative,
                            wiener_filter_matrix, wiener_freq,
                            wiener_interp_pilots, wiener_time)

R = HALF_SQRT2
PILOTS = PilotPattern(24)


def _setup(doppler=90.0, delay=100e-9):
    params = ChannelParams(doppler_hz=doppler, delay_spread_s=delay)
    spec = correlation_for(params)
    r_f, r_s = correlation_matrices(spec)
    return params, r_f, r_s


# ---------------------------------------------------------------- pilot LS

def test_ls_pilot_unit_modulus_division():
    y = np.zeros((4, 2, 4), dtype=complex)
    y[0, 0, 0] = 1 + 1j
    pilots = PilotPattern(4)
    x_pilot = np.array([R * (1 + 1j), R * (1 + 1j)])
    h = ls_pilot_estimate(y, pilots, x_pilot)
    assert h[0, 0] == pytest.approx(np.sqrt(2), abs=1e-12)
    assert np.allclose(h[0, 1:], 0) and np.allclose(h[1], 0)


def test_ls_pilot_noiseless_recovers_truth():
    slot = synthesize_slot(ChannelParams(), np.inf, seed=2)
    x_pilot = slot.x[PILOTS.subcarrier_indices, 0]
    h = ls_pilot_estimate(slot.y, PILOTS, x_pilot)
    assert np.allclose(h, slot.h[PILOTS.subcarrier_indices, 0, :], atol=1e-12)


def test_ls_pilot_division_identity():
    x = R * (1 - 1j)
    pilots = PilotPattern(2)
    y = np.zeros((2, 1, 4), dtype=complex)
    y[0, 0, :] = x
    h = ls_pilot_estimate(y, pilots, np.array([x]))
    assert np.allclose(h[0], 1.0)


def test_ls_pilot_rejects_non_unit_pilots():
    y = np.zeros((4, 1, 2), dtype=complex)
    with pytest.raises(ValueError, match="unit modulus"):
        ls_pilot_estimate(y, PilotPattern(4), np.array([0.5, 1.0]))


# ---------------------------------------------------------------- interpolation

def test_interp_identity_correlation_selects_pilot_rows():
    h_ls = np.arange(12, dtype=complex).reshape(12, 1) + 1j
    out = wiener_interp_pilots(h_ls, np.eye(24), 0.0)
    assert np.allclose(out[::2], h_ls)
    assert np.allclose(out[1::2], 0.0)


def test_interp_rank_one_correlation_extends_constant():
    r_f = np.ones((24, 24))
    h_ls = np.full((12, 3), 2.0 - 1.0j)
    out = wiener_interp_pilots(h_ls, r_f, 0.0)
    assert np.allclose(out, 2.0 - 1.0j, atol=1e-10)


def test_interp_infinite_noise_shrinks_to_zero():
    _, r_f, _ = _setup()
    h_ls = np.ones((12, 4), dtype=complex)
    out = wiener_interp_pilots(h_ls, r_f, 1e12)
    assert np.abs(out).max() < 1e-9


def test_extrapolate_copies_columns():
    h_col = np.random.default_rng(0).normal(size=(24, 4)) * (1 + 1j)
    grid = extrapolate_first_symbol(h_col, 12)
    assert grid.shape == (24, 12, 4)
    for s in range(12):
        assert np.array_equal(grid[:, s, :], h_col)
    assert np.array_equal(extrapolate_first_symbol(np.zeros((4, 2)), 3), np.zeros((4, 3, 2)))


# ---------------------------------------------------------------- MMSE

def test_mmse_noiseless_perfect_csi_inverts():
    slot = synthesize_slot(ChannelParams(), np.inf, seed=6)
    x = mmse_detect(slot.h, slot.y, 0.0)
    assert np.allclose(x, slot.x, atol=1e-10)


def test_mmse_shrinkage_factor():
    h = np.zeros((1, 1, 4), dtype=complex)
    h[0, 0, 0] = 1.0
    x_true = R * (1 + 1j)
    y = h * x_true
    assert mmse_detect(h, y, 1.0)[0, 0] == pytest.approx(x_true / 2, abs=1e-14)


def test_mmse_orthogonal_channel_gives_zero():
    h = np.zeros((1, 1, 2), dtype=complex)
    h[0, 0, 0] = 1.0
    y = np.zeros((1, 1, 2), dtype=complex)
    y[0, 0, 1] = 5.0 - 2.0j
    assert mmse_detect(h, y, 0.0)[0, 0] == 0.0


def test_mmse_degenerate_cell_raises():
    with pytest.raises(DegenerateChannelError):
        mmse_detect(np.zeros((1, 1, 2)), np.zeros((1, 1, 2)), 0.0)


# ---------------------------------------------------------------- full-grid LS

def test_ls_full_recovers_truth_noiseless():
    slot = synthesize_slot(ChannelParams(), np.inf, seed=8)
    assert np.allclose(ls_full(slot.y, slot.x), slot.h, atol=1e-12)


def test_ls_full_sign_flip_propagates():
    slot = synthesize_slot(ChannelParams(), np.inf, seed=9)
    x = slot.x.copy()
    x[3, 4] = -x[3, 4]
    h = ls_full(slot.y, x)
    assert np.allclose(h[3, 4], -slot.h[3, 4], atol=1e-12)


def test_ls_full_linear_in_y():
    slot = synthesize_slot(ChannelParams(), np.inf, seed=10)
    assert np.allclose(ls_full(2 * slot.y, slot.x), 2 * ls_full(slot.y, slot.x))


# ---------------------------------------------------------------- Wiener filters

def test_wiener_freq_zero_noise_full_rank_identity():
    params = ChannelParams(delay_spread_s=2e-6)  # well-conditioned, full rank
    r_f = correlation_matrices(correlation_for(params))[0]
    h = np.random.default_rng(1).normal(size=(24, 12, 4)) * (1 + 0.5j)
    assert np.allclose(wiener_freq(h, r_f, 0.0), h, atol=1e-8)


def test_wiener_freq_identity_correlation_scales():
    h = np.ones((8, 3, 2), dtype=complex)
    out = wiener_freq(h, np.eye(8), 0.5)
    assert np.allclose(out, h / 1.5)


def test_wiener_time_identity_correlation_scales():
    h = np.ones((8, 6, 2), dtype=complex)
    out = wiener_time(h, np.eye(6), 0.25)
    assert np.allclose(out, h / 1.25)


def test_wiener_infinite_noise_kills_everything():
    _, r_f, r_s = _setup()
    h = np.ones((24, 12, 4), dtype=complex)
    assert np.abs(wiener_freq(h, r_f, 1e12)).max() < 1e-9
    assert np.abs(wiener_time(h, r_s, 1e12)).max() < 1e-9


def test_wiener_commutes_with_antenna_permutation():
    _, r_f, r_s = _setup()
    h = (np.random.default_rng(3).normal(size=(24, 12, 4))
         + 1j * np.random.default_rng(4).normal(size=(24, 12, 4)))
    perm = [2, 0, 3, 1]
    a = wiener_time(wiener_freq(h, r_f, 0.1), r_s, 0.1)[:, :, perm]
    b = wiener_time(wiener_freq(h[:, :, perm], r_f, 0.1), r_s, 0.1)
    assert np.allclose(a, b)


@pytest.mark.parametrize("sigma2", [0.0, 1e-4, 0.1, 1.0, 100.0])
def test_wiener_matrices_are_contractions(sigma2):
    _, r_f, r_s = _setup(doppler=250.0, delay=400e-9)
    for r in (r_f, r_s):
        w = wiener_filter_matrix(r, sigma2)
        assert np.linalg.svd(w, compute_uv=False).max() <= 1 + 1e-10


# ---------------------------------------------------------------- end to end

def test_noniterative_noiseless_static_zero_errors():
    params, r_f, r_s = _setup(doppler=0.0)
    cfg = ReceiverConfig(R_f=r_f, R_s=r_s)
    slot = synthesize_slot(params, np.inf, seed=7)
    x_pilot = slot.x[PILOTS.subcarrier_indices, 0]
    out = run_noniterative(slot.y, PILOTS, x_pilot, cfg, slot.sigma2)
    assert np.array_equal(out.bits_hard, slot.bits)


def test_noniterative_extrapolation_error_grows_with_symbol():
    # fast channel: symbol-0 decisions stay clean, late columns degrade
    params, r_f, r_s = _setup(doppler=600.0)
    cfg = ReceiverConfig(R_f=r_f, R_s=r_s)
    early = late = 0
    for i in range(25):
        slot = synthesize_slot(params, 30.0, seed=slot_seed(42, i))
        x_pilot = slot.x[PILOTS.subcarrier_indices, 0]
        out = run_noniterative(slot.y, PILOTS, x_pilot, cfg, slot.sigma2)
        wrong = np.any(out.bits_hard != slot.bits, axis=2)
        early += int(wrong[1::2, 0].sum())      # symbol 0, data subcarriers only
        late += int(wrong[:, -1].sum())
    assert late > early


def test_iterative_zero_iterations_equals_noniterative():
    params, r_f, r_s = _setup()
    slot = synthesize_slot(params, 10.0, seed=12)
    x_pilot = slot.x[PILOTS.subcarrier_indices, 0]
    base = ReceiverConfig(R_f=r_f, R_s=r_s, iterations=0)
    a = run_iterative(slot.y, PILOTS, x_pilot, base, slot.sigma2)
    b = run_noniterative(slot.y, PILOTS, x_pilot, base, slot.sigma2)
    assert np.array_equal(a.bits_hard, b.bits_hard)
    assert np.array_equal(a.h_est, b.h_est)
    assert np.array_equal(a.x_soft, b.x_soft)


def test_iterative_noiseless_static_fixed_point():
    params, r_f, r_s = _setup(doppler=0.0)
    slot = synthesize_slot(params, np.inf, seed=13)
    x_pilot = slot.x[PILOTS.subcarrier_indices, 0]
    h1 = run_iterative(slot.y, PILOTS, x_pilot,
                       ReceiverConfig(R_f=r_f, R_s=r_s, iterations=1), 0.0).h_est
    h2 = run_iterative(slot.y, PILOTS, x_pilot,
                       ReceiverConfig(R_f=r_f, R_s=r_s, iterations=2), 0.0).h_est
    assert np.abs(h1 - h2).max() < 1e-10


def test_iterative_beats_noniterative_at_high_snr_time_varying():
    from jcesd.bench import channel_mse

    params, r_f, r_s = _setup(doppler=150.0)
    cfg = ReceiverConfig(R_f=r_f, R_s=r_s, iterations=6)
    mse_n = mse_i = 0.0
    n = 200
    for i in range(n):
        slot = synthesize_slot(params, 20.0, seed=slot_seed(1001, i))
        x_pilot = slot.x[PILOTS.subcarrier_indices, 0]
        mse_n += channel_mse(run_noniterative(slot.y, PILOTS, x_pilot, cfg, slot.sigma2).h_est, slot.h)
        mse_i += channel_mse(run_iterative(slot.y, PILOTS, x_pilot, cfg, slot.sigma2).h_est, slot.h)
    assert mse_i / n < mse_n / n


# ---------------------------------------------------------------- noise estimation

def test_noise_estimate_noiseless_converges_to_floor():
    params, r_f, _ = _setup()
    slot = synthesize_slot(params, np.inf, seed=3)
    x_pilot = slot.x[PILOTS.subcarrier_indices, 0]
    est = estimate_noise_variance(slot.y, PILOTS, x_pilot, r_f, iters=10)
    assert est < 1e-3


def test_noise_estimate_tracks_true_sigma2():
    params, r_f, _ = _setup()
    ests = []
    for i in range(100):
        slot = synthesize_slot(params, 10.0, seed=slot_seed(21, i))
        x_pilot = slot.x[PILOTS.subcarrier_indices, 0]
        ests.append(estimate_noise_variance(slot.y, PILOTS, x_pilot, r_f))
    assert abs(np.mean(ests) - 0.1) / 0.1 < 0.3


def test_noise_estimate_pilot_order_invariance():
    # the residual sum cannot depend on how pilot subcarriers are enumerated:
    # relabel them via a symmetric permutation of y, R_f and the pilot values
    params, r_f, _ = _setup()
    slot = synthesize_slot(params, 5.0, seed=31)
    x_pilot = slot.x[PILOTS.subcarrier_indices, 0]
    base = estimate_noise_variance(slot.y, PILOTS, x_pilot, r_f)

    perm_pairs = np.random.default_rng(0).permutation(12)
    full_perm = np.empty(24, dtype=int)
    full_perm[0::2] = 2 * perm_pairs
    full_perm[1::2] = 2 * perm_pairs + 1
    y_perm = slot.y[full_perm]
    r_perm = r_f[np.ix_(full_perm, full_perm)]
    x_perm = x_pilot[perm_pairs]
    permuted = estimate_noise_variance(y_perm, PILOTS, x_perm, r_perm)
    assert permuted == pytest.approx(base, rel=1e-9)


def test_noise_estimate_generalized_normalization():
    params, r_f, _ = _setup()
    ests = []
    for i in range(60):
        slot = synthesize_slot(params, 10.0, seed=slot_seed(22, i))
        x_pilot = slot.x[PILOTS.subcarrier_indices, 0]
        ests.append(estimate_noise_variance(slot.y, PILOTS, x_pilot, r_f,
                                            normalization="per_sample"))
    # for Nr = 4 the per-sample normalization coincides with the 1/(2F) one
    assert abs(np.mean(ests) - 0.1) / 0.1 < 0.3


def test_estimated_mode_end_to_end():
    params, r_f, r_s = _setup()
    cfg = ReceiverConfig(R_f=r_f, R_s=r_s, noise_mode="estimated")
    slot = synthesize_slot(params, 10.0, seed=14)
    x_pilot = slot.x[PILOTS.subcarrier_indices, 0]
    out = run_iterative(slot.y, PILOTS, x_pilot, cfg)
    assert 0.01 < out.sigma2_used < 1.0


def test_receiver_config_validation():
    _, r_f, r_s = _setup()
    with pytest.raises(ValueError):
        ReceiverConfig(R_f=r_f, R_s=r_s, iterations=65)
    with pytest.raises(ValueError):
        ReceiverConfig(R_f=r_f, R_s=r_s, noise_mode="psychic")
    with pytest.raises(ValueError):
        ReceiverConfig(R_f=r_f, R_s=r_s, sigma2_init=0.0)
