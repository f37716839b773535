import numpy as np
import pytest

from v2xlink.dsp import CRC16, ComplexWaveform, ResourceGrid, add_awgn, bits_to_int, crc_compute, dft, \
    map_symbols
from v2xlink.cv2x import (
    QPSK_HALF,
    QPSK_THREEQUARTER,
    SciFormat1,
    SidelinkAllocation,
    channel_estimate_dmrs,
    dmrs_generate,
    estimate_cfo,
    pscch_blind_decode,
    pscch_build,
    pssch_build,
    receive_subframe,
    riv_decode,
    riv_encode,
    scfdma_demodulate,
    scfdma_modulate,
    sci_encode,
    scramble,
    slsch_encode,
    transmit_subframe,
    zadoff_chu,
)
from v2xlink.cv2x.params import (
    CYCLIC_SHIFTS,
    DMRS_SYMBOLS,
    NUM_SUBCARRIERS,
    PSCCH_CAPACITY,
    PSCCH_DATA_SYMBOLS,
    PSSCH_DATA_SYMBOLS,
    SAMPLE_RATE_HZ,
    SCI_BITS,
    SCI_FIELDS,
    SUBCARRIER_BINS,
    SUBFRAME_SAMPLES,
    ZEROED_SYMBOL,
    pssch_c_init,
)
from v2xlink.cv2x.receiver import decode_sci_llrs
from v2xlink.fec import channel_interleave

ALLOC_HALF = SidelinkAllocation.adjacent(QPSK_HALF.n_prb)


def random_tb(mcs, rng):
    return rng.integers(0, 2, mcs.tbs_bits).astype(np.int8)


# ------------------------------------------------------------------- layout

def test_subframe_is_one_millisecond():
    assert SUBFRAME_SAMPLES == 15360
    assert SUBFRAME_SAMPLES / SAMPLE_RATE_HZ == pytest.approx(1e-3)


def test_symbol_budget():
    assert len(DMRS_SYMBOLS) + len(PSSCH_DATA_SYMBOLS) + 1 == 14
    assert PSCCH_CAPACITY == 2 * 12 * 10 * 2 == 480


def test_sidelink_configurations():
    assert (QPSK_HALF.index, QPSK_HALF.tbs_bits, QPSK_HALF.n_prb, QPSK_HALF.effective_coding_rate) == \
        (7, 2472, 20, 0.515)
    assert (QPSK_THREEQUARTER.index, QPSK_THREEQUARTER.tbs_bits, QPSK_THREEQUARTER.n_prb,
            QPSK_THREEQUARTER.effective_coding_rate) == (10, 2664, 15, 0.74)


def test_allocation_validation():
    with pytest.raises(ValueError):
        SidelinkAllocation((0, 1), (1, 2, 3))
    with pytest.raises(ValueError):
        SidelinkAllocation((0, 2), (3, 4))
    with pytest.raises(ValueError):
        SidelinkAllocation((0, 1), (45, 46, 47, 48, 49, 50))
    a = SidelinkAllocation.adjacent(20)
    assert a.pssch_prbs == tuple(range(2, 22))
    assert a.pssch_subcarriers.size == 240


# ---------------------------------------------------------------------- SCI

def test_sci_field_widths():
    assert sum(w for _, w in SCI_FIELDS) == SCI_BITS == 32


def test_riv_hand_values():
    # length - 1 <= 25 branch: 50 * 19 + 2; other branch: 50 * (50 - 40 + 1) + (49 - 5)
    assert riv_encode(2, 20) == 952
    assert riv_encode(5, 40) == 594


def test_riv_round_trip():
    for length in range(1, 51):
        for start in range(0, 51 - length):
            assert riv_decode(riv_encode(start, length)) == (start, length)


def test_sci_pack_round_trip_and_validation():
    sci = SciFormat1(10, riv_encode(2, 15), time_gap=3, retx_index=2)
    bits = sci.pack()
    assert bits.size == 32
    assert bits_to_int(bits[:5]) == 10
    assert SciFormat1.unpack(bits) == sci
    assert sci.pssch_prbs() == tuple(range(2, 17))
    with pytest.raises(ValueError):
        SciFormat1(7, 0, retx_index=1)
    with pytest.raises(ValueError):
        SciFormat1(21, 0)


def test_sci_encode_nxid_is_crc_value():
    sci = SciFormat1(7, riv_encode(2, 20))
    cw = sci_encode(sci)
    assert cw.bits.size == PSCCH_CAPACITY
    assert cw.nxid == bits_to_int(crc_compute(sci.pack(), CRC16))
    assert 0 <= cw.nxid <= 65535


def test_sci_decode_round_trip():
    rng = np.random.default_rng(0)
    for _ in range(20):
        sci = SciFormat1(int(rng.integers(0, 21)), int(rng.integers(0, 1275)), int(rng.integers(0, 16)),
                         int(rng.choice([0, 2])))
        cw = sci_encode(sci)
        tx = scramble(channel_interleave(cw.bits, 2, len(PSCCH_DATA_SYMBOLS)), 510)
        out = decode_sci_llrs(10.0 * (1 - 2 * tx.astype(float)))
        assert out == (sci, cw.nxid)


def test_scrambling_is_an_involution():
    bits = np.random.default_rng(1).integers(0, 2, 1000)
    np.testing.assert_array_equal(scramble(scramble(bits, 12345), 12345), bits)


def test_different_nxid_scrambles_differently():
    bits = np.zeros(1000, dtype=np.int8)
    a = scramble(bits, pssch_c_init(100))
    b = scramble(bits, pssch_c_init(101))
    assert np.count_nonzero(a != b) > 400


# -------------------------------------------------------------------- grids

def test_pscch_grid():
    bits = sci_encode(SciFormat1(7, 952)).bits
    g0 = pscch_build(bits, 0)
    g3 = pscch_build(bits, 3)
    assert g0.shape == (24, 14)
    assert np.count_nonzero(g0[:, [s for s in PSCCH_DATA_SYMBOLS if s != ZEROED_SYMBOL]]) == 24 * 9
    assert not g0[:, ZEROED_SYMBOL].any()
    assert not np.allclose(g0, g3)
    np.testing.assert_allclose(np.abs(g0), np.abs(g3), atol=1e-12)
    with pytest.raises(ValueError):
        pscch_build(bits, 2)


def test_pscch_symbol_count():
    # 480 coded bits become 240 QPSK symbols over 10 symbols of 24 subcarriers
    assert PSCCH_CAPACITY // 2 == 240 == 24 * len(PSCCH_DATA_SYMBOLS)


def test_slsch_codeword_lengths():
    rng = np.random.default_rng(2)
    assert slsch_encode(random_tb(QPSK_HALF, rng), QPSK_HALF).size == 4320
    assert slsch_encode(random_tb(QPSK_THREEQUARTER, rng), QPSK_THREEQUARTER).size == 3240
    with pytest.raises(ValueError):
        slsch_encode(np.zeros(100), QPSK_HALF)


def test_pssch_grid_power_and_zeroed_symbol():
    rng = np.random.default_rng(3)
    cells = pssch_build(slsch_encode(random_tb(QPSK_HALF, rng), QPSK_HALF), 777, QPSK_HALF)
    data = cells[:, [s for s in PSSCH_DATA_SYMBOLS]]
    assert abs(np.mean(np.abs(data) ** 2) - 1) < 0.05
    assert not cells[:, ZEROED_SYMBOL].any()


def test_scfdma_round_trip():
    rng = np.random.default_rng(4)
    cells = rng.standard_normal((600, 14)) + 1j * rng.standard_normal((600, 14))
    w = scfdma_modulate(ResourceGrid(cells))
    assert w.samples.size == SUBFRAME_SAMPLES
    np.testing.assert_allclose(scfdma_demodulate(w).cells, cells, atol=1e-10)


def test_single_subcarrier_is_a_sinusoid():
    cells = np.zeros((600, 14), dtype=complex)
    cells[310, 0] = 1.0
    x = scfdma_modulate(ResourceGrid(cells)).samples[80:80 + 1024]
    k = SUBCARRIER_BINS[310]
    ratio = x[1:] / x[:-1]
    np.testing.assert_allclose(ratio, np.exp(2j * np.pi * k / 1024), atol=1e-10)
    np.testing.assert_allclose(np.abs(x), np.abs(x[0]), atol=1e-12)


# --------------------------------------------------------------------- DMRS

def test_dmrs_constant_amplitude_and_cover():
    for n in (24, 180, 240):
        for cs in range(12):
            p = dmrs_generate(n, cs)
            np.testing.assert_allclose(np.abs(p), 1.0, atol=1e-12)
        odd = dmrs_generate(n, 0, odd_cover=True)
        np.testing.assert_allclose(odd[:, 1], -odd[:, 0])
        np.testing.assert_allclose(odd[:, 2], odd[:, 0])
    np.testing.assert_array_equal(dmrs_generate(240, 3), dmrs_generate(240, 3))


@pytest.mark.parametrize("n", [24, 180, 240])
def test_zadoff_chu_has_ideal_cyclic_autocorrelation(n):
    z = zadoff_chu(n)
    acf = np.array([np.vdot(z, np.roll(z, s)) for s in range(n)])
    assert abs(acf[0]) == pytest.approx(n)
    assert np.max(np.abs(acf[1:])) < 1e-9


# -------------------------------------------------------- channel estimation

def test_flat_channel_estimate():
    pilots = dmrs_generate(240, 0)
    cells = np.zeros((240, 14), dtype=complex)
    cells[:, DMRS_SYMBOLS] = pilots
    est = channel_estimate_dmrs(cells, pilots)
    np.testing.assert_allclose(est.coefficients, 1.0, atol=1e-6)


def test_delay_gives_matching_phase_slope():
    pilots = dmrs_generate(240, 0)
    k = np.arange(240)
    h = np.exp(-2j * np.pi * k / 1024)  # one-sample delay at the 1024-point grid
    cells = np.zeros((240, 14), dtype=complex)
    cells[:, DMRS_SYMBOLS] = h[:, None] * pilots
    est = channel_estimate_dmrs(cells, pilots)
    slope = np.polyfit(k[10:-10], np.unwrap(np.angle(est.coefficients[10:-10, 6])), 1)[0]
    assert slope == pytest.approx(-2 * np.pi / 1024, rel=0.05)


def test_time_interpolation_stays_between_slot_gains():
    pilots = dmrs_generate(24, 0)
    gains = np.array([1.0, 1.0, 2.0, 2.0])
    cells = np.zeros((24, 14), dtype=complex)
    cells[:, DMRS_SYMBOLS] = pilots * gains
    h = channel_estimate_dmrs(cells, pilots).coefficients
    assert np.all(h.real >= 1 - 1e-9) and np.all(h.real <= 2 + 1e-9)
    np.testing.assert_allclose(h[:, :3], 1.0)
    np.testing.assert_allclose(h[:, 11:], 2.0)


def test_edge_symbols_follow_the_trend_unless_clamped():
    pilots = dmrs_generate(24, 0)
    ramp = np.array([1.0, 2.0, 3.0, 4.0])  # one unit per three symbols
    cells = np.zeros((24, 14), dtype=complex)
    cells[:, DMRS_SYMBOLS] = pilots * ramp
    h = channel_estimate_dmrs(cells, pilots).coefficients
    np.testing.assert_allclose(h[:, 0], 1 / 3)
    np.testing.assert_allclose(h[:, 13], 4 + 2 / 3)
    clamped = channel_estimate_dmrs(cells, pilots, extrapolate=False).coefficients
    np.testing.assert_allclose(clamped[:, 0], 1.0)
    np.testing.assert_allclose(clamped[:, 13], 4.0)


def test_static_noisy_channel_is_averaged_over_the_pilots():
    # a static channel should be estimated from all four DMRS, so the
    # extrapolated edge symbols see no more noise than a plain average
    rng = np.random.default_rng(8)
    pilots = dmrs_generate(240, 0)
    err = {True: [], False: []}
    for _ in range(20):
        cells = np.zeros((240, 14), dtype=complex)
        noise = np.sqrt(0.5) * (rng.standard_normal((240, 4)) + 1j * rng.standard_normal((240, 4)))
        cells[:, DMRS_SYMBOLS] = pilots * (1 + noise)
        for shrink in err:
            h = channel_estimate_dmrs(cells, pilots, shrink=shrink).coefficients
            err[shrink].append(np.mean(np.abs(h[20:220, [0, 13]] - 1) ** 2))
    # a 7 x 4 average leaves 1/28 of the noise; the raw extrapolation far more
    assert np.mean(err[True]) < 1.5 / 28
    assert np.mean(err[False]) > 3 * np.mean(err[True])


def test_noise_variance_estimate():
    rng = np.random.default_rng(5)
    pilots = dmrs_generate(240, 0)
    cells = np.zeros((240, 14), dtype=complex)
    sigma2 = 0.05
    noise = np.sqrt(sigma2 / 2) * (rng.standard_normal((240, 4)) + 1j * rng.standard_normal((240, 4)))
    cells[:, DMRS_SYMBOLS] = pilots + noise
    assert channel_estimate_dmrs(cells, pilots).noise_variance == pytest.approx(sigma2, rel=0.15)


def test_static_multipath_within_cp_is_exactly_invertible():
    rng = np.random.default_rng(6)
    tx = transmit_subframe(random_tb(QPSK_HALF, rng), QPSK_HALF)
    x = tx.waveform.samples
    y = x.copy()
    y[3:] += (0.4 + 0.2j) * x[:-3]
    rx = scfdma_demodulate(ComplexWaveform(y, SAMPLE_RATE_HZ)).cells
    h = 1 + (0.4 + 0.2j) * np.exp(-2j * np.pi * SUBCARRIER_BINS * 3 / 1024)
    # the first symbol's CP still contains the start of the response, so every symbol is clean
    np.testing.assert_allclose(rx / h[:, None], tx.grid.cells, atol=1e-8)


def test_cfo_estimate():
    rng = np.random.default_rng(7)
    tx = transmit_subframe(random_tb(QPSK_HALF, rng), QPSK_HALF)
    n = np.arange(SUBFRAME_SAMPLES)
    rx = ComplexWaveform(tx.waveform.samples * np.exp(2j * np.pi * 300 * n / SAMPLE_RATE_HZ), SAMPLE_RATE_HZ)
    rx = add_awgn(rx, 20.0, 1.0, rng)
    used = np.concatenate([ALLOC_HALF.pscch_subcarriers, ALLOC_HALF.pssch_subcarriers])
    assert estimate_cfo(scfdma_demodulate(rx), used, SAMPLE_RATE_HZ) == pytest.approx(300, abs=10)


# ------------------------------------------------------------------ receiver

@pytest.mark.parametrize("mcs", [QPSK_HALF, QPSK_THREEQUARTER])
@pytest.mark.parametrize("shift", CYCLIC_SHIFTS)
def test_loopback_every_shift(mcs, shift):
    rng = np.random.default_rng(shift)
    tb = random_tb(mcs, rng)
    tx = transmit_subframe(tb, mcs, cyclic_shift=shift)
    res = receive_subframe(tx.waveform, tx.allocation, mcs)
    assert res.ok and res.cyclic_shift == shift and res.nxid == tx.nxid
    np.testing.assert_array_equal(res.tb_bits, tb)


def test_blind_decode_on_noise_fails():
    rng = np.random.default_rng(8)
    for _ in range(20):
        g = ResourceGrid(rng.standard_normal((600, 14)) + 1j * rng.standard_normal((600, 14)))
        assert pscch_blind_decode(g, ALLOC_HALF) is None


def test_sci_decoding_at_0db():
    rng = np.random.default_rng(9)
    tx = transmit_subframe(random_tb(QPSK_HALF, rng), QPSK_HALF)
    ok = 0
    for _ in range(500):
        shift = int(rng.choice(CYCLIC_SHIFTS))
        cells = np.zeros((600, 14), dtype=complex)
        cells[ALLOC_HALF.pscch_subcarriers] = pscch_build(sci_encode(tx.sci).bits, shift)
        # unit-power cells and unit-variance noise per cell
        cells += np.sqrt(0.5) * (rng.standard_normal(cells.shape) + 1j * rng.standard_normal(cells.shape))
        out = pscch_blind_decode(ResourceGrid(cells), ALLOC_HALF)
        ok += out is not None and out.sci == tx.sci and out.cyclic_shift == shift
    assert ok / 500 > 0.99


def test_awgn_5db_mcs7():
    rng = np.random.default_rng(10)
    errors = 0
    for _ in range(500):
        tb = random_tb(QPSK_HALF, rng)
        tx = transmit_subframe(tb, QPSK_HALF, cyclic_shift=int(rng.choice(CYCLIC_SHIFTS)))
        rx = add_awgn(tx.waveform, 5.0, tx.waveform.mean_power(), rng)
        res = receive_subframe(rx, tx.allocation, QPSK_HALF)
        errors += (not res.ok) or not np.array_equal(res.tb_bits, tb)
    assert errors / 500 < 0.01


def test_corrupted_control_discards_data():
    rng = np.random.default_rng(11)
    tx = transmit_subframe(random_tb(QPSK_HALF, rng), QPSK_HALF)
    cells = tx.grid.cells.copy()
    cells[ALLOC_HALF.pscch_subcarriers] = rng.standard_normal((24, 14))
    res = receive_subframe(scfdma_modulate(ResourceGrid(cells)), tx.allocation, QPSK_HALF)
    assert res.failure == "sci" and res.tb_bits is None


def test_wrong_announced_mcs_is_a_control_failure():
    rng = np.random.default_rng(12)
    tx = transmit_subframe(random_tb(QPSK_HALF, rng), QPSK_HALF)
    res = receive_subframe(tx.waveform, tx.allocation, QPSK_THREEQUARTER)
    assert res.failure == "sci"


def test_transform_precoding_lowers_papr():
    rng = np.random.default_rng(13)
    n_sc = 240
    sc = SUBCARRIER_BINS[ALLOC_HALF.pssch_subcarriers]
    papr_sc, papr_ofdm = [], []
    for _ in range(1000):
        syms = map_symbols(rng.integers(0, 2, 2 * n_sc), "QPSK")
        for freq_values, out in ((dft(syms, n_sc), papr_sc), (syms, papr_ofdm)):
            f = np.zeros(1024, dtype=complex)
            f[sc] = freq_values
            t = np.abs(np.fft.ifft(f)) ** 2
            out.append(10 * np.log10(t.max() / t.mean()))
    assert np.percentile(papr_sc, 99) < np.percentile(papr_ofdm, 99)
