import numpy as np
import pytest

from v2xlink.dsp import CRC24A, crc_attach, crc_check, demap_soft, map_symbols
from v2xlink.fec import QPP_TABLE, RateMatchConfig, TurboCodeSpec, qpp_permutation, rate_match, rate_recover, \
    turbo_decode, turbo_encode


def block_sizes_by_rule():
    """LTE block sizes: steps of 8 up to 512, 16 to 1024, 32 to 2048, 64 to 6144."""
    return (list(range(40, 513, 8)) + list(range(528, 1025, 16))
            + list(range(1056, 2049, 32)) + list(range(2112, 6145, 64)))


def rsc_oracle(bits):
    """Textbook RSC, feedback 1+D^2+D^3, feedforward 1+D+D^3; returns parity and 3+3 tail bits."""
    r = [0, 0, 0]
    par = []
    for u in bits:
        a = u ^ r[1] ^ r[2]
        par.append(a ^ r[0] ^ r[2])
        r = [a, r[0], r[1]]
    xt, zt = [], []
    for _ in range(3):
        u = r[1] ^ r[2]
        a = u ^ r[1] ^ r[2]
        xt.append(u)
        zt.append(a ^ r[0] ^ r[2])
        r = [a, r[0], r[1]]
    assert r == [0, 0, 0]
    return par, xt, zt


def test_qpp_table_covers_the_lte_sizes():
    assert len(QPP_TABLE) == 188
    assert [k for k, _, _ in QPP_TABLE] == block_sizes_by_rule()


def test_qpp_k40_fixture():
    assert qpp_permutation(40)[1] == (3 * 1 + 10 * 1) % 40 == 13


def test_qpp_bijective_for_every_size():
    for k, _, _ in QPP_TABLE:
        perm = qpp_permutation(k)
        assert np.array_equal(np.sort(perm), np.arange(k)), k


def test_invalid_block_size():
    with pytest.raises(ValueError):
        TurboCodeSpec(41)
    with pytest.raises(ValueError):
        turbo_encode(np.zeros(41))
    with pytest.raises(ValueError):
        TurboCodeSpec(40, iterations=0)


def test_all_zero_codeword():
    for s in turbo_encode(np.zeros(40, dtype=int)):
        assert s.size == 44 and not s.any()


@pytest.mark.parametrize("k", [40, 1024, 2496])
def test_encoder_matches_shift_register_oracle(k):
    rng = np.random.default_rng(k)
    bits = rng.integers(0, 2, k)
    z1, x_t, z_t = rsc_oracle(bits.tolist())
    z2, xp_t, zp_t = rsc_oracle(bits[qpp_permutation(k)].tolist())
    d0, d1, d2 = turbo_encode(bits)
    np.testing.assert_array_equal(d0, list(bits) + [x_t[0], z_t[1], xp_t[0], zp_t[1]])
    np.testing.assert_array_equal(d1, z1 + [z_t[0], x_t[2], zp_t[0], xp_t[2]])
    np.testing.assert_array_equal(d2, z2 + [x_t[1], z_t[2], xp_t[1], zp_t[2]])


def llrs_of(streams, scale=5.0):
    return [scale * (1 - 2 * s.astype(float)) for s in streams]


@pytest.mark.parametrize("k", [40, 512, 2496, 6144])
def test_noiseless_round_trip(k):
    rng = np.random.default_rng(k + 1)
    for _ in range(5):
        bits = rng.integers(0, 2, k)
        np.testing.assert_array_equal(turbo_decode(*llrs_of(turbo_encode(bits))), bits)


def test_zero_llrs_are_deterministic():
    z = np.zeros(44)
    a = turbo_decode(z, z, z)
    np.testing.assert_array_equal(a, turbo_decode(z, z, z))
    assert a.size == 40


def test_early_stop_ends_on_crc_pass():
    rng = np.random.default_rng(8)
    bits = crc_attach(rng.integers(0, 2, 1000), CRC24A)
    calls = []

    def stop(b):
        calls.append(1)
        return crc_check(b, CRC24A)

    out = turbo_decode(*llrs_of(turbo_encode(bits)), early_stop=stop)
    np.testing.assert_array_equal(out, bits)
    assert len(calls) == 1


def test_corrects_heavy_noise_where_hard_decisions_fail():
    rng = np.random.default_rng(9)
    k = 1024
    bits = rng.integers(0, 2, k)
    # consistent Gaussian LLRs (variance twice the mean), Es/N0 = -3 dB at rate 1/3
    noisy = [l + 2.0 * rng.standard_normal(l.size) for l in llrs_of(turbo_encode(bits), 2.0)]
    assert np.any((noisy[0][:k] < 0) != bits)
    np.testing.assert_array_equal(turbo_decode(*noisy), bits)


def test_awgn_ber_at_2db():
    # QPSK at Es/N0 = 2 dB, rate 1/2 after rate matching; 2472 is not a QPP
    # size, so the nearest block used by the PSSCH chain (2496) is exercised
    rng = np.random.default_rng(10)
    k = 2496
    e = 2 * k
    nv = 10 ** (-2 / 10)
    errors = 0
    for _ in range(100):
        bits = rng.integers(0, 2, k)
        coded = rate_match(turbo_encode(bits), RateMatchConfig(e))
        y = map_symbols(coded, "QPSK")
        y = y + np.sqrt(nv / 2) * (rng.standard_normal(y.size) + 1j * rng.standard_normal(y.size))
        streams = rate_recover(demap_soft(y, "QPSK", nv), RateMatchConfig(e), k)
        errors += np.count_nonzero(turbo_decode(*streams) != bits)
    assert errors / (100 * k) < 1e-3
