import math
import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from v2xlink import harness as h
from v2xlink.dsp import ConfigurationError


def synthetic_curve(offset_db, tech="dot11p", snrs=np.arange(0.0, 21.0, 2.0), trials=10_000):
    """BLER falling one decade per 5 dB, shifted right by ``offset_db``."""
    pts = []
    for s in snrs:
        bler = min(1.0, 10 ** (-(s - offset_db) / 5))
        errors = int(round(bler * trials))
        pts.append(h.BlerPoint.from_counts(float(s), trials, errors, payload_fail=errors))
    return h.BlerCurve(tech, "qpsk_half", "awgn_only", pts, {})


# ------------------------------------------------------------------ config

def test_config_validation():
    with pytest.raises(ConfigurationError, match="dot11p"):
        h.SimConfig("wifi", "qpsk_half", "awgn_only")
    with pytest.raises(ConfigurationError, match="qpsk_half"):
        h.SimConfig("cv2x", "qam16", "awgn_only")
    with pytest.raises(ConfigurationError, match="itu_va"):
        h.SimConfig("cv2x", "qpsk_half", "nowhere")
    with pytest.raises(ConfigurationError):
        h.SimConfig("cv2x", "qpsk_half", "awgn_only", (3.0, 1.0))
    with pytest.raises(ConfigurationError):
        h.SimConfig("cv2x", "qpsk_half", "awgn_only", max_trials=10, target_errors=20)
    with pytest.raises(ConfigurationError):
        h.SimConfig("cv2x", "qpsk_half", "awgn_only", seed=-1)


# ----------------------------------------------------------------- statistics

def wilson_by_roots(errors, trials, z=1.959963984540054):
    # bounds solve (p_hat - p)^2 = z^2 p (1 - p) / n
    p_hat, a = errors / trials, z * z / trials
    return sorted(np.roots([1 + a, -(2 * p_hat + a), p_hat ** 2]).real)


def test_wilson_interval_fixture():
    lo, hi = h.wilson_interval(10, 1000)
    assert (round(lo, 4), round(hi, 4)) == (0.0054, 0.0183)
    np.testing.assert_allclose((lo, hi), wilson_by_roots(10, 1000), rtol=1e-9)


@pytest.mark.parametrize("errors,trials", [(1, 10), (50, 100), (99, 100), (3, 5000)])
def test_wilson_interval_matches_quadratic(errors, trials):
    np.testing.assert_allclose(h.wilson_interval(errors, trials), wilson_by_roots(errors, trials), rtol=1e-9)


def test_wilson_interval_edges():
    lo, hi = h.wilson_interval(0, 100)
    assert lo == 0.0 and 0 < hi < 0.05
    lo, hi = h.wilson_interval(100, 100)
    assert hi == 1.0 and lo > 0.95


def test_point_invariants():
    p = h.BlerPoint.from_counts(2.0, 400, 17)
    assert p.bler == 17 / 400
    assert p.ci_low <= p.bler <= p.ci_high


# ---------------------------------------------------------------------- trials

def test_trial_seeding_is_keyed_by_value():
    a = h.trial_rng(3, 2.5, 7).integers(0, 2 ** 32, 4)
    np.testing.assert_array_equal(a, h.trial_rng(3, 2.5, 7).integers(0, 2 ** 32, 4))
    assert not np.array_equal(a, h.trial_rng(3, 2.5, 8).integers(0, 2 ** 32, 4))
    assert not np.array_equal(a, h.trial_rng(3, 3.0, 7).integers(0, 2 ** 32, 4))
    assert h.snr_key(-0.001) != h.snr_key(0.0)


@pytest.mark.parametrize("tech", h.TECHNOLOGIES)
@pytest.mark.parametrize("mcs", h.MCS_SCHEMES)
def test_noiseless_trial_has_no_error(tech, mcs):
    cfg = h.SimConfig(tech, mcs, "awgn_only")
    for i in range(3):
        assert h.run_trial(cfg, math.inf, i) == h.TrialOutcome(False)


def test_trial_is_deterministic():
    cfg = h.SimConfig("dot11p", "qpsk_threequarter", "itu_va", seed=11)
    outs = [h.run_trial(cfg, 8.0, i) for i in range(10)]
    assert outs == [h.run_trial(cfg, 8.0, i) for i in range(10)]


def test_cv2x_payload_sizes():
    from v2xlink.cv2x import mcs_scheme
    assert mcs_scheme("qpsk_half").tbs_bits == 2472
    assert mcs_scheme("qpsk_threequarter").tbs_bits == 2664


def test_early_stop_at_target_errors():
    cfg = h.SimConfig("dot11p", "qpsk_half", "awgn_only", max_trials=200, target_errors=50)
    p = h.run_point(cfg, -10.0)
    assert (p.trials, p.errors) == (50, 50)


def test_max_trials_bounds_a_clean_point():
    cfg = h.SimConfig("cv2x", "qpsk_half", "awgn_only", max_trials=20, target_errors=5)
    p = h.run_point(cfg, 20.0)
    assert (p.trials, p.errors, p.bler) == (20, 0, 0.0)


def test_counters_account_for_every_error():
    for tech in h.TECHNOLOGIES:
        cfg = h.SimConfig(tech, "qpsk_threequarter", "itu_vb", max_trials=60, target_errors=60)
        p = h.run_point(cfg, 10.0)
        assert p.errors > 0
        assert p.sync_fail + p.header_fail + p.payload_fail == p.errors


def test_results_do_not_depend_on_worker_count():
    cfg = h.SimConfig("dot11p", "qpsk_half", "itu_eva", (4.0, 8.0), max_trials=40, target_errors=10, seed=5)
    serial = h.format_csv([h.run_sweep(cfg, workers=1)])
    assert serial == h.format_csv([h.run_sweep(cfg, workers=2)])


def test_awgn_bler_does_not_increase_with_snr():
    cfg = h.SimConfig("dot11p", "qpsk_half", "awgn_only", (1.0, 2.0, 3.0), max_trials=3000, target_errors=100,
                      seed=2)
    pts = h.run_sweep(cfg).points
    assert all(p.errors >= 100 for p in pts)
    for a, b in zip(pts, pts[1:]):
        assert b.bler <= a.bler or b.ci_low <= a.ci_high


def test_occupied_reference_raises_the_noise_floor():
    # referring the SNR to occupied subcarriers adds noise relative to the full band
    sample = h.SimConfig("dot11p", "qpsk_half", "awgn_only", max_trials=300, target_errors=300)
    occupied = h.SimConfig("dot11p", "qpsk_half", "awgn_only", max_trials=300, target_errors=300,
                           snr_reference="occupied")
    assert h.run_point(occupied, 3.0).errors > h.run_point(sample, 3.0).errors


# ----------------------------------------------------------------- comparison

def test_compare_identical_curves():
    c = synthetic_curve(0.0)
    assert h.compare(c, c, 0.1) == 0.0


def test_compare_offset_fixture():
    assert h.compare(synthetic_curve(3.0), synthetic_curve(0.0), 0.1) == pytest.approx(3.0, abs=0.01)
    assert h.compare(synthetic_curve(0.0), synthetic_curve(3.0), 0.01) == pytest.approx(-3.0, abs=0.01)


def test_snr_at_bler_interpolates_log_linearly():
    pts = [h.BlerPoint.from_counts(0.0, 100, 100), h.BlerPoint.from_counts(2.0, 1000, 10)]
    curve = h.BlerCurve("cv2x", "qpsk_half", "awgn_only", pts, {})
    # log10 BLER goes 0 -> -2 over 2 dB; 0.1 sits halfway
    assert h.snr_at_bler(curve, 0.1) == pytest.approx(1.0)


def test_non_crossing_curve_is_not_comparable():
    floor = synthetic_curve(40.0)
    with pytest.raises(h.NotComparable, match="never crosses"):
        h.compare(floor, synthetic_curve(0.0))
    with pytest.raises(ValueError):
        h.snr_at_bler(floor, 1.5)


# --------------------------------------------------------------------- export

def test_csv_round_trip(tmp_path):
    curves = [synthetic_curve(0.0), synthetic_curve(3.0, tech="cv2x")]
    curves[0].metadata = {"seed": "4", "max_trials": "10000"}
    path = tmp_path / "c.csv"
    h.export_csv(curves, path)
    assert path.read_text().splitlines()[0] == "technology,mcs,channel,snr_db,trials,errors,bler,ci_low,ci_high"
    back = h.load_csv(path)
    assert [c.points for c in back] == [c.points for c in curves]
    assert back[0].metadata == {"seed": "4", "max_trials": "10000"}
    assert h.format_csv(back) == path.read_text()


def test_empty_curve_list_gives_header_only():
    assert h.format_csv([]) == h.CSV_HEADER + "\n"
    assert h.parse_csv(h.CSV_HEADER + "\n") == []


def test_parse_rejects_foreign_csv():
    with pytest.raises(ValueError):
        h.parse_csv("a,b,c\n1,2,3\n")


def test_unwritable_path_raises(tmp_path):
    with pytest.raises(OSError):
        h.export_csv([synthetic_curve(0.0)], tmp_path / "missing" / "c.csv")


def test_plot_marks_zero_bler_points(tmp_path):
    curve = synthetic_curve(0.0, snrs=np.arange(0.0, 31.0, 5.0), trials=1000)
    zero = sum(p.errors == 0 for p in curve.points)
    assert zero >= 2
    path = tmp_path / "p.svg"
    h.export_plot([curve], path)
    text = path.read_text()
    root = ET.fromstring(text)
    ns = {"svg": "http://www.w3.org/2000/svg"}
    group = root.find(".//svg:g[@id='zero-bler-0']", ns)
    assert group is not None
    assert len(group.findall(".//svg:use", ns)) == zero
    # open markers: every zero-BLER marker is drawn unfilled at one common height
    uses = group.findall(".//svg:use", ns)
    assert all(re.search(r"fill-opacity:\s*0(;|$)", u.get("style")) for u in uses)
    assert len({u.get("y") for u in uses}) == 1
    # the main series reaches the same height at its zero-error points
    line = root.find(".//svg:g[@id='curve-0']/svg:path", ns).get("d")
    last_y = re.findall(r"[ML] [\d.]+ ([\d.]+)", line)[-1]
    assert float(last_y) == pytest.approx(float(uses[0].get("y")), abs=1e-3)
