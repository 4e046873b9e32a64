import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from hetacc.errors import CalibrationError, InvariantError, ParseError
from hetacc.perfmodel import layer_time, square_layer
from hetacc.platform import (BandwidthProfile, builtin_platform, calibrate_bandwidth,
                             dump_platform, load_platform, platform_to_dict, scale_platform)
from hetacc.reference import (MONOLITHIC_ESTIMATE_GFLOPS, REFERENCE_MONOLITHIC,
                              calibration_observations)


def test_vck190_fixture_values(vck190):
    assert vck190.aie_total == 400
    assert vck190.aie_freq_hz == 1e9
    assert vck190.bw.bw_total == 25.6e9
    assert vck190.ram_bytes == 463 * 32 * 1024 + 967 * 4608
    assert (vck190.plio_in, vck190.plio_out) == (128, 128)


def test_uncalibrated_streams_default_to_quarter_of_peak(vck190):
    assert vck190.bw.bw_l == vck190.bw.bw_r == vck190.bw.bw_o == 6.4e9


def test_eff_zero_is_rejected():
    doc = platform_to_dict(builtin_platform())
    doc["eff"] = 0
    with pytest.raises(InvariantError) as exc:
        load_platform(doc)
    assert exc.value.field == "eff"


@pytest.mark.parametrize("field,value", [("aie_total", 0), ("ram_bytes", 0), ("eff", 1.5),
                                         ("plio_in", 0)])
def test_invariants_name_the_field(field, value):
    doc = platform_to_dict(builtin_platform())
    doc[field] = value
    with pytest.raises(InvariantError) as exc:
        load_platform(doc)
    assert exc.value.field == field


def test_unknown_field_rejected():
    doc = platform_to_dict(builtin_platform())
    doc["hbm_stacks"] = 2
    with pytest.raises(InvariantError, match="unknown"):
        load_platform(doc)


def test_missing_required_field_rejected():
    doc = platform_to_dict(builtin_platform())
    del doc["ram_bytes"]
    with pytest.raises(InvariantError):
        load_platform(doc)


def test_stream_bandwidth_above_peak_rejected():
    with pytest.raises(InvariantError):
        BandwidthProfile(1e9, 1e9, 3e9, 2e9)


def test_unparseable_document():
    with pytest.raises(ParseError):
        load_platform("{aie_total: [1, 2\n")


def test_yaml_and_json_round_trip(tmp_path, vck190_cal):
    path = tmp_path / "p.json"
    dump_platform(vck190_cal, path)
    assert load_platform(path) == vck190_cal
    assert load_platform(path.read_text()) == vck190_cal
    yaml_text = "name: tiny\naie_total: 4\nram_bytes: 65536\nbw:\n  bw_total: 1.0e9\n"
    tiny = load_platform(yaml_text)
    assert tiny.aie_total == 4 and tiny.bw.bw_l == 0.25e9


def test_scale_bandwidth_16x(vck190):
    s = scale_platform(vck190, 1, 1, 16)
    assert s.bw.bw_total == pytest.approx(409.6e9)
    assert s.aie_total == vck190.aie_total
    assert s.bw.bw_l == pytest.approx(16 * vck190.bw.bw_l)


def test_scale_aie_one_eighth(vck190):
    s = scale_platform(vck190, Fraction(1, 8), 1, 1)
    assert s.aie_total == 50
    assert s.ram_bytes == vck190.ram_bytes


def test_identity_scale_only_renames(vck190):
    s = scale_platform(vck190, 1, 1, 1)
    assert s.name != vck190.name
    assert platform_to_dict(s) | {"name": vck190.name} == platform_to_dict(vck190)


def test_scaled_counts_floor_at_one(vck190):
    s = scale_platform(vck190, Fraction(1, 10**6), Fraction(1, 10**9), 1)
    assert s.aie_total == 1 and s.ram_bytes == 1


@settings(max_examples=50, deadline=None)
@given(num=st.integers(1, 16), den=st.integers(1, 16))
def test_reciprocal_scaling_round_trips_within_rounding(num, den):
    base = builtin_platform()
    f = Fraction(num, den)
    back = scale_platform(scale_platform(base, f, f, f), 1 / f, 1 / f, 1 / f)
    assert abs(back.aie_total - base.aie_total) <= math.ceil(1 / f) + 1
    assert abs(back.ram_bytes - base.ram_bytes) <= math.ceil(1 / f) + 1
    assert back.bw.bw_total == pytest.approx(base.bw.bw_total)


def test_implied_bandwidth_by_inversion(vck190):
    """Solve the time model for one shared stream bandwidth at 6144^3.

    With equal streams the output store dominates the step time, so the
    estimate 3363.89 GFLOPS pins that bandwidth; solve by bisection.
    """
    layer = square_layer(6144)
    target = MONOLITHIC_ESTIMATE_GFLOPS[6144]

    def gflops(bw):
        plat = vck190.with_bandwidth(BandwidthProfile(bw, bw, bw, max(bw, 25.6e9)))
        return layer_time(layer, REFERENCE_MONOLITHIC, plat).gflops

    lo, hi = 1e9, 25.6e9
    for _ in range(200):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if gflops(mid) < target else (lo, mid)
    implied = (lo + hi) / 2
    # the quarter-of-peak default is 6.4e9; the exact inversion lands higher
    assert 6.4e9 < implied < 8.0e9
    equal = vck190.with_bandwidth(BandwidthProfile(6.4e9, 6.4e9, 6.4e9, 25.6e9))
    assert layer_time(layer, REFERENCE_MONOLITHIC, equal).gflops == pytest.approx(target, rel=0.20)


def test_calibration_fits_its_own_rows_within_5_percent(vck190):
    fit = calibrate_bandwidth(vck190, calibration_observations(), return_fit=True)
    for (size, _, obs), modeled in zip(calibration_observations(), fit.modeled_gflops):
        assert abs(modeled - obs) / obs < 0.05, size


def test_calibration_is_deterministic(vck190):
    a = calibrate_bandwidth(vck190, calibration_observations())
    b = calibrate_bandwidth(vck190, calibration_observations())
    assert a == b
    assert all(0 < v <= a.bw_total for v in (a.bw_l, a.bw_r, a.bw_o))


def test_calibration_residual_non_increasing_with_resolution(vck190):
    res = [calibrate_bandwidth(vck190, calibration_observations(), grid_levels=g,
                               max_rms_rel_error=10, return_fit=True).residual
           for g in (2, 3, 4, 5, 6)]
    assert all(b <= a for a, b in zip(res, res[1:]))


def test_calibration_rejects_compute_bound_only(vck190):
    plat = vck190.with_bandwidth(BandwidthProfile(25.6e9, 25.6e9, 25.6e9, 25.6e9))
    roof = layer_time(square_layer(6144), REFERENCE_MONOLITHIC,
                      plat.with_bandwidth(BandwidthProfile(1e30, 1e30, 1e30, 1e30))).gflops
    obs = [(6144, REFERENCE_MONOLITHIC, roof)] * 3
    with pytest.raises(CalibrationError):
        calibrate_bandwidth(plat, obs)


def test_calibration_needs_three_observations(vck190):
    with pytest.raises(CalibrationError):
        calibrate_bandwidth(vck190, calibration_observations()[:2])


def test_calibration_reports_best_residual_when_nothing_fits(vck190):
    # the same problem observed at two rates ten times apart cannot both fit
    obs = calibration_observations() + [(64, REFERENCE_MONOLITHIC, 4.0)]
    with pytest.raises(CalibrationError) as exc:
        calibrate_bandwidth(vck190, obs)
    assert exc.value.best_residual is not None and exc.value.best_residual > 0


def test_compute_roof(vck190):
    assert vck190.compute_roof_gflops == pytest.approx(400 * 8 * 2 * 1.0 * 0.8)
    assert json.loads(json.dumps(platform_to_dict(vck190)))["aie_total"] == 400
