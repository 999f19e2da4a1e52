import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blurforge import metrics
from blurforge.errors import InputError
from blurforge.metrics import FramePairMetrics

from tests.ssim_oracle import luma_loop, ssim_loop


def images(rng, shape=(16, 16, 3)):
    return rng.integers(0, 256, shape, dtype=np.uint8), rng.integers(0, 256, shape, dtype=np.uint8)


def test_psnr_identical_is_inf(rng):
    a, _ = images(rng)
    assert metrics.psnr(a, a.copy()) == math.inf


def test_psnr_constant_difference():
    a = np.full((8, 8, 3), 100, np.uint8)
    b = a + 16
    want = 10 * math.log10(255**2 / 256)
    assert metrics.psnr(a, b) == pytest.approx(want, abs=1e-12)
    assert abs(metrics.psnr(a, b) - 24.0486) < 1e-3


def test_psnr_matches_loop(rng):
    a, b = images(rng, (5, 7, 3))
    total = 0.0
    for idx in np.ndindex(a.shape):
        d = float(a[idx]) - float(b[idx])
        total += d * d
    want = 10 * math.log10(255**2 / (total / a.size))
    assert metrics.psnr(a, b) == pytest.approx(want, rel=1e-12)


def test_psnr_properties(rng):
    a, b = images(rng, (6, 6, 3))
    assert metrics.psnr(a, b) == metrics.psnr(b, a)
    a16, b16 = a.astype(np.int64), b.astype(np.int64)
    assert metrics.psnr(a16 + 3, b16 + 3) == pytest.approx(metrics.psnr(a16, b16), rel=1e-15)
    c = a.astype(np.float64)
    assert metrics.psnr(c, c + 1) > metrics.psnr(c, c + 2)


def test_psnr_shape_mismatch():
    with pytest.raises(InputError):
        metrics.psnr(np.zeros((2, 2)), np.zeros((2, 3)))


def test_gaussian_window_normalized():
    g = metrics.gaussian_window()
    assert len(g) == 11
    assert abs(g.sum() - 1.0) < 1e-15


def test_ssim_self_is_one(rng):
    a, _ = images(rng, (20, 24, 3))
    assert metrics.ssim(a, a) == 1.0


def test_luma_matches_loop(rng):
    a, _ = images(rng, (4, 5, 3))
    np.testing.assert_allclose(metrics.to_luma(a), luma_loop(a), rtol=0, atol=1e-12)


def test_ssim_matches_loop_oracle(rng):
    for _ in range(5):
        a, b = images(rng)
        want = ssim_loop(luma_loop(a), luma_loop(b))
        assert abs(metrics.ssim(a, b) - want) < 1e-7


def test_ssim_constant_gray_versus_inverse():
    a = np.full((16, 16, 3), 128, np.uint8)
    b = 255 - a
    want = ssim_loop(luma_loop(a), luma_loop(b))
    assert abs(metrics.ssim(a, b) - want) < 1e-12


def test_ssim_channels_mode(rng):
    a, b = images(rng)
    want = np.mean([ssim_loop(a[..., c], b[..., c]) for c in range(3)])
    assert abs(metrics.ssim(a, b, mode="channels") - want) < 1e-7


def test_ssim_symmetric_and_bounded(rng):
    for _ in range(5):
        a, b = images(rng)
        s = metrics.ssim(a, b)
        assert abs(s - metrics.ssim(b, a)) < 1e-9
        assert -1.0 <= s <= 1.0


def test_ssim_too_small():
    with pytest.raises(InputError):
        metrics.ssim(np.zeros((10, 20, 3), np.uint8), np.zeros((10, 20, 3), np.uint8))


def ann(env="Indoors", motion="CM", prox="Close", conf=0.5):
    return {"environment": env, "motion": motion, "proximity": prox, "mean_confidence": conf}


def test_aggregate_single_frame_per_value():
    ms = [FramePairMetrics("a", 0, 30.0, 0.9), FramePairMetrics("a", 1, 20.0, 0.8)]
    anns = {("a", 0): ann("Indoors", "CM", "Close"), ("a", 1): ann("Outdoors", "CM+MO", "Far")}
    rep = metrics.aggregate_by_attribute(ms, anns).to_dict()
    assert rep["slices"]["environment"]["Indoors"]["psnr"] == 30.0
    assert rep["slices"]["environment"]["Outdoors"]["psnr"] == 20.0
    assert rep["slices"]["proximity"]["Far"]["ssim"] == 0.8
    assert rep["slices"]["proximity"]["Mid"]["count"] == 0
    assert rep["overall"]["psnr"] == 25.0


def test_aggregate_uniform_value():
    ms = [FramePairMetrics("c", i, 27.5, 0.5) for i in range(6)]
    anns = {("c", i): ann(prox=("Close", "Mid", "Far")[i % 3]) for i in range(6)}
    rep = metrics.aggregate_by_attribute(ms, anns).to_dict()
    for cat in rep["slices"].values():
        for s in cat.values():
            assert s["psnr"] in (27.5, None)


def test_aggregate_matches_brute_force_grouping(rng):
    envs, motions, proxs = ("Indoors", "Outdoors"), ("CM", "CM+MO"), ("Close", "Mid", "Far")
    ms, anns = [], {}
    for i in range(40):
        ms.append(FramePairMetrics("x", i, float(rng.uniform(20, 35)), float(rng.uniform(0.5, 1))))
        anns[("x", i)] = ann(envs[i % 2], motions[(i // 2) % 2], proxs[i % 3])
    rep = metrics.aggregate_by_attribute(ms, anns)
    for cat, values in (("environment", envs), ("motion", motions), ("proximity", proxs)):
        total = 0
        weighted = 0.0
        for v in values:
            group = [m.psnr for m in ms if anns[m.key][cat] == v]
            s = rep.slices[cat][v].to_dict()
            assert s["count"] == len(group)
            assert s["psnr"] == pytest.approx(sum(group) / len(group), rel=1e-12)
            total += s["count"]
            weighted += s["count"] * s["psnr"]
        assert total == len(ms)
        assert weighted / total == pytest.approx(rep.overall.to_dict()["psnr"], rel=1e-12)


def test_aggregate_missing_and_infinite():
    ms = [FramePairMetrics("a", 0, math.inf, 1.0), FramePairMetrics("a", 1, 30.0, 0.9),
          FramePairMetrics("a", 2, 25.0, 0.7)]
    anns = {("a", 0): ann(), ("a", 1): ann()}
    rep = metrics.aggregate_by_attribute(ms, anns).to_dict()
    assert rep["missing_annotations"] == [["a", 2]]
    assert rep["overall"]["psnr"] == 30.0
    assert rep["overall"]["psnr_infinite"] == 1
    assert rep["overall"]["count"] == 2


def test_gain_identical_runs():
    run = [FramePairMetrics("a", i, 20.0 + i, 0.9) for i in range(10)]
    conf = {("a", i): i / 10 + 0.05 for i in range(10)}
    out = metrics.gain_by_confidence(run, run, conf)
    assert all(b["gain"] == 0.0 for b in out)


def test_gain_constant_offset():
    b = [FramePairMetrics("a", i, 20.0, 0.9) for i in range(10)]
    a = [FramePairMetrics("a", i, 21.0, 0.9) for i in range(10)]
    conf = {("a", i): i / 10 + 0.05 for i in range(10)}
    assert [x["gain"] for x in metrics.gain_by_confidence(a, b, conf)] == [1.0] * 10


@given(st.lists(st.floats(-2, 2), min_size=10, max_size=10))
def test_gain_recovers_constructed_offsets(offsets):
    # dyadic base values and offsets keep every subtraction exact
    offsets = [round(o * 64) / 64 for o in offsets]
    a, b, conf = [], [], {}
    for k in range(10):
        for j in range(3):
            key = ("c", 3 * k + j)
            base = 24.0 + j
            b.append(FramePairMetrics(*key, base, 0.9))
            a.append(FramePairMetrics(*key, base + offsets[k], 0.9))
            conf[key] = k / 10 + 0.02 * (j + 1)
    out = metrics.gain_by_confidence(a, b, conf)
    assert [x["gain"] for x in out] == offsets


def test_gain_excludes_infinite_pairs():
    a = [FramePairMetrics("a", 0, math.inf, 1.0), FramePairMetrics("a", 1, 22.0, 0.9)]
    b = [FramePairMetrics("a", 0, 30.0, 1.0), FramePairMetrics("a", 1, 21.0, 0.9)]
    conf = {("a", 0): 0.75, ("a", 1): 0.72}
    out = metrics.gain_by_confidence(a, b, conf)
    assert out[7]["gain"] == 1.0 and out[7]["count"] == 1 and out[7]["skipped_infinite"] == 1


def test_gain_coverage_mismatch_lists_keys():
    a = [FramePairMetrics("a", 0, 20.0, 1.0)]
    b = [FramePairMetrics("a", 1, 20.0, 1.0)]
    with pytest.raises(InputError, match=r"\('a', 0\)"):
        metrics.gain_by_confidence(a, b, {("a", 0): 0.5, ("a", 1): 0.5})
