import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blurforge import crf, io, synth
from blurforge import fixtures as fx
from blurforge.errors import ConfigurationError, InputError


def moving_impulse(n=8, width=12):
    frames = []
    for k in range(n):
        f = np.zeros((1, width, 3))
        f[0, k] = 1.0
        frames.append(f)
    return frames


def test_crossfade_equal_endpoints():
    a = np.full((2, 2, 3), 0.3)
    for f in synth.interpolate_crossfade(a, a.copy(), 5):
        np.testing.assert_allclose(f, a, rtol=0, atol=1e-15)


def test_crossfade_midpoint():
    out = synth.interpolate_crossfade(np.zeros((2, 2, 3)), np.ones((2, 2, 3)), 7)
    assert len(out) == 7
    assert np.all(out[3] == 0.5)


def test_crossfade_matches_per_pixel_loop(rng):
    a, b = rng.random((3, 4, 3)), rng.random((3, 4, 3))
    out = synth.interpolate_crossfade(a, b, 3)
    for i, f in enumerate(out, start=1):
        for idx in np.ndindex(a.shape):
            want = (1 - i / 4) * a[idx] + (i / 4) * b[idx]
            assert abs(f[idx] - want) < 1e-15


def test_crossfade_errors():
    with pytest.raises(InputError):
        synth.interpolate_crossfade(np.zeros((2, 2, 3)), np.zeros((2, 3, 3)), 1)
    with pytest.raises(InputError):
        synth.interpolate_crossfade(np.zeros((2, 2, 3)), np.zeros((2, 2, 3)), 0)


def test_crossfade_source_hits_endpoints(rng):
    a, b = rng.random((2, 2, 3)), rng.random((2, 2, 3))
    src = synth.CrossfadeSource([a, b], 4)
    assert len(src) == 5
    np.testing.assert_array_equal(src[0], a)
    np.testing.assert_array_equal(src[4], b)
    np.testing.assert_allclose(src[1], synth.interpolate_crossfade(a, b, 3)[0], atol=1e-15)


def test_identical_window_encodes_frame():
    inv = crf.gamma_inverse(2.2)
    f = crf.linearize(np.random.default_rng(0).integers(0, 256, (4, 5, 3), dtype=np.uint8), inv)
    want, _ = crf.encode(f, inv)
    np.testing.assert_array_equal(synth.synthesize_blur([f] * 32, inv), want)


def test_impulse_streak():
    avg = synth.average_linear(moving_impulse())
    want = np.zeros((1, 12, 3))
    want[0, :8] = 1 / 8
    assert np.max(np.abs(avg - want)) <= 1e-12


def test_empty_window():
    with pytest.raises(InputError):
        synth.synthesize_blur([], crf.identity_inverse())


@given(st.integers(1, 12), st.randoms(use_true_random=False))
def test_average_permutation_invariant_and_conserves_energy(n, r):
    rng = np.random.default_rng(r.randint(0, 2**32 - 1))
    window = [rng.random((3, 4, 3)) for _ in range(n)]
    avg = synth.average_linear(window)
    perm = list(window)
    r.shuffle(perm)
    np.testing.assert_allclose(synth.average_linear(perm), avg, rtol=0, atol=1e-15)
    assert abs(avg.mean() - np.mean([f.mean() for f in window])) < 1e-12


@pytest.mark.parametrize("m,n,want", [(0, 32, 16), (2, 8, 20), (0, 1, 0)])
def test_groundtruth_index(m, n, want):
    assert synth.groundtruth_index(m, n) == want


def test_cadence():
    assert synth.output_fps(60, 8, 32) == 15.0
    assert synth.interpolated_length(9, 8) == 65
    assert synth.n_windows(9, 8, 32) == 2


@pytest.mark.parametrize("sample,f,want", [(16, 8, 2), (48, 8, 6), (4, 8, 0), (5, 8, 1), (12, 8, 1), (7, 1, 7)])
def test_original_index_nearest_ties_earlier(sample, f, want):
    assert synth.original_index(sample, f) == want


def test_config_validation():
    with pytest.raises(ConfigurationError):
        synth.SynthConfig(crf=crf.identity_inverse(), interp_factor=0)
    with pytest.raises(ConfigurationError):
        synth.SynthConfig(crf=crf.identity_inverse(), window=0)


def write_constant_clip(root, n=2, value=90):
    entry = {"clip_id": "const", "fps": 60.0, "frames": [], "depth": [], "confidence": []}
    for k in range(n):
        name = f"{k:08d}.png"
        io.write_rgb(root / "f" / name, np.full((6, 7, 3), value, np.uint8))
        io.write_gray16(root / "d" / name, np.full((3, 4), 1200 + k, np.uint16))
        io.write_gray8(root / "c" / name, np.full((3, 4), 200, np.uint8))
        entry["frames"].append(f"f/{name}")
        entry["depth"].append(f"d/{name}")
        entry["confidence"].append(f"c/{name}")
    return io.ClipManifest.from_dict(entry)


def test_constant_clip_single_sample(tmp_path):
    clip = write_constant_clip(tmp_path)
    cfg = synth.SynthConfig(crf=crf.gamma_inverse(2.2), interp_factor=8, window=8)
    res = synth.run_pipeline(clip, cfg, base_dir=tmp_path)
    assert len(res.samples) == 1
    s = res.samples[0]
    np.testing.assert_array_equal(s.blur, s.sharp)
    assert s.source_index == 0
    np.testing.assert_array_equal(s.depth_mm, np.full((3, 4), 1200, np.uint16))
    assert len(res.manifest.frames) == 1


def test_fixture_clip_two_samples(tmp_path):
    manifest = fx.write_fixture_clip(tmp_path)
    (clip,) = io.load_manifest(manifest)
    cfg = synth.SynthConfig(crf=crf.gamma_inverse(2.2), interp_factor=8, window=32)
    res = synth.run_pipeline(clip, cfg, base_dir=tmp_path)
    assert [s.source_index for s in res.samples] == [2, 6]
    assert [s.interp_index for s in res.samples] == [16, 48]
    assert res.manifest.fps == 15.0
    threaded = synth.run_pipeline(clip, cfg, base_dir=tmp_path, threads=3)
    for a, b in zip(res.samples, threaded.samples):
        np.testing.assert_array_equal(a.blur, b.blur)


def test_crossfade_pipeline_matches_direct_average(tmp_path):
    manifest = fx.write_fixture_clip(tmp_path)
    (clip,) = io.load_manifest(manifest)
    inv = crf.gamma_inverse(2.2)
    res = synth.run_pipeline(clip, synth.SynthConfig(crf=inv, interp_factor=4, window=8), base_dir=tmp_path)
    lin = [crf.linearize(io.read_rgb(tmp_path / p), inv) for p in clip.frames]
    seq = [lin[0]]
    for a, b in zip(lin, lin[1:]):
        seq.extend(synth.interpolate_crossfade(a, b, 3))
        seq.append(b)
    assert len(seq) == 33
    for m, s in enumerate(res.samples):
        np.testing.assert_array_equal(s.blur, synth.synthesize_blur(seq[m * 8:(m + 1) * 8], inv))


def test_external_interpolated_frames(tmp_path):
    clip = write_constant_clip(tmp_path, n=3, value=50)
    paths = []
    for j in range(5):
        p = tmp_path / "interp" / f"{j:08d}.png"
        io.write_rgb(p, np.full((6, 7, 3), 50 + 10 * j, np.uint8))
        paths.append(p)
    inv = crf.identity_inverse()
    res = synth.run_pipeline(clip, synth.SynthConfig(crf=inv, interp_factor=2, window=4), base_dir=tmp_path,
                             interpolated=paths)
    assert len(res.samples) == 1
    assert np.all(res.samples[0].blur == 65)  # mean of 50, 60, 70, 80 with a linear table
    with pytest.raises(InputError):
        synth.run_pipeline(clip, synth.SynthConfig(crf=inv, interp_factor=4, window=4), base_dir=tmp_path,
                           interpolated=paths)


def test_short_clip_skipped_with_warning(tmp_path, caplog):
    clip = write_constant_clip(tmp_path)
    cfg = synth.SynthConfig(crf=crf.identity_inverse(), interp_factor=8, window=32)
    with caplog.at_level(logging.WARNING):
        res = synth.run_pipeline(clip, cfg, base_dir=tmp_path)
    assert res.skipped and res.samples == []
    assert "skipped" in caplog.text


def test_missing_depth_is_hard_error(tmp_path):
    clip = write_constant_clip(tmp_path)
    (tmp_path / clip.depth[1]).unlink()
    with pytest.raises(FileNotFoundError):
        synth.run_pipeline(clip, synth.SynthConfig(crf=crf.identity_inverse(), interp_factor=8, window=8),
                           base_dir=tmp_path)


def test_write_samples_layout(tmp_path):
    clip = write_constant_clip(tmp_path)
    res = synth.run_pipeline(clip, synth.SynthConfig(crf=crf.identity_inverse(), interp_factor=8, window=8),
                             base_dir=tmp_path)
    out = tmp_path / "out"
    synth.write_samples(out, clip.clip_id, res.samples)
    for sub in ("blur", "gt", "depth", "conf"):
        assert (out / "const" / sub / "00000000.png").is_file()
    np.testing.assert_array_equal(io.read_gray16(out / "const" / "depth" / "00000000.png"), res.samples[0].depth_mm)
