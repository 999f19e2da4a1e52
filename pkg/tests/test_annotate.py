import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from blurforge import annotate
from blurforge.annotate import DepthFrame
from blurforge.errors import DegenerateDepthError, InputError, UnlabeledError


def frame(depth, conf=None):
    depth = np.asarray(depth, dtype=np.float64)
    conf = np.full(depth.shape, 0.5) if conf is None else np.asarray(conf, dtype=np.float64)
    return DepthFrame(depth=depth, confidence=conf)


def split_map(counts_by_value, shape=(10, 10)):
    vals = np.concatenate([np.full(n, v) for v, n in counts_by_value])
    return frame(vals.reshape(shape))


def test_constant_close():
    assert annotate.proximity_label(frame(np.ones((4, 4)))) == "Close"


def test_majority_far():
    assert annotate.proximity_label(split_map([(10.0, 60), (1.0, 40)])) == "Far"


@pytest.mark.parametrize("split,want", [
    ([(1.0, 60), (3.0, 30), (9.0, 10)], "Close"),
    ([(1.0, 10), (3.0, 60), (9.0, 30)], "Mid"),
    ([(1.0, 30), (3.0, 10), (9.0, 60)], "Far"),
])
def test_sixty_thirty_ten(split, want):
    assert annotate.proximity_label(split_map(split)) == want


def test_tie_goes_near():
    d = split_map([(1.0, 50), (3.0, 50)])
    assert annotate.proximity_label(d) == "Close"
    assert annotate.proximity_label(d, prefer="far") == "Mid"


def test_bin_edges_inclusive_upper():
    assert annotate.proximity_label(frame(np.full((2, 2), 1.5))) == "Close"
    assert annotate.proximity_label(frame(np.full((2, 2), 4.5))) == "Mid"
    assert annotate.proximity_label(frame(np.full((2, 2), 4.5001))) == "Far"


def test_zero_depth_ignored():
    d = split_map([(0.0, 70), (9.0, 30)])
    assert annotate.proximity_label(d) == "Far"
    with pytest.raises(UnlabeledError):
        annotate.proximity_label(frame(np.zeros((3, 3))))


@given(hnp.arrays(np.float64, (5, 6), elements=st.floats(0.01, 20.0)), st.randoms(use_true_random=False))
def test_proximity_permutation_invariant(depth, r):
    flat = depth.ravel().tolist()
    r.shuffle(flat)
    shuffled = np.array(flat).reshape(depth.shape)
    assert annotate.proximity_label(frame(depth)) == annotate.proximity_label(frame(shuffled))


def test_depth_frame_validation():
    with pytest.raises(InputError):
        DepthFrame(np.ones((2, 2)), np.ones((2, 3)))
    with pytest.raises(InputError):
        DepthFrame(-np.ones((2, 2)), np.ones((2, 2)))
    with pytest.raises(InputError):
        DepthFrame(np.ones((2, 2)), np.full((2, 2), 1.2))


def test_mean_confidence_examples(rng):
    assert annotate.mean_confidence(frame(np.ones((3, 3)), np.full((3, 3), 0.5))) == 0.5
    half = np.zeros((4, 4))
    half[:2] = 1.0
    assert annotate.mean_confidence(frame(np.ones((4, 4)), half)) == 0.5
    conf = rng.random((7, 9))
    total = 0.0
    for v in conf.ravel():
        total += v
    assert abs(annotate.mean_confidence(frame(np.ones((7, 9)), conf)) - total / conf.size) < 1e-12


@given(hnp.arrays(np.float64, (4, 5), elements=st.floats(0.0, 1.0)))
def test_mean_confidence_bounded(conf):
    m = annotate.mean_confidence(frame(np.ones(conf.shape), conf))
    assert conf.min() - 1e-12 <= m <= conf.max() + 1e-12


def test_histogram_examples():
    assert annotate.confidence_histogram([0.55]) == [0, 0, 0, 0, 0, 1, 0, 0, 0, 0]
    assert annotate.confidence_histogram([1.0])[-1] == 1
    assert annotate.confidence_histogram([]) == []
    assert annotate.confidence_bin(0.3) == 3
    assert annotate.confidence_bin(0.7) == 7
    with pytest.raises(InputError):
        annotate.confidence_histogram([0.5], bin_width=0.3)


def test_histogram_from_frames():
    frames = [frame(np.ones((2, 2)), np.full((2, 2), v)) for v in (0.05, 0.15, 0.15, 0.95)]
    assert annotate.confidence_histogram(frames) == [1, 2, 0, 0, 0, 0, 0, 0, 0, 1]


def test_histogram_flat_for_uniform_means():
    # ten frames per bin, means placed inside each bin
    means = [(k + (i + 0.5) / 10) / 10 for k in range(10) for i in range(10)]
    frames = [frame(np.ones((2, 2)), np.full((2, 2), m)) for m in means]
    assert annotate.confidence_histogram(frames) == [10] * 10


def test_normalize_depth_examples():
    (out,) = annotate.normalize_depth([frame(np.array([[1.0, 4.0], [2.0, 0.0]]))])
    np.testing.assert_array_equal(out, [[0.25, 1.0], [0.5, 0.0]])
    a, b = annotate.normalize_depth([frame(np.full((2, 2), 2.0)), frame(np.full((2, 2), 8.0))])
    assert np.all(a == 0.25) and np.all(b == 1.0)
    (c,) = annotate.normalize_depth([frame(np.full((3, 3), 3.3))])
    assert np.all(c == 1.0)
    with pytest.raises(DegenerateDepthError):
        annotate.normalize_depth([frame(np.zeros((2, 2)))])


@given(hnp.arrays(np.float64, (2, 3, 4), elements=st.floats(0.0, 50.0)), st.floats(0.1, 10.0))
def test_normalize_idempotent_and_scale_free(stack, c):
    if stack.max() <= 0:
        return
    once = annotate.normalize_depth(list(stack))
    twice = annotate.normalize_depth(once)
    for a, b in zip(once, twice):
        np.testing.assert_array_equal(a, b)
    scaled = annotate.normalize_depth(list(stack * c))
    for a, b in zip(once, scaled):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)
    assert max(float(a.max()) for a in once) == 1.0


def test_proximity_uses_metric_depth():
    d = np.full((3, 3), 1.0)
    assert annotate.proximity_label(frame(d)) == "Close"
    assert annotate.proximity_label(frame(d * 10)) == "Far"


def test_annotate_frames_rows():
    rows = annotate.annotate_frames("c", [frame(np.ones((2, 2)))], "Outdoors", "CM+MO")
    assert rows == [{"clip": "c", "index": 0, "proximity": "Close", "environment": "Outdoors",
                     "motion": "CM+MO", "mean_confidence": 0.5}]
    with pytest.raises(InputError):
        annotate.annotate_frames("c", [frame(np.ones((2, 2)))], "Space", "CM")
