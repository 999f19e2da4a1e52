"""Randomized kernel-vs-oracle checks shared by the CLI and the test suite."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from blurforge.kernels import dat, ops, oracles, shift
from blurforge.kernels.dat import DatWeights
from blurforge.kernels.shift import GssConfig, ShiftDirection

REL_TOL = 1e-5
ROW_TOL = 1e-6
PERM_TOL = 1e-6


def rel_dev(got: np.ndarray, want: np.ndarray) -> float:
    """Max absolute deviation relative to the largest oracle magnitude."""
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    scale = max(float(np.max(np.abs(want))), 1e-30)
    return float(np.max(np.abs(got - want))) / scale


def abs_dev(got: np.ndarray, want: np.ndarray) -> float:
    return float(np.max(np.abs(np.asarray(got, dtype=np.float64) - np.asarray(want, dtype=np.float64))))


@dataclass
class Check:
    name: str
    tolerance: float
    metric: str = "abs"
    cases: int = 0
    max_deviation: float = 0.0

    def record(self, dev: float) -> None:
        self.cases += 1
        self.max_deviation = max(self.max_deviation, dev)

    @property
    def passed(self) -> bool:
        return self.cases > 0 and self.max_deviation <= self.tolerance

    def to_dict(self) -> dict:
        return {"name": self.name, "metric": self.metric, "tolerance": self.tolerance, "cases": self.cases,
                "max_deviation": self.max_deviation, "passed": self.passed}


@dataclass
class Suite:
    checks: dict[str, Check] = field(default_factory=dict)

    def check(self, name: str, tolerance: float, metric: str = "abs") -> Check:
        if name not in self.checks:
            self.checks[name] = Check(name, tolerance, metric)
        return self.checks[name]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())


def random_tensor(rng: np.random.Generator, shape, dtype=np.float32) -> np.ndarray:
    return rng.standard_normal(shape).astype(dtype)


def random_gss(rng: np.random.Generator, channels: int, h: int, w: int) -> GssConfig:
    cuts = np.sort(rng.integers(0, channels + 1, size=int(rng.integers(0, 4))))
    sizes = np.diff(np.concatenate([[0], cuts, [channels]]))
    groups = [(int(n), int(rng.integers(-w - 1, w + 2)), int(rng.integers(-h - 1, h + 2))) for n in sizes]
    return GssConfig(tuple(groups))


def pointwise(w: DatWeights) -> DatWeights:
    """Same weights with every depth-wise kernel reduced to its centre tap."""
    def centre(k):
        out = np.zeros_like(k)
        out[:, 1, 1] = k[:, 1, 1]
        return out
    return w.replace(q_dw=centre(w.q_dw), k_dw=centre(w.k_dw), v_dw=centre(w.v_dw),
                     w1_dw=centre(w.w1_dw), w2_dw=centre(w.w2_dw))


def shift_checks(suite: Suite, rng: np.random.Generator, cases: int) -> None:
    for _ in range(cases):
        t = int(rng.integers(1, 5))
        c = 2 * int(rng.integers(1, 5))
        h, w = (int(v) for v in rng.integers(1, 6, size=2))
        f = random_tensor(rng, (t, c, h, w))

        for d in ShiftDirection:
            suite.check("temporal_shift_oracle", 0.0).record(
                abs_dev(shift.temporal_shift(f, d), oracles.temporal_shift(f, d.sign)))
        round_trip = shift.temporal_shift(shift.temporal_shift(f, ShiftDirection.FORWARD), ShiftDirection.BACKWARD)
        suite.check("temporal_shift_inverse", 0.0).record(abs_dev(round_trip, f))
        single = f[:1]
        suite.check("temporal_shift_single_frame", 0.0).record(
            abs_dev(shift.temporal_shift(single, ShiftDirection.FORWARD), single))

        cfg = random_gss(rng, c, h, w)
        suite.check("gss_oracle", 0.0).record(
            abs_dev(shift.grouped_spatial_shift(f, cfg), oracles.grouped_spatial_shift(f, cfg.groups)))
        zero_cfg = GssConfig(tuple((n, 0, 0) for n, _, _ in cfg.groups))
        suite.check("gss_zero_offset_identity", 0.0).record(abs_dev(shift.grouped_spatial_shift(f, zero_cfg), f))
        suite.check("gss_zero_tensor", 0.0).record(
            abs_dev(shift.grouped_spatial_shift(np.zeros_like(f), cfg), np.zeros_like(f)))
        far = GssConfig(((c, w, 0),))
        suite.check("gss_out_of_bounds", 0.0).record(
            abs_dev(shift.grouped_spatial_shift(f, far), np.zeros_like(f)))

        for d in ShiftDirection:
            sel, rest = shift.select_shift_half(f, d)
            parts = (sel, rest) if d is ShiftDirection.FORWARD else (rest, sel)
            suite.check("select_half_reconstruct", 0.0).record(abs_dev(np.concatenate(parts, axis=1), f))
        g = random_tensor(rng, (t, int(rng.integers(1, 4)), h, w))
        suite.check("concat_oracle", 0.0).record(
            abs_dev(shift.concat_channels(f, g), oracles.concat_channels(f, g)))


def primitive_checks(suite: Suite, rng: np.random.Generator, cases: int) -> None:
    for _ in range(cases):
        c, co = (int(v) for v in rng.integers(1, 5, size=2))
        h, w = (int(v) for v in rng.integers(1, 5, size=2))
        x = random_tensor(rng, (c, h, w))
        wt = random_tensor(rng, (co, c))
        b = random_tensor(rng, (co,))
        suite.check("conv1x1_oracle", REL_TOL, "rel").record(rel_dev(ops.conv1x1(x, wt, b), oracles.conv1x1(x, wt, b)))
        k = random_tensor(rng, (c, 3, 3))
        suite.check("dwconv3x3_oracle", REL_TOL, "rel").record(rel_dev(ops.dwconv3x3(x, k), oracles.dwconv3x3(x, k)))
        lw, lb = random_tensor(rng, (c,)), random_tensor(rng, (c,))
        suite.check("layer_norm_oracle", REL_TOL, "rel").record(
            rel_dev(ops.layer_norm(x, lw, lb), oracles.layer_norm(x, lw, lb)))
        m = random_tensor(rng, (c, co)) * 3
        suite.check("softmax_oracle", REL_TOL, "rel").record(rel_dev(ops.softmax(m, axis=1), oracles.softmax_rows(m)))
        suite.check("gelu_oracle", REL_TOL, "rel").record(rel_dev(ops.gelu(x), oracles.gelu(x)))


def random_dat_case(rng: np.random.Generator, depth_factor: int = 1):
    heads = int(rng.integers(1, 3))
    ci = heads * int(rng.integers(1, 3))
    cd = heads * int(rng.integers(1, 3))
    h, w = (int(v) for v in rng.integers(1, 4, size=2))
    weights = DatWeights.random(ci, cd * depth_factor, heads=heads, expansion=2, rng=rng)
    weights = weights.astype(np.float32)
    f_img = random_tensor(rng, (ci, h, w))
    f_depth = random_tensor(rng, (cd, h, w))
    return weights, f_img, f_depth


def dat_checks(suite: Suite, rng: np.random.Generator, cases: int) -> None:
    for _ in range(cases):
        wts, f_img, f_depth = random_dat_case(rng)
        got, maps = dat.cross_attention(f_img, f_depth, wts, return_attention=True)
        want, want_maps = oracles.cross_attention(f_img, f_depth, wts, return_attention=True)
        suite.check("cross_attention_oracle", REL_TOL, "rel").record(rel_dev(got, want))
        suite.check("attention_map_oracle", REL_TOL, "rel").record(
            max(rel_dev(a, b) for a, b in zip(maps, want_maps)))
        suite.check("attention_rows_sum_to_one", ROW_TOL).record(
            max(abs_dev(a.astype(np.float64).sum(axis=1), np.ones(a.shape[0])) for a in maps))

        pw = pointwise(wts)
        _, h, w = f_img.shape
        perm = rng.permutation(h * w)

        def permute(x):
            return x.reshape(x.shape[0], -1)[:, perm].reshape(x.shape)

        base, base_maps = dat.cross_attention(f_img, f_depth, pw, return_attention=True)
        moved, moved_maps = dat.cross_attention(permute(f_img), permute(f_depth), pw, return_attention=True)
        dev = max(abs_dev(moved, permute(base)), max(abs_dev(a, b) for a, b in zip(moved_maps, base_maps)))
        suite.check("cross_attention_permutation_equivariance", PERM_TOL).record(dev)

        z = random_tensor(rng, f_img.shape)
        suite.check("sft_oracle", REL_TOL, "rel").record(
            rel_dev(dat.sft_modulate(f_img, z, wts), oracles.sft_modulate(f_img, z, wts)))
        suite.check("gdfn_oracle", REL_TOL, "rel").record(rel_dev(dat.gdfn(f_img, wts), oracles.gdfn(f_img, wts)))
        suite.check("dat_block_oracle", REL_TOL, "rel").record(
            rel_dev(dat.dat_block(f_img, f_depth, wts), oracles.dat_block(f_img, f_depth, wts)))

        ci = wts.c_image
        sft_id = wts.replace(gamma_w2=np.zeros((ci, ci), np.float32), gamma_b2=np.ones(ci, np.float32),
                             beta_w2=np.zeros((ci, ci), np.float32), beta_b2=np.zeros(ci, np.float32))
        suite.check("sft_identity", 0.0).record(abs_dev(dat.sft_modulate(f_img, z, sft_id), f_img))
        gdfn_id = wts.replace(w0=np.zeros_like(wts.w0))
        suite.check("gdfn_identity_zero_output_weights", 0.0).record(abs_dev(dat.gdfn(f_img, gdfn_id), f_img))
        gate_id = wts.replace(w1_pw=np.zeros_like(wts.w1_pw))
        suite.check("gdfn_identity_zero_gate", 0.0).record(abs_dev(dat.gdfn(f_img, gate_id), f_img))

        wg, g_img, g_depth = random_dat_case(rng, depth_factor=2)
        cfg = random_gss(rng, g_depth.shape[0], *g_depth.shape[1:])
        suite.check("fuse_depth_oracle", REL_TOL, "rel").record(rel_dev(
            dat.fuse_depth(g_img, g_depth, wg, use_gss=True, gss=cfg),
            oracles.fuse_depth(g_img, g_depth, wg, True, cfg.groups)))


def run_suite(seed: int = 0, cases: int = 20) -> Suite:
    rng = np.random.default_rng(seed)
    suite = Suite()
    shift_checks(suite, rng, cases)
    primitive_checks(suite, rng, cases)
    dat_checks(suite, rng, cases)
    return suite
