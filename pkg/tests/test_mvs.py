"""Плоскостная развёртка: расписание, признаки, стоимость, агрегация, регрессия высот."""

import json
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest

from project.mvs.cost import INVALID_COST, CostVolume, PlaneWarper, aggregate_cost, sweep_stage
from project.mvs.errors import EmptyCostVolumeError, ScheduleError, SweepError
from project.mvs.features import CHANNELS, block_reduce, extract_features, rescale_map
from project.mvs.io import read_height_map, read_pfm, write_height_map, write_pfm
from project.mvs.multistage import common_height_range, run_multistage, run_stages
from project.mvs.regression import HeightMap, soft_argmin, zscore_costs
from project.mvs.schedule import Centering, SweepConfig, build_schedule
from project.synthetic.scene import SceneParams, gen_scene
from project.utils.images import ImageFormatError
from project.warp.warping import CoordMap


class ShiftWarper(PlaneWarper):
    """Source k is read ``shifts[k]`` columns to the right, whatever the plane."""

    def __init__(self, shape, shifts):
        self.base = CoordMap.identity(*shape)
        self.shifts = shifts

    @property
    def n_sources(self) -> int:
        return len(self.shifts)

    def coord_map(self, k, hei):
        return CoordMap(self.base.samp + self.shifts[k], self.base.line, self.base.valid)


def volume(values, heights, valid=None, min_valid_views=2):
    values = np.asarray(values, dtype=np.float64)
    count = np.full(values.shape, 3) if valid is None else np.where(valid, 3, 0)
    return CostVolume(values, np.asarray(heights, dtype=np.float64), count, min_valid_views)


# --- schedule ------------------------------------------------------------------


def test_default_schedule():
    schedule = build_schedule(0.0, 640.0)
    assert [s.scale for s in schedule.stages] == [0.0625, 0.25, 1.0]
    assert [s.factor for s in schedule.stages] == [16, 4, 1]
    assert schedule.stages[0].interval == 10.0
    assert schedule.stages[0].centering is Centering.GLOBAL
    assert schedule.stages[2].centering is Centering.PREVIOUS
    planes = schedule.global_planes()
    assert planes[0] == 0.0 and planes[-1] == 640.0 and planes.size == 64
    assert json.loads(json.dumps(schedule.to_dict()))["stages"][1]["interval"] == 5.0


def test_planes_around_keep_count_and_shift_at_bounds():
    schedule = build_schedule(0.0, 100.0, SweepConfig(scales=(0.5, 1.0), plane_counts=(10, 5), intervals=(None, 2.0)))
    center = np.array([[50.0, 1.0], [99.5, 51.0]])
    planes = schedule.planes_around(1, center)
    assert planes.shape == (5, 2, 2)
    np.testing.assert_allclose(planes[:, 0, 0], [46, 48, 50, 52, 54])
    np.testing.assert_allclose(planes[:, 0, 1], [0, 2, 4, 6, 8])
    np.testing.assert_allclose(planes[:, 1, 0], [92, 94, 96, 98, 100])
    np.testing.assert_allclose(np.diff(planes, axis=0), 2.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(scales=(0.25, 0.5)),
        dict(scales=(0.5, 0.25, 1.0)),
        dict(scales=(0.3, 1.0), plane_counts=(8, 8), intervals=(None, 1.0)),
        dict(plane_counts=(64, 1, 8)),
        dict(intervals=(None, None, 2.5)),
        dict(intervals=(None, -1.0, 2.5)),
        dict(temperature=0.0),
        dict(min_valid_views=0),
        dict(view_count=1),
        dict(scales=(1.0,), plane_counts=(8, 8), intervals=(None,)),
    ],
)
def test_sweep_config_validation(kwargs):
    with pytest.raises(ScheduleError):
        SweepConfig(**kwargs)


def test_schedule_rejects_empty_range():
    with pytest.raises(ScheduleError):
        build_schedule(5.0, 5.0)
    with pytest.raises(ValueError):
        build_schedule(0.0, float("nan"))


# --- features ------------------------------------------------------------------


def test_block_reduce_means_and_trims():
    img = np.arange(30.0).reshape(5, 6)
    out = block_reduce(img, 2)
    assert out.shape == (2, 3)
    assert out[0, 0] == np.mean([0, 1, 6, 7])
    np.testing.assert_array_equal(block_reduce(img, 1), img)


def test_rescale_map_aligns_pixel_centers():
    coarse = np.add.outer(np.arange(4.0), np.arange(4.0))
    assert np.array_equal(rescale_map(coarse, 4, 4, (4, 4)), coarse)
    fine = rescale_map(coarse, 4, 1, (16, 16))
    # full-resolution center of coarse pixel u is 4u + 1.5
    assert fine[5, 5] == pytest.approx(2 * (5 - 1.5) / 4)


def test_extract_features_shapes_and_normalization(rng):
    img = rng.uniform(size=(64, 48))
    pyramid = extract_features(img, (0.25, 0.5, 1.0))
    assert [f.shape for f in pyramid] == [(3, 16, 12), (3, 32, 24), (3, 64, 48)]
    assert len(CHANNELS) == 3
    full = pyramid[-1]
    np.testing.assert_allclose(full.mean(axis=(1, 2)), 0.0, atol=1e-12)
    np.testing.assert_allclose(full.std(axis=(1, 2)), 1.0)
    with pytest.raises(ValueError):
        extract_features(np.zeros((2, 4, 4)), (1.0,))


def test_constant_image_features_are_zero():
    feats = extract_features(np.full((8, 8), 0.5), (1.0,))[0]
    assert np.all(feats == 0.0)


# --- cost ----------------------------------------------------------------------


def test_identical_views_cost_nothing(rng):
    ref = rng.normal(size=(3, 10, 12))
    vol = sweep_stage(ref, [ref, ref], None, np.array([1.0, 2.0]), warper=ShiftWarper((10, 12), [0.0, 0.0]))
    assert vol.valid.all()
    np.testing.assert_allclose(vol.values, 0.0, atol=1e-24)


def test_cost_is_source_order_invariant(rng):
    ref = rng.normal(size=(3, 10, 12))
    a = rng.normal(size=(3, 10, 12))
    b = rng.normal(size=(3, 10, 12))
    planes = np.array([0.0, 1.0, 2.0])
    ab = sweep_stage(ref, [a, b], None, planes, warper=ShiftWarper((10, 12), [0.5, 2.0]))
    ba = sweep_stage(ref, [b, a], None, planes, warper=ShiftWarper((10, 12), [2.0, 0.5]))
    np.testing.assert_array_equal(ab.values, ba.values)
    np.testing.assert_array_equal(ab.valid_count, ba.valid_count)


def test_cost_masks_pixels_seen_by_too_few_views(rng):
    ref = rng.normal(size=(3, 6, 8))
    vol = sweep_stage(ref, [ref], None, np.array([0.0]), warper=ShiftWarper((6, 8), [3.0]))
    assert vol.valid[0, :, :5].all()
    assert not vol.valid[0, :, 5:].any()
    assert np.all(vol.values[0, :, 5:] == INVALID_COST)


def test_sweep_is_thread_independent(rng):
    ref = rng.normal(size=(3, 10, 12))
    srcs = [rng.normal(size=(3, 10, 12)) for _ in range(2)]
    planes = np.arange(6.0)
    warper = ShiftWarper((10, 12), [0.3, 1.7])
    one = sweep_stage(ref, srcs, None, planes, warper=warper, threads=1)
    many = sweep_stage(ref, srcs, None, planes, warper=warper, threads=4)
    np.testing.assert_array_equal(one.values, many.values)


def test_empty_cost_volume(stereo_triplet):
    (_, ref), (_, src), _ = stereo_triplet
    feats = extract_features(np.random.default_rng(0).uniform(size=(16, 16)), (1.0,))[0]
    far = src.shifted(-5000.0, 0.0)
    with pytest.raises(EmptyCostVolumeError):
        sweep_stage(feats, [feats], [ref, far], np.array([100.0, 200.0]))


def test_sweep_stage_argument_checks(rng):
    ref = rng.normal(size=(3, 4, 4))
    with pytest.raises(SweepError):
        sweep_stage(ref, [], None, np.array([0.0]))
    with pytest.raises(SweepError):
        sweep_stage(ref, [ref], None, np.array([0.0]))
    with pytest.raises(SweepError):
        sweep_stage(ref, [ref], None, np.array([np.nan]), warper=ShiftWarper((4, 4), [0.0]))


def test_cost_volume_shape_checks():
    with pytest.raises(SweepError):
        CostVolume(np.zeros((2, 3, 3)), np.zeros(3), np.zeros((2, 3, 3)))
    with pytest.raises(SweepError):
        CostVolume(np.zeros((2, 3, 3)), np.zeros(2), np.zeros((2, 3, 4)))


def test_aggregate_cost_ignores_invalid_cells():
    values = np.ones((1, 5, 5))
    values[0, 2, 2] = 100.0
    valid = np.ones((1, 5, 5), dtype=bool)
    valid[0, 2, 2] = False
    vol = aggregate_cost(volume(values, [0.0], valid), 1)
    assert vol.values[0, 2, 2] == INVALID_COST
    np.testing.assert_allclose(vol.values[0][valid[0]], 1.0)
    same = volume(values, [0.0])
    assert aggregate_cost(same, 0) is same
    with pytest.raises(ValueError):
        aggregate_cost(same, -1)


# --- regression ----------------------------------------------------------------


def test_soft_argmin_one_hot():
    heights = np.array([10.0, 20.0, 30.0, 40.0])
    cost = np.full((4, 1, 1), 50.0)
    cost[2] = 0.0
    hmap = soft_argmin(volume(cost, heights), temperature=1.0)
    assert hmap.height[0, 0] == pytest.approx(30.0)
    assert hmap.valid.all()


def test_soft_argmin_uniform_and_two_minima():
    heights = np.array([10.0, 20.0, 30.0, 40.0])
    uniform = soft_argmin(volume(np.zeros((4, 1, 1)), heights))
    assert uniform.height[0, 0] == pytest.approx(25.0)
    cost = np.array([50.0, 0.0, 50.0, 0.0]).reshape(4, 1, 1)
    two = soft_argmin(volume(cost, heights), temperature=0.5)
    assert two.height[0, 0] == pytest.approx(30.0)


def test_soft_argmin_skips_invalid_planes_and_pixels():
    heights = np.array([10.0, 20.0, 30.0])
    cost = np.zeros((3, 1, 2))
    valid = np.ones((3, 1, 2), dtype=bool)
    valid[0, 0, 0] = False
    valid[:, 0, 1] = False
    hmap = soft_argmin(volume(cost, heights, valid))
    assert hmap.height[0, 0] == pytest.approx(25.0)
    assert not hmap.valid[0, 1] and np.isnan(hmap.height[0, 1])
    with pytest.raises(ValueError):
        soft_argmin(volume(cost, heights), temperature=0.0)


def test_soft_argmin_stays_inside_plane_range():
    planes = np.stack([np.full((2, 2), h) for h in (5.0, 6.0, 7.0)])
    hmap = soft_argmin(volume(np.array([0.0, 1.0, 2.0])[:, None, None] * np.ones((3, 2, 2)), planes), 0.01)
    assert np.all(hmap.height >= 5.0) and np.all(hmap.height <= 7.0)


def test_zscore_costs():
    cost = np.array([1.0, 2.0, 3.0, 99.0]).reshape(4, 1, 1) * np.ones((4, 1, 2))
    valid = np.ones((4, 1, 2), dtype=bool)
    valid[3] = False
    cost[:, 0, 1] = 7.0
    z = zscore_costs(volume(cost, np.arange(4.0), valid))
    col = z.values[:3, 0, 0]
    assert col.mean() == pytest.approx(0.0, abs=1e-12)
    assert col.std() == pytest.approx(1.0)
    assert z.values[3, 0, 0] == INVALID_COST
    np.testing.assert_array_equal(z.values[:3, 0, 1], 0.0)


# --- multi-stage sweep ---------------------------------------------------------


def test_common_height_range(stereo_triplet):
    rpcs = [m for _, m in stereo_triplet]
    assert common_height_range(rpcs) == (0.0, 500.0)
    with pytest.raises(SweepError):
        common_height_range([rpcs[0], SimpleNamespace(height_range=(600.0, 700.0))])


def test_flat_terrain(fast_sweep):
    params = SceneParams(size_px=96, base_height=500.0, relief=0.0, n_bumps=0, view_angles=(0.0, 15.0, -15.0))
    scene = gen_scene(11, params)
    hmap = run_multistage(scene.images[0], scene.images[1:], scene.rpcs, fast_sweep)
    inner = hmap.valid[8:-8, 8:-8]
    err = np.abs(hmap.height[8:-8, 8:-8][inner] - 500.0)
    assert inner.mean() > 0.9
    assert np.percentile(err, 90) <= 1.25


@pytest.mark.slow
def test_multistage_recovers_relief(small_scene):
    cfg = SweepConfig(scales=(0.25, 0.5, 1.0), plane_counts=(32, 12, 8), intervals=(None, 3.0, 1.0), temperature=0.1)
    maps, schedule = run_stages(small_scene.images[0], small_scene.images[1:], small_scene.rpcs, cfg)
    assert [m.shape for m in maps] == [(32, 32), (64, 64), (128, 128)]
    assert [m.scale for m in maps] == [0.25, 0.5, 1.0]
    assert schedule.d_min == small_scene.cube.h_min
    truth = small_scene.renders[0].height
    final = maps[-1]
    sl = (slice(6, -6), slice(6, -6))
    ok = final.valid[sl] & np.isfinite(truth[sl])
    err = np.abs(final.height[sl][ok] - truth[sl][ok])
    assert ok.mean() > 0.9
    assert np.median(err) < 3.0


def test_run_stages_view_count_and_checks(small_scene, fast_sweep):
    imgs, rpcs = small_scene.images, small_scene.rpcs
    cfg = replace(fast_sweep, view_count=2)
    maps, _ = run_stages(imgs[0], imgs[1:], rpcs, cfg)
    assert maps[-1].shape == (128, 128)
    with pytest.raises(SweepError):
        run_stages(imgs[0], imgs[1:], rpcs[:2], fast_sweep)
    with pytest.raises(SweepError):
        run_stages(imgs[0], [], rpcs[:1], fast_sweep)


# --- height map files ----------------------------------------------------------


def test_pfm_round_trip(tmp_path):
    values = np.array([[1.5, np.nan, -2.0], [1e6, 0.0, 3.25]])
    read = read_pfm(write_pfm(tmp_path / "a.pfm", values))
    np.testing.assert_array_equal(np.isnan(read), np.isnan(values))
    np.testing.assert_array_equal(read[~np.isnan(values)], values[~np.isnan(values)])
    assert (tmp_path / "a.pfm").read_bytes().startswith(b"Pf\n3 2\n-1.0\n")


def test_height_map_sidecar(tmp_path):
    schedule = build_schedule(0.0, 100.0)
    hmap = HeightMap(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[True, False], [True, True]]), scale=0.25)
    path = write_height_map(tmp_path / "h.pfm", hmap, schedule)
    meta = json.loads((tmp_path / "h.pfm.json").read_text())
    assert meta["valid_pixels"] == 3
    assert meta["schedule"]["d_max"] == 100.0
    back = read_height_map(path)
    assert back.scale == 0.25
    np.testing.assert_array_equal(back.valid, hmap.valid)


@pytest.mark.parametrize("payload", [b"PF\n1 1\n-1.0\n" + b"\0" * 12, b"Pf\n2 2\n-1.0\n" + b"\0" * 4, b"Pf\n"])
def test_pfm_errors(tmp_path, payload):
    path = tmp_path / "bad.pfm"
    path.write_bytes(payload)
    with pytest.raises(ImageFormatError):
        read_pfm(path)
