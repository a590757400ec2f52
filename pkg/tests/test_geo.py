"""Блоки области интереса, фильтр согласованности, метрики ЦМР и конвейер целиком."""

import json
from dataclasses import replace

import numpy as np
import pytest
from jsonschema import ValidationError

from project import CONFIG_PATH
from project.config import default_config, load_config
from project.geo.blocks import (
    Aoi,
    CropSpec,
    DemHeightSource,
    GeoBlock,
    RpcHeightSource,
    block_partition,
    compute_crop,
    uniform_crops,
)
from project.geo.consistency import geometric_consistency_filter, reproject_through_view
from project.geo.dsm import AsciiGrid, Dsm, DsmGrid
from project.geo.errors import EmptyAoiError, GeometryMismatchError, NoOverlapError
from project.geo.metrics import align_to_grid, evaluate_dsm, write_metrics
from project.geo.pipeline import block_grid, dsm_grid_for_aoi, run_pipeline, save_result
from project.mvs.errors import SweepError
from project.mvs.regression import HeightMap
from project.synthetic.scene import SceneParams, gen_scene, scene_views
from project.warp.warping import PixelRect

AOI = Aoi(39.98, 40.02, 116.48, 116.52)


class FlatSource:
    def height_bounds(self, bounds):
        return 0.0, 10.0


def small_grid(rows=3, cols=4, easting=1000.0, zone=50) -> DsmGrid:
    return DsmGrid(zone=zone, northern=True, origin_easting=easting, origin_northing=5000.0, cell_size=2.0, rows=rows, cols=cols)


@pytest.fixture
def fast_config(fast_sweep):
    config = default_config()
    sweep = replace(
        config.sweep,
        scales=list(fast_sweep.scales),
        plane_counts=list(fast_sweep.plane_counts),
        intervals=list(fast_sweep.intervals),
        temperature=fast_sweep.temperature,
    )
    return replace(config, sweep=sweep, pipeline=replace(config.pipeline, block_size=1000.0))


# --- blocks --------------------------------------------------------------------


def test_block_partition_tiles_aoi_north_to_south():
    blocks = block_partition(AOI, 2000.0, FlatSource())
    # about 4.4 km by 3.4 km
    assert len(blocks) == 6
    assert [b.block_id for b in blocks] == list(range(6))
    first, last = blocks[0], blocks[-1]
    assert (first.lat_max, first.lon_min) == (AOI.lat_max, AOI.lon_min)
    assert (last.lat_min, last.lon_max) == (AOI.lat_min, AOI.lon_max)
    assert blocks[1].lon_min == blocks[0].lon_max
    assert blocks[1].lat_max == blocks[0].lat_max
    assert blocks[2].lat_max == blocks[0].lat_min
    area = sum((b.lat_max - b.lat_min) * (b.lon_max - b.lon_min) for b in blocks)
    assert area == pytest.approx((AOI.lat_max - AOI.lat_min) * (AOI.lon_max - AOI.lon_min))
    assert all((b.h_min, b.h_max) == (0.0, 10.0) for b in blocks)


def test_block_partition_rejects_bad_input():
    with pytest.raises(EmptyAoiError):
        block_partition(Aoi(40.0, 40.0, 116.0, 117.0), 1000.0, FlatSource())
    with pytest.raises(EmptyAoiError):
        block_partition(Aoi(40.0, float("nan"), 116.0, 117.0), 1000.0, FlatSource())
    with pytest.raises(ValueError):
        block_partition(AOI, 0.0, FlatSource())


def test_geo_block_validation():
    with pytest.raises(EmptyAoiError):
        GeoBlock(0, 40.0, 39.0, 116.0, 117.0, 0.0, 1.0)
    with pytest.raises(GeometryMismatchError):
        GeoBlock(0, 39.0, 40.0, 116.0, 117.0, 5.0, 1.0)


def test_rpc_height_source(stereo_triplet):
    source = RpcHeightSource([m for _, m in stereo_triplet])
    assert source.height_bounds(AOI) == (0.0, 500.0)
    with pytest.raises(GeometryMismatchError):
        RpcHeightSource([])


def test_dem_height_source():
    values = np.arange(16.0).reshape(4, 4) * 10.0
    dem = AsciiGrid(xllcorner=116.0, yllcorner=39.0, cellsize=0.5, values=values)
    bounds = Aoi(40.0, 40.9, 116.5, 117.0)
    assert DemHeightSource(dem).height_bounds(bounds) == (10.0, 50.0)
    assert DemHeightSource(dem, margin=5.0).height_bounds(bounds) == (5.0, 55.0)
    flat = DemHeightSource(AsciiGrid(116.0, 39.0, 0.5, np.full((4, 4), 7.0)))
    assert flat.height_bounds(bounds) == (6.5, 7.5)
    with pytest.raises(NoOverlapError):
        DemHeightSource(dem).height_bounds(Aoi(0.0, 1.0, 0.0, 1.0))
    with pytest.raises(NoOverlapError):
        DemHeightSource(AsciiGrid(116.0, 39.0, 0.5, np.full((4, 4), np.nan))).height_bounds(bounds)


def test_dem_cells_larger_than_the_block():
    """Блок меньше ячейки ЦМР и не содержит ни одного её центра."""
    values = np.arange(16.0).reshape(4, 4) * 10.0
    # centers at 40.075, 40.025, ... and 116.025, 116.075, ...
    dem = DemHeightSource(AsciiGrid(xllcorner=116.0, yllcorner=39.9, cellsize=0.05, values=values))
    assert dem.height_bounds(Aoi(40.03, 40.045, 116.055, 116.07)) == (49.5, 50.5)
    # straddles the row edge at 40.05: both rows count
    assert dem.height_bounds(Aoi(40.04, 40.06, 116.055, 116.07)) == (10.0, 50.0)

    blocks = block_partition(Aoi(40.03, 40.045, 116.055, 116.07), 3000.0, dem)
    assert len(blocks) == 1
    assert (blocks[0].h_min, blocks[0].h_max) == (49.5, 50.5)


def test_compute_crop_covers_projected_corners(stereo_triplet):
    _, rpc = stereo_triplet[1]
    block = GeoBlock(3, 39.995, 40.005, 116.495, 116.505, 100.0, 400.0)
    crop = compute_crop(rpc, block, pad=3, view_index=1)
    lat, lon = block.corners()
    for hei in (block.h_min, block.h_max):
        samp, line = rpc.project(lat, lon, np.full(4, hei))
        assert np.all(samp >= crop.rect.x0 + 3) and np.all(samp <= crop.rect.x0 + crop.rect.width - 4)
        assert np.all(line >= crop.rect.y0 + 3) and np.all(line <= crop.rect.y0 + crop.rect.height - 4)
    assert crop.view_index == 1
    s_min, s_max, l_min, l_max = crop.footprint
    assert crop.rect.x0 == int(np.floor(s_min)) - 3


def test_uniform_crops():
    footprint = (0.0, 0.0, 0.0, 0.0)
    crops = [
        CropSpec(0, PixelRect(20, 20, 10, 8), footprint),
        CropSpec(1, PixelRect(95, 0, 6, 12), footprint),
        CropSpec(2, PixelRect(200, 0, 6, 12), footprint),
    ]
    out = uniform_crops(crops, [(100, 100)] * 3)
    assert out[0].rect == PixelRect(20, 18, 10, 12)
    assert out[1].rect == PixelRect(90, 0, 10, 12)
    assert out[2] is None
    small = uniform_crops([CropSpec(0, PixelRect(0, 0, 50, 50), footprint)], [(20, 30)])
    assert small[0].rect == PixelRect(0, 0, 30, 20)
    assert uniform_crops([], []) == []


# --- consistency ---------------------------------------------------------------


def true_height_maps(scene) -> list[HeightMap]:
    return [HeightMap(r.height, r.valid) for r in scene.renders]


def test_round_trip_through_itself(small_scene):
    hmap = true_height_maps(small_scene)[0]
    rpc = small_scene.rpcs[0]
    dist, dh = reproject_through_view(hmap, rpc, hmap, rpc)
    inner = (slice(2, -2), slice(2, -2))
    assert np.nanmax(dist[inner]) < 1e-4
    assert np.nanmax(dh[inner]) < 1e-3


def test_consistent_maps_are_kept(small_scene):
    maps = true_height_maps(small_scene)
    filtered = geometric_consistency_filter(maps, small_scene.rpcs, 0, threshold=1.0)
    inner = filtered.valid[8:-8, 8:-8]
    assert inner.mean() >= 0.99
    np.testing.assert_array_equal(filtered.height[filtered.valid], maps[0].height[filtered.valid])


def test_perturbed_reference_is_rejected(small_scene):
    maps = true_height_maps(small_scene)
    maps[0] = HeightMap(maps[0].height + 30.0, maps[0].valid)
    filtered = geometric_consistency_filter(maps, small_scene.rpcs, 0, threshold=1.0)
    assert filtered.valid[8:-8, 8:-8].mean() <= 0.01
    assert np.all(np.isnan(filtered.height[~filtered.valid]))


def test_height_threshold_and_view_count(small_scene):
    maps = true_height_maps(small_scene)
    strict = geometric_consistency_filter(maps, small_scene.rpcs, 1, threshold=1.0, height_threshold=1.0, min_consistent_views=2)
    assert strict.valid[8:-8, 8:-8].mean() >= 0.95
    too_many = geometric_consistency_filter(maps, small_scene.rpcs, 1, min_consistent_views=3)
    assert not too_many.valid.any()


def test_infinite_threshold_returns_copy(small_scene):
    maps = true_height_maps(small_scene)
    out = geometric_consistency_filter(maps, small_scene.rpcs, 2, threshold=float("inf"))
    assert out.height is not maps[2].height
    np.testing.assert_array_equal(out.height, maps[2].height)
    np.testing.assert_array_equal(out.valid, maps[2].valid)


def test_consistency_argument_checks(small_scene):
    maps = true_height_maps(small_scene)
    with pytest.raises(GeometryMismatchError):
        geometric_consistency_filter(maps, small_scene.rpcs[:2], 0)
    with pytest.raises(GeometryMismatchError):
        geometric_consistency_filter(maps, small_scene.rpcs, 3)


# --- metrics -------------------------------------------------------------------


def test_constant_offset_metrics():
    grid = small_grid()
    gt = Dsm(grid, np.arange(12.0).reshape(3, 4))
    metrics = evaluate_dsm(Dsm(grid, gt.values + 3.0), gt)
    assert metrics.mae == pytest.approx(3.0)
    assert metrics.rmse == pytest.approx(3.0)
    assert metrics.pct_below_2_5 == 0.0
    assert metrics.pct_below_7_5 == 100.0
    assert metrics.completeness == 100.0
    assert (metrics.n_compared, metrics.n_reference) == (12, 12)


def test_metrics_thresholds_are_strict_and_completeness():
    grid = small_grid(1, 4)
    gt = Dsm(grid, np.zeros((1, 4)))
    est = Dsm(grid, np.array([[2.5, 1.0, 7.5, np.nan]]))
    metrics = evaluate_dsm(est, gt)
    assert metrics.pct_below_2_5 == pytest.approx(100.0 / 3)
    assert metrics.pct_below_7_5 == pytest.approx(200.0 / 3)
    assert metrics.completeness == 75.0
    assert metrics.mae == pytest.approx(11.0 / 3)


def test_align_to_grid():
    gt = Dsm(small_grid(), np.zeros((3, 4)))
    shifted = Dsm(small_grid(easting=1002.0), np.arange(12.0).reshape(3, 4))
    aligned = align_to_grid(shifted, gt)
    assert np.all(np.isnan(aligned[:, 0]))
    np.testing.assert_array_equal(aligned[:, 1:], shifted.values[:, :-1])
    assert align_to_grid(gt, gt) is gt.values
    with pytest.raises(GeometryMismatchError):
        align_to_grid(Dsm(small_grid(zone=51), np.zeros((3, 4))), gt)


def test_evaluate_without_overlap():
    gt = Dsm(small_grid(), np.zeros((3, 4)))
    with pytest.raises(NoOverlapError):
        evaluate_dsm(Dsm.empty(small_grid()), gt)
    with pytest.raises(NoOverlapError):
        evaluate_dsm(Dsm(small_grid(easting=2000.0), np.zeros((3, 4))), gt)


def test_write_metrics(tmp_path):
    grid = small_grid()
    metrics = evaluate_dsm(Dsm(grid, np.ones((3, 4))), Dsm(grid, np.zeros((3, 4))))
    path = write_metrics(tmp_path / "out" / "metrics.json", metrics, 1.5, [{"block_id": 2, "error": "boom"}], {"blocks": []})
    data = json.loads(path.read_text())
    assert data["metrics"]["mae"] == 1.0
    assert data["failures"][0]["block_id"] == 2
    assert data["blocks"] == []
    assert json.loads(write_metrics(tmp_path / "none.json", None, 0.0).read_text())["metrics"] is None
    with pytest.raises(ValidationError):
        write_metrics(tmp_path / "bad.json", metrics, -1.0)
    with pytest.raises(ValidationError):
        write_metrics(tmp_path / "bad.json", metrics, 0.0, [{"block_id": "two", "error": ""}])


# --- pipeline ------------------------------------------------------------------


def test_dsm_grid_for_aoi(small_scene):
    grid = dsm_grid_for_aoi(small_scene.aoi(), 5.0)
    assert (grid.zone, grid.northern) == (50, True)
    # 320 m nadir footprint
    assert 64 <= grid.cols <= 66 and 64 <= grid.rows <= 66


def test_pipeline_needs_two_views(small_scene):
    with pytest.raises(GeometryMismatchError):
        run_pipeline(scene_views(small_scene)[:1], small_scene.aoi())


def test_block_failures_are_recorded(small_scene, fast_config, monkeypatch):
    def failing(*args, **kwargs):
        raise SweepError("boom")

    monkeypatch.setattr("project.geo.pipeline.run_multistage", failing)
    config = replace(fast_config, pipeline=replace(fast_config.pipeline, block_size=200.0))
    result = run_pipeline(scene_views(small_scene), small_scene.aoi(), config)
    assert len(result.blocks) == 4
    assert all(b.status == "failed" for b in result.blocks)
    assert result.failures[0] == {"block_id": 0, "error": "SweepError: boom"}
    assert not result.dsm.valid.any()


def test_missing_heights_fail_only_that_block(small_scene, fast_config, monkeypatch):
    views = scene_views(small_scene)
    aoi = small_scene.aoi()
    rpc_heights = RpcHeightSource([v.rpc for v in views])

    class NorthHole:
        def height_bounds(self, bounds):
            if bounds.lat_max == aoi.lat_max:
                raise NoOverlapError("no DEM cells")
            return rpc_heights.height_bounds(bounds)

    def failing(*args, **kwargs):
        raise SweepError("boom")

    monkeypatch.setattr("project.geo.pipeline.elevation_source", lambda config, views: NorthHole())
    monkeypatch.setattr("project.geo.pipeline.run_multistage", failing)
    config = replace(fast_config, pipeline=replace(fast_config.pipeline, block_size=200.0))
    result = run_pipeline(views, aoi, config)
    assert [b.block_id for b in result.blocks] == [0, 1, 2, 3]
    errors = {f["block_id"]: f["error"] for f in result.failures}
    assert errors == {
        0: "NoOverlapError: no DEM cells",
        1: "NoOverlapError: no DEM cells",
        2: "SweepError: boom",
        3: "SweepError: boom",
    }
    assert result.blocks[0].block is None
    assert result.blocks[2].block.block_id == 2
    assert result.dsm.grid == dsm_grid_for_aoi(aoi, config.pipeline.cell_size)


def test_block_grid_is_a_window_of_the_mosaic():
    grid = dsm_grid_for_aoi(AOI, 5.0)
    block = GeoBlock(0, 40.0, 40.01, 116.49, 116.5, 0.0, 10.0)
    window = block_grid(grid, block)
    row0, col0 = window.offset_in(grid)
    assert 0 < window.rows < grid.rows and 0 < window.cols < grid.cols
    # about 1.1 km by 0.85 km plus one cell of margin on each side
    assert window.rows == pytest.approx(1110 / 5 + 2, abs=3)
    assert window.cols == pytest.approx(853 / 5 + 2, abs=3)
    assert row0 > 0 and col0 > 0


@pytest.mark.slow
def test_pipeline_on_small_scene(small_scene, fast_config, tmp_path):
    result = run_pipeline(scene_views(small_scene), small_scene.aoi(), fast_config, gt=small_scene.gt_dsm)
    assert [b.status for b in result.blocks] == ["ok"]
    assert result.failures == []
    metrics = result.metrics
    assert metrics is not None
    assert metrics.mae < 5.0
    assert metrics.completeness > 60.0

    out = save_result(result, tmp_path / "run")
    assert (out / "dsm.asc").exists() and (out / "dsm.asc.json").exists()
    assert sorted(p.name for p in (out / "heights").glob("*.pfm")) == [f"block000_view{i}.pfm" for i in range(3)]
    report = json.loads((out / "metrics.json").read_text())
    assert report["blocks"] == [{"block_id": 0, "status": "ok"}]
    assert report["metrics"]["mae"] == pytest.approx(metrics.mae)


@pytest.mark.slow
def test_pipeline_is_thread_independent(small_scene, fast_config):
    config = replace(fast_config, pipeline=replace(fast_config.pipeline, block_size=200.0))
    views = scene_views(small_scene)
    one = run_pipeline(views, small_scene.aoi(), config, threads=1)
    many = run_pipeline(views, small_scene.aoi(), config, threads=4)
    assert len(one.blocks) == 4
    np.testing.assert_array_equal(one.dsm.values, many.dsm.values)


def test_metrics_match_brute_force(rng):
    grid = small_grid(20, 30)
    gt_values = rng.uniform(0, 100, grid.shape)
    gt_values[rng.uniform(size=grid.shape) < 0.1] = np.nan
    est_values = gt_values + rng.normal(0, 5, grid.shape)
    est_values[rng.uniform(size=grid.shape) < 0.2] = np.nan
    metrics = evaluate_dsm(Dsm(grid, est_values), Dsm(grid, gt_values))

    errors = []
    n_gt = 0
    for g, e in zip(gt_values.ravel(), est_values.ravel()):
        if np.isnan(g):
            continue
        n_gt += 1
        if not np.isnan(e):
            errors.append(abs(e - g))
    assert metrics.mae == pytest.approx(sum(errors) / len(errors), rel=1e-12)
    assert metrics.rmse == pytest.approx((sum(x * x for x in errors) / len(errors)) ** 0.5, rel=1e-12)
    assert metrics.pct_below_2_5 == pytest.approx(100.0 * sum(x < 2.5 for x in errors) / len(errors), rel=1e-12)
    assert metrics.pct_below_7_5 == pytest.approx(100.0 * sum(x < 7.5 for x in errors) / len(errors), rel=1e-12)
    assert metrics.completeness == pytest.approx(100.0 * len(errors) / n_gt, rel=1e-12)


@pytest.mark.slow
def test_full_size_scene_reconstruction():
    """Три вида 1024×1024, рельеф 300 м, шаг последней стадии 2.5 м."""
    config = load_config(CONFIG_PATH)
    scene = gen_scene(config.runtime.seed, SceneParams.from_config(config.synthetic), threads=4)
    result = run_pipeline(scene_views(scene), scene.aoi(), config, gt=scene.gt_dsm, threads=4)
    metrics = result.metrics
    assert result.failures == []
    assert metrics.mae <= 2.5
    assert metrics.pct_below_2_5 >= 80.0
    assert metrics.completeness >= 90.0
