"""Общие фикстуры: синтетические RPC-модели и сцены с известной геометрией."""

from __future__ import annotations

import logging

import numpy as np
import pytest

from project.geo.utm import LocalUtmFrame
from project.mvs.schedule import SweepConfig
from project.synthetic.projectors import PinholeProjector, PushbroomProjector
from project.synthetic.rpcgen import GroundCube, gen_rpc_from_projector
from project.synthetic.scene import SceneParams, gen_scene

logging.basicConfig(level=logging.INFO)

CENTER_LAT = 40.0
CENTER_LON = 116.5


@pytest.fixture(scope="session")
def local_frame() -> LocalUtmFrame:
    return LocalUtmFrame.at(CENTER_LAT, CENTER_LON)


def make_pushbroom_rpc(frame, along_angle=0.0, size=1024, half=1600.0, heights=(0.0, 500.0), orbit_height=500000.0):
    proj = PushbroomProjector(
        frame=frame,
        width=size,
        height=size,
        gsd=2.5,
        along_angle=along_angle,
        orbit_height=orbit_height,
        ref_height=(heights[0] + heights[1]) / 2.0,
    )
    cube = GroundCube.around(frame, half, half, *heights)
    model, report = gen_rpc_from_projector(proj, cube)
    return proj, model, report


@pytest.fixture(scope="session")
def pushbroom(local_frame):
    """(projector, RPC, report) наклонного снимка 1024×1024."""
    return make_pushbroom_rpc(local_frame, along_angle=20.0)


@pytest.fixture(scope="session")
def pushbroom_rpc(pushbroom):
    return pushbroom[1]


@pytest.fixture(scope="session")
def stereo_triplet(local_frame):
    """Надир, вперёд и назад: три (projector, RPC) с общим кубом."""
    return [make_pushbroom_rpc(local_frame, along_angle=a)[:2] for a in (0.0, 20.0, -20.0)]


@pytest.fixture(scope="session")
def wide_pushbroom_rpc(local_frame):
    """RPC, покрывающая фрагменты до 9216 px (≈23 км)."""
    return make_pushbroom_rpc(local_frame, along_angle=20.0, size=9216, half=12500.0)[1]


@pytest.fixture(scope="session")
def pinhole_rpc(local_frame):
    """RPC, подобранная к точной камере-обскуре."""
    proj = PinholeProjector.looking_at(
        local_frame,
        width=512,
        height=512,
        focal=8000.0,
        center=(0.0, -3000.0, 8000.0),
        target=(0.0, 0.0, 250.0),
    )
    cube = GroundCube.around(local_frame, 400.0, 400.0, 0.0, 500.0)
    model, report = gen_rpc_from_projector(proj, cube)
    return proj, model, report


@pytest.fixture(scope="session")
def small_scene_params() -> SceneParams:
    return SceneParams(
        center_lat=CENTER_LAT,
        center_lon=CENTER_LON,
        size_px=128,
        gsd=2.5,
        base_height=100.0,
        relief=60.0,
        n_bumps=3,
        view_angles=(0.0, 15.0, -15.0),
        cell_size=5.0,
    )


@pytest.fixture(scope="session")
def small_scene(small_scene_params):
    return gen_scene(7, small_scene_params)


@pytest.fixture
def fast_sweep() -> SweepConfig:
    return SweepConfig(
        scales=(0.25, 1.0),
        plane_counts=(24, 8),
        intervals=(None, 1.5),
        aggregation_radius=2,
        temperature=0.1,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
