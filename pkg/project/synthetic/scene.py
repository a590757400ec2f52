from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import NamedTuple, Optional, Union

import numpy as np
from jsonschema import validate

from project.geo.blocks import Aoi
from project.geo.dsm import Dsm, DsmGrid, read_dsm, write_dsm
from project.geo.pipeline import View
from project.geo.utm import LocalUtmFrame
from project.rpc.io import load_rpc, save_rpc
from project.rpc.model import RpcModel
from project.schemas.json_schemas import SCENE_MANIFEST_SCHEMA
from project.synthetic.projectors import AnalyticProjector, PushbroomProjector
from project.synthetic.rpcgen import GenerationReport, GroundCube, gen_rpc_from_projector
from project.utils.images import load_image, save_image
from project.utils.parallel import parallel_map, row_bands

logger = logging.getLogger(__name__)

RENDER_TOL = 1e-4
RENDER_SCAN_LEVELS = 32
CUBE_MARGIN = 1.25
HEIGHT_MARGIN = 20.0
TEXTURE_COMPONENTS = 32
TEXTURE_WAVELENGTHS = (8.0, 600.0)


@dataclass(frozen=True)
class SceneParams:
    """Scene parameters; relief must stay below the height span of the scene cube."""

    center_lat: float = 40.0
    center_lon: float = 116.5
    size_px: int = 1024
    gsd: float = 2.5
    base_height: float = 100.0
    relief: float = 300.0
    n_bumps: int = 6
    ramp: bool = False
    view_angles: tuple[float, ...] = (0.0, 22.0, -22.0)
    orbit_height: Optional[float] = 500000.0
    cell_size: float = 5.0
    texture_seed: Optional[int] = None

    def __post_init__(self):
        if self.size_px < 8:
            raise ValueError("size_px must be at least 8")
        if self.gsd <= 0 or self.cell_size <= 0:
            raise ValueError("gsd and cell_size must be positive")
        if self.relief < 0:
            raise ValueError("relief must be non-negative")
        if len(self.view_angles) < 2:
            raise ValueError("a scene needs at least two views")
        object.__setattr__(self, "view_angles", tuple(float(a) for a in self.view_angles))

    @classmethod
    def from_config(cls, section, **overrides) -> "SceneParams":
        names = {f.name for f in fields(cls)}
        values = {k: v for k, v in asdict(section).items() if k in names}
        values.update(overrides)
        return cls(**values)

    @property
    def half_extent(self) -> float:
        """Half side of the nadir footprint in meters."""
        return self.size_px * self.gsd / 2.0

    @property
    def ref_height(self) -> float:
        return self.base_height + self.relief / 2.0


@dataclass(frozen=True, eq=False)
class Terrain:
    """Gaussian bumps plus an optional planar ramp, rescaled to [base, base + relief]."""

    base_height: float
    relief: float
    bumps: np.ndarray  # (n, 4): x0, y0, sigma, amplitude
    ramp: Optional[tuple[float, float]]
    raw_min: float = 0.0
    raw_max: float = 0.0

    def raw(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        out = np.zeros(np.broadcast(x, y).shape)
        for x0, y0, sigma, amp in self.bumps:
            out = out + amp * np.exp(-((x - x0) ** 2 + (y - y0) ** 2) / (2.0 * sigma * sigma))
        if self.ramp is not None:
            out = out + self.ramp[0] * x + self.ramp[1] * y
        return out

    def height_local(self, x, y) -> np.ndarray:
        span = self.raw_max - self.raw_min
        if self.relief == 0 or span <= 0:
            return np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, float(self.base_height))
        t = np.clip((self.raw(x, y) - self.raw_min) / span, 0.0, 1.0)
        return self.base_height + self.relief * t


@dataclass(frozen=True, eq=False)
class Texture:
    """Band-limited sum of sinusoids in local meters, values in [0, 1]."""

    kx: np.ndarray
    ky: np.ndarray
    phase: np.ndarray
    amplitude: np.ndarray

    def __call__(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        acc = np.zeros(np.broadcast(x, y).shape)
        for kx, ky, ph, a in zip(self.kx, self.ky, self.phase, self.amplitude):
            acc = acc + a * np.sin(kx * x + ky * y + ph)
        sigma = math.sqrt(float(np.sum(self.amplitude**2)) / 2.0)
        return np.clip(0.5 + acc / (6.0 * sigma), 0.0, 1.0)


def make_terrain(rng: np.random.Generator, params: SceneParams) -> Terrain:
    half = params.half_extent
    side = 2.0 * half
    n = max(int(params.n_bumps), 0)
    bumps = np.column_stack(
        [
            rng.uniform(-half, half, n),
            rng.uniform(-half, half, n),
            rng.uniform(0.15 * side, 0.35 * side, n),
            rng.uniform(0.5, 1.0, n),
        ]
    ) if n else np.zeros((0, 4))
    ramp = None
    if params.ramp:
        angle = rng.uniform(0.0, 2.0 * math.pi)
        ramp = (math.cos(angle) / side, math.sin(angle) / side)

    terrain = Terrain(params.base_height, params.relief, bumps, ramp)
    # normalization over the extended footprint so oblique views stay inside the range
    axis = np.linspace(-half * CUBE_MARGIN, half * CUBE_MARGIN, 257)
    gx, gy = np.meshgrid(axis, axis)
    raw = terrain.raw(gx, gy)
    return replace(terrain, raw_min=float(raw.min()), raw_max=float(raw.max()))


def make_texture(rng: np.random.Generator, n_components: int = TEXTURE_COMPONENTS) -> Texture:
    lo, hi = TEXTURE_WAVELENGTHS
    wavelength = np.exp(rng.uniform(math.log(lo), math.log(hi), n_components))
    direction = rng.uniform(0.0, 2.0 * math.pi, n_components)
    k = 2.0 * math.pi / wavelength
    return Texture(
        kx=k * np.cos(direction),
        ky=k * np.sin(direction),
        phase=rng.uniform(0.0, 2.0 * math.pi, n_components),
        amplitude=np.sqrt(wavelength / hi),
    )


@dataclass(eq=False)
class RenderedView:
    image: np.ndarray
    valid: np.ndarray
    # terrain height seen by every pixel, NaN where the ray misses
    height: Optional[np.ndarray] = None


@dataclass(eq=False)
class SyntheticScene:
    seed: int
    params: SceneParams
    frame: LocalUtmFrame
    terrain: Terrain
    texture: Texture
    cube: GroundCube
    projectors: list[AnalyticProjector]
    rpcs: list[RpcModel] = field(default_factory=list)
    rpc_reports: list[GenerationReport] = field(default_factory=list)
    renders: list[RenderedView] = field(default_factory=list)
    gt_dsm: Optional[Dsm] = None

    @property
    def images(self) -> list[np.ndarray]:
        return [r.image for r in self.renders]

    def height(self, lat, lon) -> np.ndarray:
        x, y = self.frame.to_local(lat, lon)
        return self.terrain.height_local(x, y)

    def aoi(self) -> Aoi:
        """Geodetic bounds of the nadir footprint."""
        half = self.params.half_extent
        cube = GroundCube.around(self.frame, half, half, self.cube.h_min, self.cube.h_max)
        return Aoi(cube.lat_min, cube.lat_max, cube.lon_min, cube.lon_max)


def _ground_truth_dsm(frame: LocalUtmFrame, terrain: Terrain, params: SceneParams) -> Dsm:
    half = params.half_extent
    grid = DsmGrid.from_bounds(
        frame.zone,
        frame.northern,
        frame.origin_easting - half,
        frame.origin_easting + half,
        frame.origin_northing - half,
        frame.origin_northing + half,
        params.cell_size,
    )
    east, north = grid.cell_centers()
    values = terrain.height_local(east - frame.origin_easting, north - frame.origin_northing)
    return Dsm(grid=grid, values=values)


def gen_scene(
    seed: int,
    params: SceneParams = SceneParams(),
    render: bool = True,
    with_rpcs: bool = True,
    threads: int = 1,
) -> SyntheticScene:
    """Build a complete scene: terrain, texture, push-broom views, RPCs, renders and GT DSM."""
    terrain_rng = np.random.default_rng([seed, 0])
    texture_seed = seed if params.texture_seed is None else params.texture_seed
    texture_rng = np.random.default_rng([texture_seed, 1])

    frame = LocalUtmFrame.at(params.center_lat, params.center_lon)
    terrain = make_terrain(terrain_rng, params)
    texture = make_texture(texture_rng)
    half = params.half_extent
    cube = GroundCube.around(
        frame,
        half * CUBE_MARGIN,
        half * CUBE_MARGIN,
        params.base_height - HEIGHT_MARGIN,
        params.base_height + params.relief + HEIGHT_MARGIN,
    )
    projectors: list[AnalyticProjector] = [
        PushbroomProjector(
            frame=frame,
            width=params.size_px,
            height=params.size_px,
            gsd=params.gsd,
            along_angle=angle,
            orbit_height=params.orbit_height,
            ref_height=params.ref_height,
        )
        for angle in params.view_angles
    ]
    scene = SyntheticScene(
        seed=seed,
        params=params,
        frame=frame,
        terrain=terrain,
        texture=texture,
        cube=cube,
        projectors=projectors,
        gt_dsm=_ground_truth_dsm(frame, terrain, params),
    )
    if with_rpcs:
        for proj in projectors:
            model, report = gen_rpc_from_projector(proj, cube)
            scene.rpcs.append(model)
            scene.rpc_reports.append(report)
    if render:
        scene.renders.extend(render_views(scene, threads=threads))
    logger.info(
        "Synthetic scene seed=%d: %d views of %dx%d px, relief %.1f m",
        seed,
        len(projectors),
        params.size_px,
        params.size_px,
        params.relief,
    )
    return scene


def _render_band(proj: AnalyticProjector, terrain: Terrain, texture: Texture, h_lo: float, h_hi: float, rows: tuple[int, int]):
    r0, r1 = rows
    samp, line = np.meshgrid(np.arange(proj.width, dtype=np.float64), np.arange(r0, r1, dtype=np.float64))

    def below_terrain(z):
        x, y = proj.image_to_local(samp, line, z)
        return z - terrain.height_local(x, y) <= 0.0

    # top-down scan: the highest crossing wins
    levels = np.linspace(h_hi, h_lo, RENDER_SCAN_LEVELS + 1)
    lo = np.full(samp.shape, np.nan)
    hi = np.full(samp.shape, np.nan)
    found = np.zeros(samp.shape, dtype=bool)
    above = ~below_terrain(np.full(samp.shape, levels[0]))
    for upper, lower in zip(levels[:-1], levels[1:]):
        hit = above & ~found & below_terrain(np.full(samp.shape, lower))
        lo[hit] = lower
        hi[hit] = upper
        found |= hit

    step = (h_hi - h_lo) / RENDER_SCAN_LEVELS
    n_iter = max(1, int(math.ceil(math.log2(step / RENDER_TOL))))
    lo_f = np.where(found, lo, h_lo)
    hi_f = np.where(found, hi, h_hi)
    for _ in range(n_iter):
        mid = (lo_f + hi_f) / 2.0
        below = below_terrain(mid)
        lo_f = np.where(below, lo_f, mid)
        hi_f = np.where(below, mid, hi_f)

    z = (lo_f + hi_f) / 2.0
    x, y = proj.image_to_local(samp, line, z)
    image = np.where(found, texture(x, y), 0.0)
    return image, found, np.where(found, z, np.nan)


def render_views(scene: SyntheticScene, threads: int = 1) -> list[RenderedView]:
    """Ray-cast every view against the terrain by bisection on height."""
    h_lo, h_hi = scene.cube.h_min, scene.cube.h_max
    renders: list[RenderedView] = []
    for proj in scene.projectors:
        bands = row_bands(proj.height, threads)
        parts = parallel_map(
            lambda band: _render_band(proj, scene.terrain, scene.texture, h_lo, h_hi, band),
            bands,
            threads,
        )
        image = np.vstack([p[0] for p in parts])
        valid = np.vstack([p[1] for p in parts])
        height = np.vstack([p[2] for p in parts])
        if not valid.all():
            logger.warning("Rendered view has %d pixels without terrain intersection", int((~valid).sum()))
        renders.append(RenderedView(image=image, valid=valid, height=height))
    return renders


def scene_views(scene: SyntheticScene) -> list[View]:
    return [View(image=r.image, rpc=m, name=f"view_{i}") for i, (r, m) in enumerate(zip(scene.renders, scene.rpcs))]


class SceneBundle(NamedTuple):
    views: list[View]
    aoi: Aoi
    gt: Dsm
    manifest: dict


def write_scene_bundle(scene: SyntheticScene, out_dir: Union[str, Path]) -> Path:
    """Images (16-bit PGM), RPC files, GT DSM and a manifest.json describing them."""
    if len(scene.renders) != len(scene.projectors) or len(scene.rpcs) != len(scene.projectors):
        raise ValueError("scene must be generated with renders and RPCs before it can be written")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    views = []
    for i, (render, model, report, angle) in enumerate(
        zip(scene.renders, scene.rpcs, scene.rpc_reports, scene.params.view_angles)
    ):
        save_image(out_dir / f"view_{i}.pgm", render.image, bits=16)
        save_rpc(model, out_dir / f"view_{i}.rpc")
        views.append(
            {
                "name": f"view_{i}",
                "image": f"view_{i}.pgm",
                "rpc": f"view_{i}.rpc",
                "along_angle": angle,
                "forward_residual_px": report.forward_max_px,
            }
        )
    write_dsm(scene.gt_dsm, out_dir / "gt_dsm.asc")

    params = asdict(scene.params)
    params["view_angles"] = list(params["view_angles"])
    manifest = {
        "seed": scene.seed,
        "params": params,
        "aoi": scene.aoi()._asdict(),
        "views": views,
        "gt_dsm": "gt_dsm.asc",
    }
    validate(instance=manifest, schema=SCENE_MANIFEST_SCHEMA)
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    logger.info("Scene bundle written to %s", out_dir)
    return out_dir


def load_scene_bundle(path: Union[str, Path]) -> SceneBundle:
    """Read a bundle directory (or its manifest.json) back into views, AOI and GT DSM."""
    path = Path(path)
    manifest_path = path / "manifest.json" if path.is_dir() else path
    root = manifest_path.parent
    manifest = json.loads(manifest_path.read_text())
    validate(instance=manifest, schema=SCENE_MANIFEST_SCHEMA)
    views = [
        View(image=load_image(root / v["image"]), rpc=load_rpc(root / v["rpc"]), name=v["name"])
        for v in manifest["views"]
    ]
    aoi = Aoi(**manifest["aoi"]).check()
    gt = read_dsm(root / manifest["gt_dsm"])
    return SceneBundle(views=views, aoi=aoi, gt=gt, manifest=manifest)
