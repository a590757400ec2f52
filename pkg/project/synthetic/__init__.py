from project.synthetic.errors import GenerationError
from project.synthetic.projectors import AnalyticProjector, PinholeProjector, PushbroomProjector
from project.synthetic.rpcgen import GenerationReport, GroundCube, gen_rpc_from_projector
from project.synthetic.scene import (
    SceneBundle,
    SceneParams,
    SyntheticScene,
    gen_scene,
    load_scene_bundle,
    scene_views,
    write_scene_bundle,
)

__all__ = [
    "AnalyticProjector",
    "GenerationError",
    "GenerationReport",
    "GroundCube",
    "PinholeProjector",
    "PushbroomProjector",
    "SceneBundle",
    "SceneParams",
    "SyntheticScene",
    "gen_scene",
    "gen_rpc_from_projector",
    "load_scene_bundle",
    "scene_views",
    "write_scene_bundle",
]
