from __future__ import annotations

_POSITIVE_INT = {"type": "integer", "minimum": 1}

SWEEP_OVERRIDES_SCHEMA: dict = {
    "type": "object",
    "properties": {
        "scales": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "maximum": 1}, "minItems": 1},
        "plane_counts": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
        "intervals": {
            "type": "array",
            "items": {"type": ["number", "null"], "exclusiveMinimum": 0},
            "minItems": 1,
        },
        "aggregation_radius": {"type": "integer", "minimum": 0},
        "temperature": {"type": "number", "exclusiveMinimum": 0},
        "zscore_costs": {"type": "boolean"},
        "min_valid_views": _POSITIVE_INT,
    },
    "additionalProperties": False,
}

PIPELINE_OVERRIDES_SCHEMA: dict = {
    "type": "object",
    "properties": {
        "block_size": {"type": "number", "exclusiveMinimum": 0},
        "pad": {"type": "integer", "minimum": 0},
        "consistency_threshold": {"type": "number", "exclusiveMinimum": 0},
        "height_threshold": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "min_consistent_views": _POSITIVE_INT,
        "cell_size": {"type": "number", "exclusiveMinimum": 0},
        "warping": {"type": "string", "enum": ["rpc", "homography"]},
        "dem_path": {"type": ["string", "null"]},
        "dem_margin": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}

PIPELINE_CONFIG_SCHEMA: dict = {
    "type": "object",
    "properties": {
        "sweep": SWEEP_OVERRIDES_SCHEMA,
        "pipeline": PIPELINE_OVERRIDES_SCHEMA,
        "threads": _POSITIVE_INT,
    },
    "additionalProperties": False,
}

SCENE_MANIFEST_SCHEMA: dict = {
    "type": "object",
    "properties": {
        "seed": {"type": "integer"},
        "params": {"type": "object"},
        "aoi": {
            "type": "object",
            "properties": {
                "lat_min": {"type": "number"},
                "lat_max": {"type": "number"},
                "lon_min": {"type": "number"},
                "lon_max": {"type": "number"},
            },
            "required": ["lat_min", "lat_max", "lon_min", "lon_max"],
        },
        "views": {
            "type": "array",
            "minItems": 2,
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string"},
                    "image": {"type": "string"},
                    "rpc": {"type": "string"},
                    "along_angle": {"type": "number"},
                    "forward_residual_px": {"type": "number"},
                },
                "required": ["name", "image", "rpc"],
            },
        },
        "gt_dsm": {"type": "string"},
    },
    "required": ["seed", "params", "aoi", "views", "gt_dsm"],
}

_METRICS_OBJECT = {
    "type": "object",
    "properties": {
        "mae": {"type": "number", "minimum": 0},
        "rmse": {"type": "number", "minimum": 0},
        "pct_below_2_5": {"type": "number", "minimum": 0, "maximum": 100},
        "pct_below_7_5": {"type": "number", "minimum": 0, "maximum": 100},
        "completeness": {"type": "number", "minimum": 0, "maximum": 100},
        "n_compared": {"type": "integer", "minimum": 0},
        "n_reference": {"type": "integer", "minimum": 0},
    },
    "required": ["mae", "rmse", "pct_below_2_5", "pct_below_7_5", "completeness"],
}

METRICS_SCHEMA: dict = {
    "type": "object",
    "properties": {
        "metrics": {"oneOf": [_METRICS_OBJECT, {"type": "null"}]},
        "runtime_s": {"type": "number", "minimum": 0},
        "failures": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"block_id": {"type": "integer"}, "error": {"type": "string"}},
                "required": ["block_id", "error"],
            },
        },
    },
    "required": ["metrics", "runtime_s", "failures"],
}
