"""RPC text metadata: one ``KEY: value [unit]`` pair per line (Ikonos-style)."""

from __future__ import annotations

import logging
import re
from pathlib import Path
from typing import Iterable, TextIO, Union

import numpy as np

from project.rpc.errors import RpcParseError
from project.rpc.model import FORWARD_FIELDS, INVERSE_FIELDS, RpcModel
from project.rpc.polynomial import N_TERMS

logger = logging.getLogger(__name__)

# field name -> (key, unit)
SCALAR_KEYS: dict[str, tuple[str, str]] = {
    "line_off": ("LINE_OFF", "pixels"),
    "samp_off": ("SAMP_OFF", "pixels"),
    "lat_off": ("LAT_OFF", "degrees"),
    "lon_off": ("LONG_OFF", "degrees"),
    "hei_off": ("HEIGHT_OFF", "meters"),
    "line_scale": ("LINE_SCALE", "pixels"),
    "samp_scale": ("SAMP_SCALE", "pixels"),
    "lat_scale": ("LAT_SCALE", "degrees"),
    "lon_scale": ("LONG_SCALE", "degrees"),
    "hei_scale": ("HEIGHT_SCALE", "meters"),
}

COEFF_PREFIXES: dict[str, str] = {
    "line_num": "LINE_NUM_COEFF",
    "line_den": "LINE_DEN_COEFF",
    "samp_num": "SAMP_NUM_COEFF",
    "samp_den": "SAMP_DEN_COEFF",
    "inv_lat_num": "INV_LAT_NUM_COEFF",
    "inv_lat_den": "INV_LAT_DEN_COEFF",
    "inv_lon_num": "INV_LON_NUM_COEFF",
    "inv_lon_den": "INV_LON_DEN_COEFF",
}

HEIGHT_RANGE_KEYS = ("MIN_HEIGHT", "MAX_HEIGHT")

_LINE_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*:?\s*(\S+)?")
_COEFF_RE = re.compile(r"^([A-Z_]+_COEFF)_(\d+)$")


def _to_float(key: str, raw: str | None, lineno: int) -> float:
    if raw is None:
        raise RpcParseError(f"line {lineno}: key {key} has no value")
    try:
        value = float(raw)
    except ValueError as e:
        raise RpcParseError(f"line {lineno}: non-numeric value for {key}: {raw!r}") from e
    if not np.isfinite(value):
        raise RpcParseError(f"line {lineno}: non-finite value for {key}: {raw!r}")
    return value


def _read_pairs(lines: Iterable[str]) -> tuple[dict[str, float], dict[str, dict[int, float]]]:
    scalars: dict[str, float] = {}
    coeffs: dict[str, dict[int, float]] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        match = _LINE_RE.match(line)
        if match is None:
            raise RpcParseError(f"line {lineno}: cannot parse {line.strip()!r}")
        key = match.group(1).upper()
        value = _to_float(key, match.group(2), lineno)
        coeff = _COEFF_RE.match(key)
        if coeff:
            prefix, index = coeff.group(1), int(coeff.group(2))
            coeffs.setdefault(prefix, {})[index] = value
        else:
            scalars[key] = value
    return scalars, coeffs


def _coefficients(prefix: str, found: dict[int, float]) -> list[float]:
    expected = set(range(1, N_TERMS + 1))
    if set(found) != expected:
        raise RpcParseError(
            f"coefficient count for {prefix}: expected indices 1..{N_TERMS}, got {len(found)} "
            f"(missing {sorted(expected - set(found))[:5]}, unexpected {sorted(set(found) - expected)[:5]})"
        )
    return [found[i] for i in range(1, N_TERMS + 1)]


def parse_rpc(text: Union[str, TextIO]) -> RpcModel:
    """Parse RPC text metadata into an :class:`RpcModel`.

    Missing keys, non-numeric values and coefficient blocks that do not hold
    exactly 20 entries raise :class:`RpcParseError`. Inverse blocks are
    optional but all-or-nothing.
    """
    lines = text.splitlines() if isinstance(text, str) else text.read().splitlines()
    scalars, coeffs = _read_pairs(lines)

    kwargs: dict = {}
    for field_name, (key, _) in SCALAR_KEYS.items():
        if key not in scalars:
            raise RpcParseError(f"missing key {key}")
        kwargs[field_name] = scalars[key]

    for field_name in FORWARD_FIELDS:
        prefix = COEFF_PREFIXES[field_name]
        if prefix not in coeffs:
            raise RpcParseError(f"missing key {prefix}_1..{N_TERMS}")
        kwargs[field_name] = _coefficients(prefix, coeffs[prefix])

    inverse_present = [COEFF_PREFIXES[name] in coeffs for name in INVERSE_FIELDS]
    if any(inverse_present):
        for field_name in INVERSE_FIELDS:
            prefix = COEFF_PREFIXES[field_name]
            if prefix not in coeffs:
                raise RpcParseError(f"incomplete inverse block: missing key {prefix}_1..{N_TERMS}")
            kwargs[field_name] = _coefficients(prefix, coeffs[prefix])

    present_range = [key in scalars for key in HEIGHT_RANGE_KEYS]
    if any(present_range):
        if not all(present_range):
            raise RpcParseError("MIN_HEIGHT and MAX_HEIGHT must be given together")
        kwargs["height_range"] = (scalars["MIN_HEIGHT"], scalars["MAX_HEIGHT"])

    return RpcModel(**kwargs)


def serialize_rpc(model: RpcModel) -> str:
    """Text form of ``model``; ``parse_rpc(serialize_rpc(m))`` reproduces every field exactly."""
    out: list[str] = []
    for field_name, (key, unit) in SCALAR_KEYS.items():
        out.append(f"{key}: {getattr(model, field_name)!r} {unit}")

    names = ["line_num", "line_den", "samp_num", "samp_den"]
    if model.has_inverse:
        names += list(INVERSE_FIELDS)
    for field_name in names:
        prefix = COEFF_PREFIXES[field_name]
        for i, value in enumerate(getattr(model, field_name), start=1):
            out.append(f"{prefix}_{i}: {float(value)!r}")

    default_range = (model.hei_off - model.hei_scale, model.hei_off + model.hei_scale)
    if tuple(model.height_range) != default_range:
        out.append(f"MIN_HEIGHT: {model.height_range[0]!r} meters")
        out.append(f"MAX_HEIGHT: {model.height_range[1]!r} meters")
    return "\n".join(out) + "\n"


def load_rpc(path: Union[str, Path]) -> RpcModel:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise RpcParseError(f"cannot read RPC file {path}: {e}") from e
    model = parse_rpc(text)
    logger.debug("Loaded RPC from %s (inverse: %s)", path, model.has_inverse)
    return model


def save_rpc(model: RpcModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_rpc(model))
    return path
