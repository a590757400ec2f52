"""Тесты командной строки: подкоманды, файлы результатов и коды возврата."""

import json

import numpy as np
import pytest

from project.cli import build_parser, main
from project.cli.main import EXIT_FAILURE, EXIT_OK, EXIT_USAGE
from project.geo.dsm import Dsm, DsmGrid, write_dsm
from project.mvs.io import read_height_map
from project.rpc.io import load_rpc, save_rpc
from project.utils.images import save_image


@pytest.fixture
def rpc_file(tmp_path, stereo_triplet):
    return save_rpc(stereo_triplet[1][1], tmp_path / "view.rpc")


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("scene")
    assert main(["synth", "--seed", "3", "--size", "64", "--relief", "30", "--angles", "0", "15", "-15", "--out-dir", str(out)]) == EXIT_OK
    return out


def test_help(capsys):
    assert main(["--help"]) == EXIT_OK
    assert "satmvs" in capsys.readouterr().out


def test_usage_errors():
    assert main([]) == EXIT_USAGE
    assert main(["project", "--rpc", "x.rpc"]) == EXIT_USAGE
    assert main(["fit-pinhole", "--rpc", "x.rpc", "--sizes", "--out-dir", "out"]) == EXIT_USAGE


def test_parser_lists_every_stage():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    assert set(sub.choices) == {"project", "localize", "fit-inverse", "warp", "fit-pinhole", "sweep", "pipeline", "eval", "synth"}


def test_project_and_localize(rpc_file, stereo_triplet, capsys):
    model = stereo_triplet[1][1]
    assert main(["project", "--rpc", str(rpc_file), "--lat", "40.001", "--lon", "116.502", "--hei", "250"]) == EXIT_OK
    samp, line = (float(v) for v in capsys.readouterr().out.split())
    s_ref, l_ref = model.project(40.001, 116.502, 250.0)
    assert samp == pytest.approx(float(s_ref), abs=1e-6)
    assert line == pytest.approx(float(l_ref), abs=1e-6)

    args = ["localize", "--rpc", str(rpc_file), "--samp", f"{samp}", "--line", f"{line}", "--hei", "250", "--check"]
    assert main(args) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    lat, lon = (float(v) for v in out[0].split())
    assert lat == pytest.approx(40.001, abs=1e-7)
    assert lon == pytest.approx(116.502, abs=1e-7)
    assert out[1].startswith("residual_px ")
    assert float(out[1].split()[1]) < 1e-3


def test_missing_rpc_is_a_usage_error(tmp_path, capsys):
    code = main(["project", "--rpc", str(tmp_path / "none.rpc"), "--lat", "0", "--lon", "0", "--hei", "0"])
    assert code == EXIT_USAGE
    assert "cannot read RPC file" in capsys.readouterr().err


def test_fit_inverse(rpc_file, tmp_path, capsys):
    out = tmp_path / "fitted.rpc"
    assert main(["fit-inverse", "--rpc", str(rpc_file), "--out", str(out), "--grid", "8", "8", "5"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["max_reprojection_px"] < 0.1
    assert load_rpc(out).has_inverse


def test_warp_identity(rpc_file, tmp_path):
    image = np.tile(np.linspace(0.0, 1.0, 32), (16, 1))
    src = save_image(tmp_path / "src.pgm", image)
    out = tmp_path / "warped.pgm"
    args = ["warp", "--src-image", str(src), "--src-rpc", str(rpc_file), "--ref-rpc", str(rpc_file), "--hei", "250", "--out", str(out)]
    assert main(args) == EXIT_OK
    assert out.exists()


def test_corrupt_image_is_a_usage_error(rpc_file, tmp_path, capsys):
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P5\n1 x\n255\n\0")
    args = ["warp", "--src-image", str(bad), "--src-rpc", str(rpc_file), "--ref-rpc", str(rpc_file), "--hei", "250", "--out", str(tmp_path / "o.pgm")]
    assert main(args) == EXIT_USAGE
    assert "cannot decode" in capsys.readouterr().err


def test_fit_pinhole_sizes(rpc_file, tmp_path, capsys):
    out = tmp_path / "fits"
    args = ["fit-pinhole", "--rpc", str(rpc_file), "--sizes", "64", "256", "--heights", "0", "500", "--out-dir", str(out)]
    assert main(args) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert [s["patch_size"] for s in summary] == [[64, 64], [256, 256]]
    assert (out / "fit_64x64.csv").exists() and (out / "fit_256x256.json").exists()
    assert len(capsys.readouterr().out.splitlines()) == 2
    assert main(["fit-pinhole", "--rpc", str(rpc_file), "--sizes", "0", "--out-dir", str(out)]) == EXIT_USAGE


def test_eval(tmp_path, capsys):
    grid = DsmGrid(50, True, 1000.0, 5000.0, 2.0, 2, 2)
    dsm = write_dsm(Dsm(grid, np.array([[1.0, 2.0], [3.0, np.nan]])), tmp_path / "dsm.asc")
    gt = write_dsm(Dsm(grid, np.zeros((2, 2))), tmp_path / "gt.asc")
    out = tmp_path / "metrics.json"
    assert main(["eval", "--dsm", str(dsm), "--gt", str(gt), "--out", str(out)]) == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed["mae"] == pytest.approx(2.0)
    assert printed["completeness"] == pytest.approx(75.0)
    assert json.loads(out.read_text())["metrics"] == printed


def test_eval_without_overlap_fails(tmp_path):
    dsm = write_dsm(Dsm(DsmGrid(50, True, 0.0, 10.0, 1.0, 2, 2), np.ones((2, 2))), tmp_path / "a.asc")
    gt = write_dsm(Dsm(DsmGrid(50, True, 100.0, 10.0, 1.0, 2, 2), np.ones((2, 2))), tmp_path / "b.asc")
    assert main(["eval", "--dsm", str(dsm), "--gt", str(gt)]) == EXIT_FAILURE


def test_synth_bundle(scene_dir):
    manifest = json.loads((scene_dir / "manifest.json").read_text())
    assert manifest["seed"] == 3
    assert manifest["params"]["size_px"] == 64
    assert [v["image"] for v in manifest["views"]] == ["view_0.pgm", "view_1.pgm", "view_2.pgm"]
    assert (scene_dir / "gt_dsm.asc.json").exists()


@pytest.mark.slow
def test_sweep_command(scene_dir, tmp_path):
    out = tmp_path / "heights.pfm"
    args = [
        "sweep",
        "--ref-image", str(scene_dir / "view_0.pgm"),
        "--ref-rpc", str(scene_dir / "view_0.rpc"),
        "--src-image", str(scene_dir / "view_1.pgm"),
        "--src-rpc", str(scene_dir / "view_1.rpc"),
        "--src-image", str(scene_dir / "view_2.pgm"),
        "--src-rpc", str(scene_dir / "view_2.rpc"),
        "--plane-counts", "16", "8", "6",
        "--intervals", "auto", "4", "1.5",
        "--temperature", "0.1",
        "--keep-stages",
        "--out", str(out),
    ]
    assert main(args) == EXIT_OK
    hmap = read_height_map(out)
    assert hmap.shape == (64, 64)
    assert hmap.valid.mean() > 0.9
    assert (tmp_path / "heights_stage0.pfm").exists()
    meta = json.loads((tmp_path / "heights.pfm.json").read_text())
    assert meta["schedule"]["stages"][0]["plane_count"] == 16


def test_sweep_needs_matching_sources(scene_dir, tmp_path):
    args = [
        "sweep",
        "--ref-image", str(scene_dir / "view_0.pgm"),
        "--ref-rpc", str(scene_dir / "view_0.rpc"),
        "--src-image", str(scene_dir / "view_1.pgm"),
        "--src-rpc", str(scene_dir / "view_1.rpc"),
        "--src-rpc", str(scene_dir / "view_2.rpc"),
        "--out", str(tmp_path / "h.pfm"),
    ]
    assert main(args) == EXIT_USAGE


@pytest.mark.slow
def test_pipeline_command(scene_dir, tmp_path, capsys):
    """Результат не зависит от числа потоков: файлы ЦМР совпадают побайтно."""
    outputs = []
    for threads in ("1", "4"):
        out = tmp_path / f"run{threads}"
        args = [
            "pipeline",
            "--scene", str(scene_dir),
            "--plane-counts", "16", "8", "6",
            "--intervals", "auto", "4", "1.5",
            "--temperature", "0.1",
            "--threads", threads,
            "--out-dir", str(out),
        ]
        assert main(args) == EXIT_OK
        metrics = json.loads(capsys.readouterr().out)
        assert metrics["mae"] < 10.0
        report = json.loads((out / "metrics.json").read_text())
        assert report["failures"] == []
        outputs.append(out)
    assert (outputs[0] / "dsm.asc").read_bytes() == (outputs[1] / "dsm.asc").read_bytes()


def test_pipeline_needs_inputs(tmp_path):
    assert main(["pipeline", "--out-dir", str(tmp_path)]) == EXIT_USAGE
