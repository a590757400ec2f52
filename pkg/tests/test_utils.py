"""Изображения PGM и пул потоков."""

import numpy as np
import pytest

from project.utils import ImageFormatError, load_image, parallel_map, read_pgm, row_bands, save_image, write_pgm


@pytest.mark.parametrize("bits, maxval, dtype", [(8, 255, np.uint8), (16, 65535, np.uint16)])
def test_image_round_trip(tmp_path, rng, bits, maxval, dtype):
    image = rng.uniform(size=(7, 5))
    path = save_image(tmp_path / "img.pgm", image, bits=bits)
    assert path.read_bytes().startswith(b"P5")
    raster, read_maxval = read_pgm(path)
    assert read_maxval == maxval
    assert raster.dtype == dtype
    assert raster.shape == (7, 5)
    assert np.max(np.abs(load_image(path) - image)) <= 0.5 / maxval + 1e-12


def test_pgm_header_with_comment(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# made by hand\n2 1\n255\n" + bytes([0, 255]))
    np.testing.assert_array_equal(load_image(path), [[0.0, 1.0]])


def test_sixteen_bit_is_big_endian(tmp_path):
    path = write_pgm(tmp_path / "be.pgm", np.array([[258]], dtype=np.uint16))
    assert path.read_bytes().endswith(b"\x01\x02")
    raster, _ = read_pgm(path)
    assert raster[0, 0] == 258


def test_pgm_written_whatever_the_suffix(tmp_path):
    path = save_image(tmp_path / "view.img", np.full((3, 4), 0.5), bits=8)
    assert path.read_bytes().startswith(b"P5")
    assert load_image(path).shape == (3, 4)


@pytest.mark.parametrize(
    "payload",
    [
        b"",
        b"not an image at all",
        b"P5\n1 x\n255\n\0",
        b"P5\n0 1\n255\n",
        b"P5\n2",
    ],
)
def test_corrupt_pgm(tmp_path, payload):
    path = tmp_path / "bad.pgm"
    path.write_bytes(payload)
    with pytest.raises(ImageFormatError):
        load_image(path)


def test_colour_image_is_rejected(tmp_path):
    path = tmp_path / "rgb.ppm"
    path.write_bytes(b"P6\n1 1\n255\n" + bytes([10, 20, 30]))
    with pytest.raises(ImageFormatError, match="single-channel"):
        load_image(path)


def test_write_pgm_checks(tmp_path):
    with pytest.raises(ImageFormatError):
        write_pgm(tmp_path / "a.pgm", np.zeros((2, 2, 2), dtype=np.uint8))
    with pytest.raises(ImageFormatError):
        write_pgm(tmp_path / "a.pgm", np.array([[70000]]))
    with pytest.raises(ImageFormatError):
        write_pgm(tmp_path / "a.pgm", np.array([[-1]]))
    with pytest.raises(ImageFormatError):
        save_image(tmp_path / "a.pgm", np.zeros((2, 2)), bits=12)
    with pytest.raises(ImageFormatError):
        load_image(tmp_path / "missing.pgm")


def test_parallel_map_keeps_order():
    def work(i):
        return i * i

    assert parallel_map(work, range(50), threads=4) == [i * i for i in range(50)]
    assert parallel_map(work, [], threads=4) == []
    assert parallel_map(work, [3], threads=1) == [9]


def test_row_bands_cover_rows():
    bands = row_bands(100, 3)
    assert bands[0][0] == 0 and bands[-1][1] == 100
    assert all(a[1] == b[0] for a, b in zip(bands, bands[1:]))
    assert row_bands(10, 8) == [(0, 10)]
    assert row_bands(0, 2) == []
