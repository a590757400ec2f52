from .images import ImageFormatError, load_image, read_pgm, save_image, write_pgm
from .parallel import parallel_map, row_bands

__all__ = [
    "ImageFormatError",
    "load_image",
    "save_image",
    "read_pgm",
    "write_pgm",
    "parallel_map",
    "row_bands",
]
