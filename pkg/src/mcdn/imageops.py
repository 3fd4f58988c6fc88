"""Small raster helpers shared by the pipeline."""

import numpy as np

from .errors import ContractError


def flip_horizontal(image):
    return np.ascontiguousarray(image[:, ::-1])


def to_float01(image):
    """uint8 raster to float32 in [0, 1]."""
    return image.astype(np.float32) / np.float32(255.0)


def resize_bilinear(image, out_h, out_w):
    """Separable bilinear resize with pixel-center alignment.  Returns float32."""
    if out_h < 1 or out_w < 1:
        raise ContractError(f"output dims must be positive, got {out_h}x{out_w}")
    img = np.asarray(image, dtype=np.float32)
    if img.ndim != 2:
        raise ContractError(f"expected a 2-d raster, got shape {img.shape}")
    in_h, in_w = img.shape

    def axis_coords(n_in, n_out):
        src = (np.arange(n_out, dtype=np.float32) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0.0, n_in - 1.0)
        lo = np.floor(src).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, (src - lo).astype(np.float32)

    y0, y1, wy = axis_coords(in_h, out_h)
    x0, x1, wx = axis_coords(in_w, out_w)
    rows = img[y0] * (1.0 - wy)[:, None] + img[y1] * wy[:, None]
    out = rows[:, x0] * (1.0 - wx)[None, :] + rows[:, x1] * wx[None, :]
    return out
