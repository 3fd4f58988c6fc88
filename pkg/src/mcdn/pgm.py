"""Binary PGM (P5, maxval 255) reader and writer."""

import numpy as np

HEADER_MAXVAL = 255


def write_pgm(path, image):
    """Write an 8-bit grayscale raster.  Header is exactly 'P5\\n{w} {h}\\n255\\n'."""
    image = np.asarray(image)
    if image.ndim != 2 or image.dtype != np.uint8:
        raise ValueError(f"expected a 2-d uint8 raster, got {image.dtype} with shape {image.shape}")
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{HEADER_MAXVAL}\n".encode("ascii"))
        fh.write(image.tobytes())


def _tokens(fh):
    """Yield whitespace-separated header tokens, skipping # comments."""
    while True:
        ch = fh.read(1)
        if not ch:
            return
        if ch.isspace():
            continue
        if ch == b"#":
            while ch and ch != b"\n":
                ch = fh.read(1)
            continue
        tok = ch
        while True:
            ch = fh.read(1)
            if not ch or ch.isspace():
                yield tok
                break
            tok += ch


def read_pgm(path):
    """Read a binary PGM file back into a uint8 array.

    Raises ValueError naming the file on any malformed header or short payload.
    """
    path = str(path)
    with open(path, "rb") as fh:
        toks = _tokens(fh)
        try:
            magic = next(toks)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected PGM magic 'P5'")
        if magic != b"P5":
            raise ValueError(f"{path}: bad magic {magic!r}, expected 'P5'")
        try:
            w = int(next(toks))
            h = int(next(toks))
            maxval = int(next(toks))
        except (StopIteration, ValueError):
            raise ValueError(f"{path}: malformed PGM header (width/height/maxval)")
        if w <= 0 or h <= 0:
            raise ValueError(f"{path}: non-positive dimensions {w}x{h}")
        if maxval != HEADER_MAXVAL:
            raise ValueError(f"{path}: unsupported maxval {maxval}, expected {HEADER_MAXVAL}")
        payload = fh.read(w * h)
        if len(payload) != w * h:
            raise ValueError(f"{path}: truncated payload, expected {w * h} bytes, got {len(payload)}")
        return np.frombuffer(payload, dtype=np.uint8).reshape(h, w).copy()
