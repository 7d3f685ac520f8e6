"""On-disk formats: matrix files, Fourier masks, PGM images, CSV vectors."""

import math
import struct

import numpy as np

from .exceptions import MalformedFileError

__all__ = [
    "read_matrix_file",
    "write_matrix_file",
    "read_mask_file",
    "write_mask_file",
    "read_pgm",
    "write_pgm",
    "read_vector_csv",
    "write_vector_csv",
    "format_float",
]

MATRIX_MAGIC = b"BMAT"


def write_matrix_file(matrix, path):
    """Write ``BMAT | u32 m | u32 n | m*n float64`` (little-endian, row-major)."""
    A = np.asarray(matrix, dtype="<f8")
    if A.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {A.shape}")
    m, n = A.shape
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<II", m, n))
        fh.write(np.ascontiguousarray(A).tobytes())


def read_matrix_file(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise MalformedFileError(f"cannot read matrix file {path}: {exc}") from exc
    if len(data) < 12 or data[:4] != MATRIX_MAGIC:
        raise MalformedFileError(f"{path}: missing BMAT header")
    m, n = struct.unpack("<II", data[4:12])
    if m < 1 or n < 1:
        raise MalformedFileError(f"{path}: empty matrix {m}x{n}")
    need = 12 + 8 * m * n
    if len(data) != need:
        raise MalformedFileError(
            f"{path}: expected {need} bytes for a {m}x{n} matrix, got {len(data)}")
    return np.frombuffer(data, dtype="<f8", offset=12).reshape(m, n).astype(np.float64)


def write_mask_file(mask, path):
    mask = np.asarray(mask, dtype=bool)
    H, W = mask.shape
    lines = [f"{H} {W}"]
    lines += ["".join("1" if v else "0" for v in row) for row in mask]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mask_file(path):
    """Read an ASCII mask: ``"H W"`` then ``H`` lines of ``W`` 0/1 characters."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except (OSError, UnicodeDecodeError) as exc:
        raise MalformedFileError(f"cannot read mask file {path}: {exc}") from exc
    if not lines:
        raise MalformedFileError(f"{path}: empty mask file")
    try:
        H, W = (int(t) for t in lines[0].split())
    except ValueError as exc:
        raise MalformedFileError(f"{path}: bad mask header {lines[0]!r}") from exc
    rows = lines[1:]
    if len(rows) != H or any(len(r) != W or set(r) - {"0", "1"} for r in rows):
        raise MalformedFileError(f"{path}: mask body does not match {H}x{W}")
    return np.array([[c == "1" for c in r] for r in rows], dtype=bool)


def _pgm_tokens(data, start, count):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens = []
    pos = start
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise MalformedFileError("truncated PGM header")
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    return tokens, pos


def read_pgm(path):
    """Read a P2 or P5 grayscale image, scaled to [0, 1] by ``maxval``."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise MalformedFileError(f"{path}: not a P2/P5 PGM file")
    try:
        (w, h, maxval), pos = _pgm_tokens(data, 2, 3)
        W, H, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise MalformedFileError(f"{path}: malformed PGM header") from exc
    if W < 1 or H < 1 or not 1 <= maxval <= 65535:
        raise MalformedFileError(
            f"{path}: malformed PGM header (W={W}, H={H}, maxval={maxval})")
    count = W * H
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        dtype = ">u1" if maxval < 256 else ">u2"
        nbytes = count * np.dtype(dtype).itemsize
        if len(data) - pos < nbytes:
            raise MalformedFileError(f"{path}: truncated PGM data")
        pix = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    else:
        body = data[pos:].split()
        if len(body) < count:
            raise MalformedFileError(f"{path}: truncated PGM data")
        try:
            pix = np.array([int(t) for t in body[:count]])
        except ValueError as exc:
            raise MalformedFileError(f"{path}: non-integer PGM sample") from exc
    if pix.max(initial=0) > maxval:
        raise MalformedFileError(f"{path}: sample exceeds maxval {maxval}")
    return pix.astype(np.float64).reshape(H, W) / maxval


def write_pgm(image, path):
    """Write a P5 image with maxval 255.

    Values are clipped to [0, 1], scaled by 255 and rounded half away from
    zero.
    """
    img = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    if img.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {img.shape}")
    q = np.floor(img * 255.0 + 0.5).astype(np.uint8)
    H, W = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{W} {H}\n255\n".encode("ascii"))
        fh.write(q.tobytes())


def format_float(v):
    """Shortest round-trip text for a float; ``inf``/``-inf``/``nan`` spelled out."""
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return repr(v)


def write_vector_csv(x, path, header="value"):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(header + "\n")
        for v in np.asarray(x, dtype=np.float64).reshape(-1):
            fh.write(format_float(v) + "\n")


def read_vector_csv(path):
    with open(path, "r", encoding="ascii") as fh:
        rows = [ln.strip() for ln in fh if ln.strip()]
    if rows and not _is_number(rows[0]):
        rows = rows[1:]
    try:
        return np.array([float(r.split(",")[0]) for r in rows])
    except ValueError as exc:
        raise MalformedFileError(f"{path}: non-numeric value") from exc


def _is_number(s):
    try:
        float(s.split(",")[0])
    except ValueError:
        return False
    return True
