"""Image, ground-truth and label-map file formats."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image

from .metrics import boundary_mask


class InputError(ValueError):
    """Unreadable or malformed input file."""


def read_image(path) -> np.ndarray:
    """RGB float image in [0, 1] from PNG or portable pixmap."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"))
    except (OSError, ValueError) as exc:
        raise InputError(f"{path}: cannot read image ({exc})") from exc
    if arr.size == 0:
        raise InputError(f"{path}: empty image")
    return arr.astype(np.float64) / 255.0


def parse_seg(text: str, source: str = "<seg>") -> np.ndarray:
    """Decode a BSDS ``.seg`` file.

    Header lines end at ``data``; each data row is ``label row col_start
    col_end`` with inclusive, zero-based columns. Every pixel must be
    covered exactly once.
    """
    lines = text.splitlines()
    header: dict[str, str] = {}
    i = 0
    if not lines or not lines[0].split()[:2] == ["format", "ascii"]:
        raise InputError(f"{source}:1: expected 'format ascii' header")
    for i, line in enumerate(lines):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "data":
            break
        header[parts[0]] = " ".join(parts[1:])
    else:
        raise InputError(f"{source}: missing 'data' line")
    try:
        width = int(header["width"])
        height = int(header["height"])
    except (KeyError, ValueError) as exc:
        raise InputError(f"{source}: header needs integer width and height") from exc
    if width <= 0 or height <= 0:
        raise InputError(f"{source}: non-positive image size {width}x{height}")
    labels = np.full((height, width), -1, dtype=np.int64)
    for lineno, line in enumerate(lines[i + 1:], start=i + 2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 4:
            raise InputError(f"{source}:{lineno}: expected 'label row col_start col_end'")
        try:
            lab, row, c0, c1 = (int(p) for p in parts)
        except ValueError as exc:
            raise InputError(f"{source}:{lineno}: non-integer field") from exc
        if lab < 0 or not (0 <= row < height) or not (0 <= c0 <= c1 < width):
            raise InputError(f"{source}:{lineno}: run out of bounds for {width}x{height}")
        if np.any(labels[row, c0:c1 + 1] >= 0):
            raise InputError(f"{source}:{lineno}: run overlaps an earlier run")
        labels[row, c0:c1 + 1] = lab
    if np.any(labels < 0):
        missing = int(np.sum(labels < 0))
        raise InputError(f"{source}: {missing} pixels not covered by any run")
    if "segments" in header:
        try:
            declared = int(header["segments"])
        except ValueError as exc:
            raise InputError(f"{source}: bad 'segments' header") from exc
        if int(labels.max()) >= declared:
            raise InputError(f"{source}: label {labels.max()} exceeds declared segments {declared}")
    return labels


def parse_int_grid(text: str, source: str = "<grid>") -> np.ndarray:
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rows.append([int(v) for v in line.split()])
        except ValueError as exc:
            raise InputError(f"{source}:{lineno}: non-integer value") from exc
        if len(rows[-1]) != len(rows[0]):
            raise InputError(f"{source}:{lineno}: expected {len(rows[0])} columns, "
                             f"got {len(rows[-1])}")
    if not rows:
        raise InputError(f"{source}: empty label grid")
    return np.array(rows, dtype=np.int64)


def _parse_pgm(raw: bytes, source: str) -> np.ndarray:
    """Raw PGM values, not rescaled by maxval (Pillow would rescale)."""
    fields, pos = [], 2
    text_body = raw[:2] == b"P2"
    while len(fields) < 3:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.find(b"\n", pos) + 1 or len(raw)
            continue
        end = pos
        while end < len(raw) and not raw[end:end + 1].isspace():
            end += 1
        if end == pos:
            raise InputError(f"{source}: truncated graymap header")
        fields.append(raw[pos:end])
        pos = end
    try:
        w, h, maxval = (int(f) for f in fields)
    except ValueError as exc:
        raise InputError(f"{source}: bad graymap header") from exc
    if text_body:
        vals = np.array(raw[pos:].split(), dtype=np.int64)
    else:
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
        body = raw[pos + 1:pos + 1 + w * h * dtype.itemsize]
        vals = np.frombuffer(body, dtype=dtype).astype(np.int64)
    if vals.size != w * h:
        raise InputError(f"{source}: expected {w * h} graymap values, found {vals.size}")
    return vals.reshape(h, w)


def read_label_map(path) -> np.ndarray:
    """Label map from ``.seg``, PGM or integer-grid text."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc})") from exc
    if raw[:2] in (b"P2", b"P5"):
        return _parse_pgm(raw, str(path))
    text = raw.decode("ascii", errors="replace")
    if text.lstrip().startswith("format"):
        return parse_seg(text, str(path))
    return parse_int_grid(text, str(path))


def ingest_groundtruth(paths, shape=None) -> list[np.ndarray]:
    """One label map per annotation file, checked against ``shape``."""
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    out = []
    for p in paths:
        lab = read_label_map(p)
        if shape is not None and lab.shape != tuple(shape):
            raise InputError(f"{p}: ground truth is {lab.shape[1]}x{lab.shape[0]} "
                             f"but image is {shape[1]}x{shape[0]} (width x height)")
        out.append(lab)
    return out


def write_pgm(labels, path) -> None:
    """Label map as binary PGM; pixel value = label id."""
    lab = np.asarray(labels)
    if lab.min() < 0:
        raise ValueError("labels must be non-negative")
    maxval = max(int(lab.max()), 1)
    h, w = lab.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    body = lab.astype(">u2" if maxval > 255 else np.uint8).tobytes()
    with open(path, "wb") as fh:
        fh.write(header + body)


def mean_color_image(labels, image) -> np.ndarray:
    lab = np.asarray(labels).ravel()
    img = np.asarray(image, dtype=np.float64).reshape(-1, 3)
    counts = np.bincount(lab).astype(np.float64)
    out = np.zeros((len(counts), 3))
    for c in range(3):
        out[:, c] = np.bincount(lab, weights=img[:, c], minlength=len(counts))
    out /= np.maximum(counts, 1)[:, None]
    return out[lab].reshape(np.shape(image))


OVERLAY_COLOR = (255, 0, 0)


def overlay_boundaries(labels, image, color=OVERLAY_COLOR) -> np.ndarray:
    img = (np.clip(np.asarray(image, dtype=np.float64), 0, 1) * 255).round().astype(np.uint8)
    img = img.copy()
    img[boundary_mask(labels)] = color
    return img


def export_outputs(labels, image, out_dir, stem: str = "segmentation") -> dict:
    """Write the label PGM, a mean-colour rendering and a boundary overlay."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"{out_dir}: cannot create output directory ({exc})") from exc
    paths = {
        "labels": out_dir / f"{stem}_labels.pgm",
        "mean_color": out_dir / f"{stem}_mean.png",
        "overlay": out_dir / f"{stem}_overlay.png",
    }
    try:
        write_pgm(labels, paths["labels"])
        mean = (np.clip(mean_color_image(labels, image), 0, 1) * 255).round().astype(np.uint8)
        Image.fromarray(mean).save(paths["mean_color"], optimize=False)
        Image.fromarray(overlay_boundaries(labels, image)).save(paths["overlay"], optimize=False)
    except OSError as exc:
        raise InputError(f"{out_dir}: cannot write outputs ({exc})") from exc
    return paths
