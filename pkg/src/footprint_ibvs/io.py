"""Netpbm images, fixed-format JSON and CSV helpers.

Images are binary PPM (P6) with the gray value replicated to three
channels; masks are binary PGM (P5) with 0 for background and 255 for
robot. JSON reals are written with 17 significant digits and keys keep
insertion order so repeated runs produce identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, List, Sequence

import numpy as np


def write_ppm(path: Path, image: np.ndarray) -> None:
    img = np.asarray(image, dtype=np.uint8)
    h, w = img.shape
    rgb = np.repeat(img[:, :, None], 3, axis=2)
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + rgb.tobytes())


def write_pgm(path: Path, mask: np.ndarray) -> None:
    m = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    h, w = m.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + m.tobytes())


def _read_netpbm(path: Path, magic: bytes) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens: List[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    pos += 1
    if tokens[0] != magic or tokens[3] != b"255":
        raise ValueError(f"{path}: expected {magic.decode()} with maxval 255")
    w, h = int(tokens[1]), int(tokens[2])
    ch = 3 if magic == b"P6" else 1
    arr = np.frombuffer(data[pos:pos + w * h * ch], dtype=np.uint8)
    return arr.reshape(h, w, ch) if ch == 3 else arr.reshape(h, w)


def read_ppm(path: Path) -> np.ndarray:
    """Gray image from a P6 file (first channel)."""
    return _read_netpbm(path, b"P6")[:, :, 0].copy()


def read_pgm_mask(path: Path) -> np.ndarray:
    return _read_netpbm(path, b"P5") > 127


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError("JSON cannot hold non-finite numbers")
        s = "%.17g" % x
        if "." not in s and "e" not in s and "inf" not in s:
            s += ".0"
        return s
    return json.dumps(obj)


def dumps_json(obj: Any, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def write_json(path: Path, obj: Any) -> None:
    Path(path).write_text(dumps_json(obj))


def read_json(path: Path) -> Any:
    return json.loads(Path(path).read_text())


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def read_csv(path: Path) -> List[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
