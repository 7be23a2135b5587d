"""Point cloud container and file formats.

Two interchange formats: whitespace-separated text with one ``x y z
[attrs...]`` line per point, and a raw binary layout (little-endian uint64
point count, then count*3 float32 coordinates). Attributes survive only the
text format.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np


@dataclass
class PointCloud:
    points: np.ndarray                  # (n, 3) float64
    attrs: np.ndarray | None = None     # (n, k) float64 or None

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ValueError("points must have shape (n, 3)")
        if len(self.points) < 1:
            raise ValueError("point cloud must contain at least one point")
        if not np.isfinite(self.points).all():
            raise ValueError("points must be finite")
        if self.attrs is not None:
            self.attrs = np.asarray(self.attrs, dtype=np.float64)
            if self.attrs.shape[0] != self.points.shape[0]:
                raise ValueError("attrs row count must match points")

    def __len__(self) -> int:
        return len(self.points)


def from_text(text: str) -> PointCloud:
    points = []
    attrs = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) < 3:
            raise ValueError(f"line {lineno}: expected at least x y z")
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise ValueError(f"line {lineno}: inconsistent field count")
        try:
            values = [float(f) for f in fields]
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        points.append(values[:3])
        attrs.append(values[3:])
    if not points:
        raise ValueError("no points in input")
    attr_arr = np.array(attrs) if attrs and attrs[0] else None
    return PointCloud(points=np.array(points), attrs=attr_arr)


def to_text(cloud: PointCloud) -> str:
    lines = []
    for i, p in enumerate(cloud.points):
        fields = [repr(float(v)) for v in p]
        if cloud.attrs is not None:
            fields += [repr(float(v)) for v in cloud.attrs[i]]
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def from_binary(data: bytes) -> PointCloud:
    if len(data) < 8:
        raise ValueError("binary cloud truncated: missing count header")
    (count,) = struct.unpack_from("<Q", data, 0)
    expected = 8 + 12 * count
    if len(data) != expected:
        raise ValueError(
            f"binary cloud size mismatch: header says {count} points "
            f"({expected} bytes), got {len(data)} bytes"
        )
    coords = np.frombuffer(data, dtype="<f4", offset=8).astype(np.float64)
    return PointCloud(points=coords.reshape(count, 3))


def to_binary(cloud: PointCloud) -> bytes:
    header = struct.pack("<Q", len(cloud))
    return header + cloud.points.astype("<f4").tobytes()


def load(path: str, fmt: str = "text") -> PointCloud:
    if fmt == "text":
        with open(path, "r", encoding="utf-8") as fh:
            return from_text(fh.read())
    if fmt == "binary":
        with open(path, "rb") as fh:
            return from_binary(fh.read())
    raise ValueError(f"unknown cloud format {fmt!r}")


def save(cloud: PointCloud, path: str, fmt: str = "text") -> None:
    if fmt == "text":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(to_text(cloud))
    elif fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(to_binary(cloud))
    else:
        raise ValueError(f"unknown cloud format {fmt!r}")
