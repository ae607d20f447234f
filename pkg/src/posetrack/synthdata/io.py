"""Binary PPM (P6) rasters and JSON Lines manifests."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..geometry import Pose
from ..topology import NUM_KEYPOINTS


class ManifestError(ValueError):
    pass


def write_ppm(path, image: np.ndarray) -> None:
    """``image`` is ``(H, W, 3)`` in [0, 1]; quantized to 8 bits here only."""
    arr = np.clip(np.rint(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    h, w = arr.shape[:2]
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(arr.tobytes())


def _tokens(data: bytes, count: int):
    """First ``count`` header tokens of a netpbm file and the data offset."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos + 1


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    (magic, w, h, maxval), offset = _tokens(data, 4)
    if magic != b"P6":
        raise ValueError(f"{path}: not a binary PPM")
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PPM is supported")
    if len(data) - offset < w * h * 3:
        raise ValueError(f"{path}: truncated pixel data")
    arr = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=offset)
    return arr.reshape(h, w, 3).astype(np.float32) / 255.0


@dataclass
class Record:
    image: str
    pose: Pose

    def to_json(self) -> str:
        return json.dumps(
            {
                "image": self.image,
                "keypoints": [[round(float(x), 6), round(float(y), 6)] for x, y in self.pose.points],
                "visibility": [int(round(float(v))) for v in self.pose.visibility],
            }
        )


def parse_record(line: str) -> Record:
    obj = json.loads(line)
    try:
        kps, vis = obj["keypoints"], obj["visibility"]
        image = obj["image"]
    except KeyError as exc:
        raise ManifestError(f"manifest record missing field {exc}") from None
    if len(kps) != NUM_KEYPOINTS or len(vis) != NUM_KEYPOINTS:
        raise ManifestError(f"record for {image!r} must have {NUM_KEYPOINTS} keypoints")
    return Record(image, Pose(np.asarray(kps, dtype=np.float64), np.asarray(vis, dtype=np.float64)))


def read_manifest(path) -> list[Record]:
    with open(path) as f:
        return [parse_record(line) for line in f if line.strip()]


def write_manifest(path, records) -> None:
    with open(path, "w") as f:
        for r in records:
            f.write(r.to_json() + "\n")


def resolve_image(manifest_path, record: Record) -> Path:
    p = Path(record.image)
    return p if p.is_absolute() else Path(manifest_path).parent / p
