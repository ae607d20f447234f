"""33-keypoint body topology and the COCO-17 evaluation subset."""

from __future__ import annotations

from dataclasses import dataclass

NUM_KEYPOINTS = 33

KEYPOINT_NAMES: tuple[str, ...] = (
    "Nose",
    "Left eye inner",
    "Left eye",
    "Left eye outer",
    "Right eye inner",
    "Right eye",
    "Right eye outer",
    "Left ear",
    "Right ear",
    "Mouth left",
    "Mouth right",
    "Left shoulder",
    "Right shoulder",
    "Left elbow",
    "Right elbow",
    "Left wrist",
    "Right wrist",
    "Left pinky #1 knuckle",
    "Right pinky #1 knuckle",
    "Left index #1 knuckle",
    "Right index #1 knuckle",
    "Left thumb #2 knuckle",
    "Right thumb #2 knuckle",
    "Left hip",
    "Right hip",
    "Left knee",
    "Right knee",
    "Left ankle",
    "Right ankle",
    "Left heel",
    "Right heel",
    "Left foot index",
    "Right foot index",
)

_NAME_TO_INDEX = {name: i for i, name in enumerate(KEYPOINT_NAMES)}

NOSE = 0
LEFT_SHOULDER, RIGHT_SHOULDER = 11, 12
LEFT_WRIST, RIGHT_WRIST = 15, 16
LEFT_HIP, RIGHT_HIP = 23, 24
TORSO = (LEFT_SHOULDER, RIGHT_SHOULDER, LEFT_HIP, RIGHT_HIP)

LEG_KEYPOINTS = tuple(range(25, 33))

COCO_NAMES = (
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
)


class InvalidKeypointError(ValueError):
    pass


@dataclass(frozen=True)
class TopologySubset:
    name: str
    members: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.members)

    def __getitem__(self, i: int) -> int:
        return self.members[i]

    def __iter__(self):
        return iter(self.members)


def keypoint_name(index: int) -> str:
    if not isinstance(index, (int,)) or isinstance(index, bool) or not 0 <= index < NUM_KEYPOINTS:
        raise InvalidKeypointError(f"keypoint index must be in [0, 32], got {index!r}")
    return KEYPOINT_NAMES[index]


def keypoint_index(name: str) -> int:
    try:
        return _NAME_TO_INDEX[name]
    except KeyError:
        raise InvalidKeypointError(f"unknown keypoint name {name!r}") from None


def mirror_index(index: int) -> int:
    """Index of the left/right counterpart (the nose maps to itself)."""
    name = keypoint_name(index)
    if name.startswith("Left "):
        return keypoint_index("Right " + name[5:])
    if name.startswith("Right "):
        return keypoint_index("Left " + name[6:])
    if name == "Mouth left":
        return keypoint_index("Mouth right")
    if name == "Mouth right":
        return keypoint_index("Mouth left")
    return index


def _coco_to_blaze(coco_name: str) -> int:
    side, _, part = coco_name.partition("_")
    if not part:
        return keypoint_index(side.capitalize())
    # plain "Left eye" / "Right eye"; the inner/outer variants are not COCO points
    return keypoint_index(f"{side.capitalize()} {part}")


COCO17 = TopologySubset("coco17", tuple(_coco_to_blaze(n) for n in COCO_NAMES))
FULL33 = TopologySubset("full33", tuple(range(NUM_KEYPOINTS)))


def coco17_subset() -> TopologySubset:
    return COCO17


# Non-normative drawing skeleton: face contour, torso rectangle, limbs, hands, feet.
SKELETON_EDGES: tuple[tuple[int, int], ...] = (
    (0, 1), (1, 2), (2, 3), (3, 7),
    (0, 4), (4, 5), (5, 6), (6, 8),
    (9, 10),
    (11, 12), (11, 23), (12, 24), (23, 24),
    (11, 13), (13, 15), (15, 17), (15, 19), (15, 21), (17, 19),
    (12, 14), (14, 16), (16, 18), (16, 20), (16, 22), (18, 20),
    (23, 25), (25, 27), (27, 29), (27, 31), (29, 31),
    (24, 26), (26, 28), (28, 30), (28, 32), (30, 32),
)


def topology_csv() -> str:
    lines = ["index,name"]
    lines += [f"{i},{name}" for i, name in enumerate(KEYPOINT_NAMES)]
    return "\n".join(lines) + "\n"
