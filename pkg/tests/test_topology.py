import pytest

from posetrack.topology import (
    COCO17,
    FULL33,
    InvalidKeypointError,
    KEYPOINT_NAMES,
    coco17_subset,
    keypoint_index,
    keypoint_name,
    mirror_index,
    topology_csv,
)


@pytest.mark.parametrize("idx,name", [(0, "Nose"), (16, "Right wrist"), (32, "Right foot index")])
def test_keypoint_name_examples(idx, name):
    assert keypoint_name(idx) == name


@pytest.mark.parametrize("bad", [-1, 33, 100])
def test_out_of_range_index_raises(bad):
    with pytest.raises(InvalidKeypointError):
        keypoint_name(bad)


def test_name_lookup_is_a_bijection():
    assert len(KEYPOINT_NAMES) == 33
    assert len(set(KEYPOINT_NAMES)) == 33
    for i in range(33):
        assert keypoint_index(keypoint_name(i)) == i


def test_left_right_pairs():
    assert (mirror_index(11), mirror_index(23), mirror_index(0)) == (12, 24, 0)
    for i in range(33):
        assert mirror_index(mirror_index(i)) == i
        name, other = keypoint_name(i), keypoint_name(mirror_index(i))
        if name.startswith("Left"):
            assert other == "Right" + name[4:]


def test_coco17_examples():
    s = coco17_subset()
    assert len(s) == 17
    assert s[0] == 0
    assert s[5] == 11
    assert s.members == COCO17.members


def test_coco17_members_are_distinct_and_semantic():
    members = list(COCO17.members)
    assert len(set(members)) == 17
    assert members[1:3] == [2, 5]
    names = [keypoint_name(k) for k in members]
    assert names[5:] == [
        "Left shoulder", "Right shoulder", "Left elbow", "Right elbow", "Left wrist", "Right wrist",
        "Left hip", "Right hip", "Left knee", "Right knee", "Left ankle", "Right ankle",
    ]
    assert len(FULL33) == 33


def test_topology_csv_matches_names():
    lines = topology_csv().strip().splitlines()
    assert lines[0] == "index,name"
    assert len(lines) == 34
    for i, line in enumerate(lines[1:]):
        assert line == f"{i},{KEYPOINT_NAMES[i]}"
