"""
Skeleton topology: joints, bones and the angle pairs they form.
"""

import logging
import re
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from src.exceptions import ValidationError

logger = logging.getLogger(__name__)

Bone = Tuple[int, int]
AnglePair = Tuple[int, int]


def derive_angle_pairs(bones: Sequence[Bone]) -> List[AnglePair]:
    """
    List every pair of distinct bones that share exactly one joint.

    Args:
        bones: Ordered (source_joint, target_joint) edges

    Returns:
        List of (bone_i, bone_j) with i < j, in lexicographic order
    """
    pairs = []
    for i in range(len(bones)):
        joints_i = set(bones[i])
        for j in range(i + 1, len(bones)):
            if len(joints_i & set(bones[j])) == 1:
                pairs.append((i, j))
    return pairs


class SkeletonTopology:
    """
    Joint count plus bone edge list of a skeleton.

    Angle pairs are always derived from the bones, never supplied. For each
    pair the shared joint and the two far endpoints are precomputed, so that
    both bone vectors of an angle point away from the shared joint.
    """

    def __init__(self, joint_count: int, bones: Iterable[Sequence[int]]):
        bones = [tuple(int(j) for j in bone) for bone in bones]
        if int(joint_count) < 1:
            raise ValidationError(f"joint count must be positive, got {joint_count}")
        self.joint_count = int(joint_count)

        seen = set()
        for index, bone in enumerate(bones):
            if len(bone) != 2:
                raise ValidationError(f"bone {index} must have exactly two joints")
            source, target = bone
            if not (0 <= source < self.joint_count and 0 <= target < self.joint_count):
                raise ValidationError(f"bone {index} joint index out of range [0, {self.joint_count})")
            if source == target:
                raise ValidationError(f"self-loop bone at index {index}: ({source}, {target})")
            key = frozenset(bone)
            if key in seen:
                raise ValidationError(f"duplicate bone at index {index}: ({source}, {target})")
            seen.add(key)

        self.bones: Tuple[Bone, ...] = tuple(bones)
        self.angle_pairs: Tuple[AnglePair, ...] = tuple(derive_angle_pairs(self.bones))

        self.bone_sources = np.array([b[0] for b in self.bones], dtype=np.intp)
        self.bone_targets = np.array([b[1] for b in self.bones], dtype=np.intp)

        centers, first, second = [], [], []
        for i, j in self.angle_pairs:
            shared = (set(self.bones[i]) & set(self.bones[j])).pop()
            centers.append(shared)
            first.append(self.bones[i][0] if self.bones[i][1] == shared else self.bones[i][1])
            second.append(self.bones[j][0] if self.bones[j][1] == shared else self.bones[j][1])
        self.angle_centers = np.array(centers, dtype=np.intp)
        self.angle_first = np.array(first, dtype=np.intp)
        self.angle_second = np.array(second, dtype=np.intp)

    @property
    def bone_count(self) -> int:
        return len(self.bones)

    @property
    def angle_count(self) -> int:
        return len(self.angle_pairs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SkeletonTopology):
            return NotImplemented
        return self.joint_count == other.joint_count and self.bones == other.bones

    def __hash__(self) -> int:
        return hash((self.joint_count, self.bones))

    def __repr__(self) -> str:
        return f"SkeletonTopology(joints={self.joint_count}, bones={self.bone_count}, angles={self.angle_count})"


def chain_topology(joint_count: int) -> SkeletonTopology:
    """Joints 0-1-...-(n-1) connected in a single chain."""
    return SkeletonTopology(joint_count, [(k, k + 1) for k in range(joint_count - 1)])


def star_topology(joint_count: int) -> SkeletonTopology:
    """Joint 0 is a hub connected to every other joint."""
    return SkeletonTopology(joint_count, [(0, k) for k in range(1, joint_count)])


# pelvis 0; spine 1, neck 2, head 3; arms 4-6 and 7-9; legs 10-11 and 12-14
HUMANOID_BONES = [
    (0, 1), (1, 2), (2, 3),
    (2, 4), (4, 5), (5, 6),
    (2, 7), (7, 8), (8, 9),
    (0, 10), (10, 11),
    (0, 12), (12, 13), (13, 14),
]


def humanoid_topology() -> SkeletonTopology:
    """A 15-joint body tree: torso, two arms and two legs."""
    return SkeletonTopology(15, HUMANOID_BONES)


_PRESET_PATTERN = re.compile(r"^(chain|star)(\d+)$")


def topology_from_name(name: str) -> SkeletonTopology:
    """
    Build a topology from a preset name such as 'chain16', 'star5' or 'humanoid'.
    """
    if name == "humanoid":
        return humanoid_topology()
    match = _PRESET_PATTERN.match(name)
    if not match:
        raise ValidationError(f"unknown topology preset '{name}' (expected chain<N>, star<N> or humanoid)")
    kind, count = match.group(1), int(match.group(2))
    if count < 2:
        raise ValidationError(f"topology preset '{name}' needs at least 2 joints")
    return chain_topology(count) if kind == "chain" else star_topology(count)


def rest_pose(topology: SkeletonTopology, bone_length: float = 1.0) -> np.ndarray:
    """
    Deterministic J x 3 rest pose for a topology.

    Joints are placed breadth-first from joint 0; each child sits one bone
    length away from its parent in a direction that turns by the golden angle
    per joint, so consecutive bones are never parallel. Joints unreachable
    from joint 0 start new trees offset along x.
    """
    golden = np.pi * (3.0 - np.sqrt(5.0))
    adjacency = {j: [] for j in range(topology.joint_count)}
    for source, target in topology.bones:
        adjacency[source].append(target)
        adjacency[target].append(source)

    pose = np.zeros((topology.joint_count, 3))
    placed = np.zeros(topology.joint_count, dtype=bool)
    roots = 0
    for start in range(topology.joint_count):
        if placed[start]:
            continue
        pose[start] = (2.0 * bone_length * roots, 0.0, 0.0)
        placed[start] = True
        roots += 1
        queue = [start]
        while queue:
            parent = queue.pop(0)
            for child in sorted(adjacency[parent]):
                if placed[child]:
                    continue
                theta = golden * child
                direction = np.array([0.6 * np.cos(theta), 1.0, 0.6 * np.sin(theta)])
                pose[child] = pose[parent] + bone_length * direction / np.linalg.norm(direction)
                placed[child] = True
                queue.append(child)
    return pose
