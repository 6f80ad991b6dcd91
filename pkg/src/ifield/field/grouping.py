from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

MIN_INSTANCE_GROUP = 3


@dataclass(frozen=True)
class FieldGroup:
    """Candidate rows modeled by one field.

    ``kind`` is ``"instance"`` for one object's candidates or ``"category"`` when
    small instance groups of the same object class are pooled.
    """

    kind: str
    key: int
    indices: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.indices)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.int64)


def group_candidates(
    object_indices: Sequence[int],
    object_classes: Sequence[int],
    min_instance: int = MIN_INSTANCE_GROUP,
) -> list[FieldGroup]:
    """Группировка по объекту; редкие экземпляры объединяются по категории."""
    if len(object_indices) != len(object_classes):
        raise ValueError("object indices and classes must have the same length")
    by_instance: dict[int, list[int]] = {}
    instance_class: dict[int, int] = {}
    for row, (obj, cls) in enumerate(zip(object_indices, object_classes)):
        by_instance.setdefault(int(obj), []).append(row)
        instance_class[int(obj)] = int(cls)

    groups: list[FieldGroup] = []
    pooled: dict[int, list[int]] = {}
    for obj, rows in by_instance.items():
        if len(rows) >= min_instance:
            groups.append(FieldGroup("instance", obj, tuple(rows)))
        else:
            pooled.setdefault(instance_class[obj], []).extend(rows)
    for cls, rows in pooled.items():
        groups.append(FieldGroup("category", cls, tuple(sorted(rows))))
    groups.sort(key=lambda grp: grp.indices[0])
    return groups


__all__ = ["FieldGroup", "group_candidates", "MIN_INSTANCE_GROUP"]
