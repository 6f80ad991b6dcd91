"""Scene records and their line-delimited JSON format.

Each line of a scene file is one object::

    {"index": 0, "seed": [7, 0], "regime": "minority",
     "humans": [[x1, y1, x2, y2], ...],
     "objects": [{"box": [x1, y1, x2, y2], "cls": 2}, ...],
     "gt_pairs": [{"human": 0, "object": 1, "verbs": [3]}, ...]}

Floats are written with ``repr`` precision so reading a file back yields the
same scenes bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, NamedTuple

from ..config import REGIMES
from ..errors import DataError
from ..geometry import Box


class SceneObject(NamedTuple):
    box: Box
    cls: int


class GtPair(NamedTuple):
    human: int
    obj: int
    verbs: tuple[int, ...]


@dataclass
class Scene:
    humans: list[Box]
    objects: list[SceneObject]
    gt_pairs: list[GtPair]
    regime: str
    seed: tuple[int, int] = (0, 0)
    index: int = 0
    _interactive: set[tuple[int, int]] = field(default_factory=set, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime '{self.regime}'")
        seen: set[tuple[int, int]] = set()
        for pair in self.gt_pairs:
            if not (0 <= pair.human < len(self.humans) and 0 <= pair.obj < len(self.objects)):
                raise ValueError(f"ground-truth pair {pair} references a missing human or object")
            key = (pair.human, pair.obj)
            if key in seen:
                raise ValueError(f"duplicate ground-truth pair {key}")
            seen.add(key)
        self._interactive = seen

    @property
    def n_candidates(self) -> int:
        return len(self.humans) * len(self.objects)

    @property
    def n_interactive(self) -> int:
        return len(self.gt_pairs)

    @property
    def interactive_ratio(self) -> float:
        return self.n_interactive / self.n_candidates if self.n_candidates else 0.0

    def is_interactive(self, human: int, obj: int) -> bool:
        return (human, obj) in self._interactive

    def to_record(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "seed": list(self.seed),
            "regime": self.regime,
            "humans": [h.as_list() for h in self.humans],
            "objects": [{"box": o.box.as_list(), "cls": o.cls} for o in self.objects],
            "gt_pairs": [{"human": p.human, "object": p.obj, "verbs": list(p.verbs)} for p in self.gt_pairs],
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> Scene:
        return cls(
            humans=[Box.from_array(h) for h in record["humans"]],
            objects=[SceneObject(Box.from_array(o["box"]), int(o["cls"])) for o in record["objects"]],
            gt_pairs=[
                GtPair(int(p["human"]), int(p["object"]), tuple(int(v) for v in p["verbs"]))
                for p in record["gt_pairs"]
            ],
            regime=str(record["regime"]),
            seed=tuple(int(s) for s in record["seed"]),
            index=int(record.get("index", 0)),
        )


def dumps_scene(scene: Scene) -> str:
    return json.dumps(scene.to_record(), separators=(",", ":"))


def write_scenes(path: str | Path, scenes: Iterable[Scene]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for scene in scenes:
            fh.write(dumps_scene(scene))
            fh.write("\n")
            count += 1
    return count


def iter_scenes(path: str | Path) -> Iterator[Scene]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"scene file not found: {path}")
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield Scene.from_record(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: malformed scene record ({exc})") from exc


def read_scenes(path: str | Path) -> list[Scene]:
    scenes = list(iter_scenes(path))
    if not scenes:
        raise DataError(f"scene file is empty: {path}")
    return scenes


def write_json(path: str | Path, payload: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


__all__ = [
    "GtPair",
    "Scene",
    "SceneObject",
    "dumps_scene",
    "iter_scenes",
    "read_scenes",
    "write_json",
    "write_scenes",
]
