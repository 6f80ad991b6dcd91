import json
import pathlib
import sys

import pytest

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from ifield.config import build_config  # noqa: E402

# small enough that a full three-stage run takes seconds
TINY = {
    "seed": 5,
    "generator": {"humans": [2, 4], "objects": [1, 2]},
    "field": {"heads": 1, "head_dim": 4, "iters": 5},
    "train": {
        "hidden": 8,
        "feature_dim": 4,
        "batch_size": 3,
        "lr": 0.01,
        "epochs": {"stage1": 2, "stage2": 1, "stage3": 1},
    },
}


@pytest.fixture
def tiny_cfg():
    return build_config(TINY)


@pytest.fixture
def tiny_config_file(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY), encoding="utf-8")
    return path
