import json
import os
import shutil
from pathlib import Path

import pytest


@pytest.fixture
def tiny_config(tmp_path):
    cfg = {
        "output_dir": str(tmp_path / "run"),
        "data": {"n_train": 64, "n_test": 32, "n_unseen": 32, "num_classes": 3, "image_size": 8},
        "encoder": {"rep_dim": 12, "prefix_dim": 2, "channels": [2, 4, 4, 4], "hidden_dim": 16},
        "ssl": {"proj_hidden": 16, "proj_dim": 8, "pred_hidden": 4},
        "ddm": {"critic_hidden": 8},
        "trainer": {"epochs": 2, "batch_size": 16, "seed": 1},
        "evaluation": {"probe_iters": 20, "probes": [{"target": "domain", "slice": "prefix"}]},
    }
    return cfg


@pytest.fixture
def config_file(tmp_path, tiny_config):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(tiny_config))
    return path


@pytest.fixture
def cli():
    exe = os.environ.get("DDMLAB_CLI") or shutil.which("ddmlab")
    if not exe:
        candidate = Path(__file__).resolve().parents[2] / "build" / "ddmlab"
        exe = str(candidate) if candidate.exists() else None
    if not exe:
        pytest.skip("ddmlab CLI not built")
    return exe
