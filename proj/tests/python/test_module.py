import json
import math

import numpy as np
import pytest

import ddmlab


def test_sim_known_values():
    a = np.array([1.0, 2.0, 3.0])
    assert ddmlab.sim(a, a, 0.5) == pytest.approx(math.exp(2))
    assert ddmlab.sim(a, -a, 1.0) == pytest.approx(math.exp(-1))


def test_domain_variant_identical_prefixes():
    value, used, skipped = ddmlab.loss_domain_variant(np.ones((4, 3)), [0, 0, 1, 1], 0.5)
    assert value == pytest.approx(-4 * math.log(2))
    assert (used, skipped) == (4, 0)


def test_ssl_losses_are_finite():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    assert math.isfinite(ddmlab.nt_xent(a, b, 0.5))
    assert ddmlab.barlow_twins_loss(a, a) >= 0


def test_colored_shapes_deterministic():
    a = ddmlab.colored_shapes(16, ["red", "green"], num_classes=3, image_size=8, seed=4)
    b = ddmlab.colored_shapes(16, ["red", "green"], num_classes=3, image_size=8, seed=4)
    assert a["pixels"].shape == (16, 3, 8, 8)
    assert a["checksum"] == b["checksum"]
    assert np.array_equal(a["pixels"], b["pixels"])


def test_clustering_pipeline():
    points, labels, _ = ddmlab.gaussian_domains(2, 50, 8, 10.0, 0)
    centroids, assign, objective = ddmlab.kmeans(points, 2, seed=1)
    agree = np.mean(np.array(assign) == np.array(labels))
    assert max(agree, 1 - agree) == 1.0
    assert all(b <= a + 1e-9 for a, b in zip(objective, objective[1:]))
    mid = centroids.mean(axis=0, keepdims=True)
    assert ddmlab.outlier_mask(mid, centroids, 0.0) == [False]
    assert [ddmlab.epsilon_schedule(r, 0.5) for r in range(3)] == [1.0, 0.5, 0.25]
    with pytest.raises(ddmlab.ConfigError):
        ddmlab.epsilon_schedule(1, 1.5)


def test_config_validation_and_hash(tiny_config):
    text = json.dumps(tiny_config)
    assert ddmlab.validate_config(text) == []
    bad = ddmlab.validate_config(text, ["encoder.prefix_dim=12"])
    assert any(path == "encoder.prefix_dim" for path, _ in bad)
    assert ddmlab.config_hash(text) != ddmlab.config_hash(text, ["trainer.seed=2"])
    with pytest.raises(ddmlab.ConfigError):
        ddmlab.validate_config(json.dumps({"nonsense": 1}))
    with pytest.raises(ddmlab.ConfigError):
        ddmlab.validate_config("{ broken")


def test_linear_probe_one_hot():
    y = [i % 3 for i in range(30)]
    x = np.eye(3)[y]
    r = ddmlab.linear_probe(x, y, x, y, 3)
    assert r["top1"] == 100.0


def test_pretrain_encode_probe(tiny_config):
    result = ddmlab.pretrain(json.dumps(tiny_config))
    assert result["steps"] == 8
    lines = open(result["metrics"]).read().splitlines()
    assert json.loads(lines[0])["type"] == "header"
    again = ddmlab.pretrain(json.dumps(tiny_config), ["output_dir=" + tiny_config["output_dir"] + "_2"])
    assert again["parameter_checksum"] == result["parameter_checksum"]
    reps = ddmlab.encode(result["checkpoint"], np.zeros((2, 3 * 8 * 8)))
    assert reps.shape == (2, 12)
    r = ddmlab.probe(result["checkpoint"], "domain", "prefix")
    assert 0 <= r["top1"] <= 100
