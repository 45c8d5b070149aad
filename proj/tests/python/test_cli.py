import json
import subprocess
from pathlib import Path


def run(cli, *args):
    return subprocess.run([cli, *args], capture_output=True, text=True)


def test_help_and_usage_errors(cli, config_file):
    assert run(cli, "--help").returncode == 0
    assert run(cli).returncode == 2
    assert run(cli, "pretrain", "--bogus").returncode == 2
    assert run(cli, "pretrain", "--config", str(config_file), "--set", "encoder.prefix_dim=12").returncode == 2
    assert run(cli, "pretrain", "--config", str(config_file), "--set", "ddm.unknown=1").returncode == 2


def test_runtime_failures_exit_one(cli, tmp_path):
    assert run(cli, "probe", "--checkpoint", str(tmp_path / "missing.bin")).returncode == 1
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"not a checkpoint")
    assert run(cli, "probe", "--checkpoint", str(bad)).returncode == 1


def test_end_to_end(cli, config_file, tiny_config, tmp_path):
    out = Path(tiny_config["output_dir"])
    r = run(cli, "generate-data", "--config", str(config_file), "--out", str(tmp_path / "data"))
    assert r.returncode == 0, r.stderr
    assert len(list((tmp_path / "data").iterdir())) == 4

    r = run(cli, "pretrain", "--config", str(config_file), "--set", "trainer.seed=5")
    assert r.returncode == 0, r.stderr
    header = json.loads((out / "metrics.jsonl").read_text().splitlines()[0])
    assert header["seed"] == 5
    assert header["overrides"] == ["trainer.seed=5"]
    assert "config_hash" in header

    ckpt = str(out / "checkpoint.bin")
    r = run(cli, "probe", "--checkpoint", ckpt, "--target", "domain", "--slice", "remainder",
            "--out", str(tmp_path / "probe.csv"))
    assert r.returncode == 0, r.stderr
    text = (tmp_path / "probe.csv").read_text()
    assert "# config_hash=" in text and ",average" in text

    r = run(cli, "analyze", "--checkpoint", ckpt, "--out", str(tmp_path / "analysis"))
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "analysis" / "heatmap.csv").exists()

    r = run(cli, "export-embeddings", "--checkpoint", ckpt, "--slice", "prefix", "--out", str(tmp_path / "e.csv"))
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "e.csv").read_text().startswith("# ddmlab-embeddings v1")

    assert run(cli, "cluster-report", "--run", str(out)).returncode == 1  # labeled run has no report
