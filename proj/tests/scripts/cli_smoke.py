"""End-to-end smoke test of the dribble command-line tool."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

exe = sys.argv[1]
failures = []


def run(*args, expect=0):
    proc = subprocess.run([exe, *args], capture_output=True, text=True, timeout=600)
    if proc.returncode != expect:
        failures.append(f"{' '.join(args)}: exit {proc.returncode}, wanted {expect}\n{proc.stderr}")
    return proc


def check(cond, what):
    if not cond:
        failures.append(what)


with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)

    # Replays are a pure function of their inputs.
    a, b = tmp / "a.jsonl", tmp / "b.jsonl"
    run("play", "--scripted", "--seed", "3", "--duration", "5", "--out", str(a))
    run("play", "--scripted", "--seed", "3", "--duration", "5", "--out", str(b))
    check(a.read_bytes() == b.read_bytes(), "play: replays with the same seed differ")
    rows = [json.loads(l) for l in a.read_text().splitlines()]
    check(rows[0]["type"] == "header" and len(rows) == 251, "play: unexpected replay shape")
    run("play", "--scripted", "--commands", "0:0.5,0;2:0,0.5", "--duration", "3", "--out", str(tmp / "c.jsonl"))
    run("play", "--scripted", "--commands", "1:0.5,0", "--out", str(tmp / "d.jsonl"), expect=1)

    # A tiny config keeps training to a few seconds.
    cfg = {"ppo": {"num_lanes": 8, "rollout_horizon": 16, "minibatch_count": 2, "epochs_per_update": 1},
           "policy": {"actor_hidden": [16, 16], "critic_hidden": [16, 16]},
           "train": {"checkpoint_every": 2}}
    cfg_path = tmp / "tiny.json"
    cfg_path.write_text(json.dumps(cfg))
    run_dir = tmp / "run"
    run("train", "--config", str(cfg_path), "--updates", "4", "--run-dir", str(run_dir), "--quiet")
    metrics = [json.loads(l) for l in (run_dir / "metrics.jsonl").read_text().splitlines()]
    check(len(metrics) == 4, f"train: {len(metrics)} metric rows, wanted 4")
    check([m["stage"] for m in metrics] == [1, 2, 2, 2], "train: a quarter of the updates belong to stage 1")
    ckpt = run_dir / "checkpoints" / "update_000004.ckpt"
    check(ckpt.exists(), "train: final checkpoint missing")

    info = json.loads(run("inspect", str(ckpt)).stdout)
    check(info["update"] == 4 and info["stage"] == 2 and info["resumable"], "inspect: wrong metadata")
    check(info["actor"]["input"] == 23 and info["critic"]["input"] == 32, "inspect: wrong network inputs")

    out = run("eval-task", "--checkpoint", str(ckpt), "--trials", "1").stdout
    check("dribble_to_target" in out, "eval-task: no summary line")
    run("stage-advance", "--run-dir", str(run_dir))
    check((run_dir / "ADVANCE_STAGE").exists(), "stage-advance: control file missing")

    bad = tmp / "bad.ckpt"
    bad.write_bytes(ckpt.read_bytes()[:-7])
    run("inspect", str(bad), expect=1)

    run("train", "--updates", "4", expect=2)                      # missing --run-dir
    run("frobnicate", expect=2)
    run("eval-task", "--scripted", "--task", "moon", expect=2)
    run("train", "--config", str(cfg_path), "--updates", "1", "--run-dir", str(tmp / "r1"), expect=1)
    (tmp / "unknown.json").write_text('{"ppo": {"gamma_typo": 0.9}}')
    proc = run("train", "--config", str(tmp / "unknown.json"), "--run-dir", str(tmp / "r2"), expect=1)
    check("gamma_typo" in proc.stderr, "config: unknown key not named in the error")

for f in failures:
    print("FAIL:", f)
print("cli smoke:", "ok" if not failures else f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
