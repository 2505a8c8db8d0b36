"""Validates golden protocol messages and a live `dribble serve` session against the JSON schema."""

import asyncio
import json
import re
import signal
import subprocess
import sys
from pathlib import Path

import jsonschema
import websockets

exe, schema_path, golden_dir = sys.argv[1], Path(sys.argv[2]), Path(sys.argv[3])
schema = json.loads(schema_path.read_text())
jsonschema.Draft202012Validator.check_schema(schema)
validator = jsonschema.Draft202012Validator(schema)
failures = []


def validate(msg, where):
    errors = list(validator.iter_errors(msg))
    if errors:
        failures.append(f"{where}: {errors[0].message}")


for path in sorted(golden_dir.glob("*.json")):
    validate(json.loads(path.read_text()), path.name)

# Messages the schema must reject.
for bad in [{"type": "command", "vx": 1}, {"type": "command", "vx": 1, "vy": 0, "x": 1},
            {"type": "reset", "scenario": "moon"}, {"type": "hello", "protocol": 2}]:
    if validator.is_valid(bad):
        failures.append(f"schema accepts {bad}")


async def session(port):
    seen = set()
    uri = f"ws://127.0.0.1:{port}"
    async with websockets.connect(uri) as ctl, websockets.connect(uri) as spec:
        async def recv(ws, pred, limit=400):
            for _ in range(limit):
                msg = json.loads(await asyncio.wait_for(ws.recv(), 5))
                validate(msg, f"live {msg.get('type')}")
                seen.add(msg["type"] if msg["type"] != "event" else msg["event"])
                if pred(msg):
                    return msg
            failures.append("live: expected message never arrived")

        hello = await recv(ctl, lambda m: m["type"] == "hello")
        if hello and hello["role"] != "controller":
            failures.append("live: first client is not the controller")
        hello = await recv(spec, lambda m: m["type"] == "hello")
        if hello and hello["role"] != "spectator":
            failures.append("live: second client is not a spectator")
        await spec.send(json.dumps({"type": "command", "vx": 1, "vy": 0}))
        await recv(spec, lambda m: m["type"] == "error")

        await ctl.send(json.dumps({"type": "command", "vx": 1.0, "vy": 0.0}))
        await recv(ctl, lambda m: m["type"] == "state" and m["command"]["vx"] == 1.0)
        await ctl.send("{broken")
        await recv(ctl, lambda m: m["type"] == "error")

        await ctl.send(json.dumps({"type": "reset", "scenario": "dribble_to_target"}))
        state = await recv(ctl, lambda m: m["type"] == "state" and m["scenario"] == "dribble_to_target")
        if state and state["task"] is None:
            failures.append("live: task scenario state has no task field")
        # Drive straight at the target until the task result arrives.
        await ctl.send(json.dumps({"type": "command", "vx": 1.0, "vy": 0.0}))
        await recv(ctl, lambda m: m["type"] == "event" and m["event"] == "task_result", limit=2000)
        await ctl.send(json.dumps({"type": "pause"}))
        await recv(ctl, lambda m: m["type"] == "state" and m["paused"])
        await ctl.send(json.dumps({"type": "reset", "scenario": "open_field"}))
        await ctl.send(json.dumps({"type": "resume"}))
        await recv(spec, lambda m: m["type"] == "state" and m["scenario"] == "open_field" and not m["paused"])
    missing = {"hello", "state", "error", "task_result"} - seen
    if missing:
        failures.append(f"live: never saw {sorted(missing)}")


proc = subprocess.Popen([exe, "serve", "--scripted", "--port", "0"], stdout=subprocess.PIPE, text=True)
try:
    line = proc.stdout.readline()
    m = re.search(r"ws://[^:]+:(\d+)", line)
    if not m:
        failures.append(f"serve: no address in {line!r}")
    else:
        asyncio.run(asyncio.wait_for(session(int(m.group(1))), 120))
finally:
    proc.send_signal(signal.SIGINT)
    try:
        if proc.wait(timeout=10) != 0:
            failures.append(f"serve: exit code {proc.returncode} after SIGINT")
    except subprocess.TimeoutExpired:
        proc.kill()
        failures.append("serve: did not stop on SIGINT")

for f in failures:
    print("FAIL:", f)
print("protocol schema:", "ok" if not failures else f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
