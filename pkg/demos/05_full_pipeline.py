#!/usr/bin/env python3
"""The whole pipeline through the command-line interface.

Generates a filtered synthetic dataset, trains the tokenizer and both
dynamics variants, forecasts one event with each, verifies the forecasts,
and benchmarks the decode cost, all in a temporary directory. Every command
is a pure function of (config, inputs, seed), so re-running this script
produces byte-identical artifacts except for wall-clock lines.
"""

import tempfile
from pathlib import Path

from framecast.cli import main
from framecast.config import RunConfig, write_config
from framecast.eventfile import read_manifest, write_manifest

cfg = RunConfig(
    seed=7,
    grid_h=16,
    grid_w=16,
    patch_size=4,
    codebook_size=128,
    codebook_dim=16,
    codebook_hidden=32,
    layers=1,
    heads=2,
    embed=32,
    tokens_per_frame=16,
    max_frames=9,
    lr=2e-3,
    warmup_steps=50,
    batch_size=6,
    tokenizer_steps=400,
    dynamics_steps=300,
    context_len=3,
    horizon=6,
    n_events=16,
    n_frames=9,
    data_max=50.0,
    velocity_u=3.0,
    velocity_v=1.0,
)

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    cfg_path = tmp / "run.cfg"
    write_config(cfg, cfg_path)
    out = tmp / "run"

    def cli(*argv):
        code = main(["--config", str(cfg_path), "--out", str(out), *argv])
        assert code == 0, f"command {argv} exited with {code}"

    print("=== gen-data ===")
    cli("gen-data")
    print("\n=== train-tokenizer ===")
    cli("train-tokenizer")
    print("\n=== train-dynamics (frame mode) ===")
    cli("train-dynamics", "--mode", "frame")
    print("\n=== train-dynamics (token mode) ===")
    cli("train-dynamics", "--mode", "token")

    events = read_manifest(out / "data" / "manifest.txt")
    print("\n=== forecast (both modes, first kept event) ===")
    cli("forecast", "--event", str(events[0]), "--mode", "frame")
    cli("forecast", "--event", str(events[0]), "--mode", "token")

    print("\n=== evaluate (frame-mode forecasts of every kept event) ===")
    preds = []
    for p in events:
        cli("forecast", "--event", str(p), "--mode", "frame")
        preds.append((out / "reports" / f"{p.stem}_frame_pred.evt").name)
    pred_manifest = out / "reports" / "pred_manifest.txt"
    write_manifest(preds, pred_manifest)
    cli("evaluate", "--pred", str(pred_manifest), "--obs", str(out / "data" / "manifest.txt"),
        "--taus", "1,2,8")
    lines = (out / "reports" / "evaluation.csv").read_text().splitlines()
    print(f"   evaluation.csv: {len(lines)} lines; first data rows:")
    shown = 0
    for line in lines:
        if line.startswith("#") or line.startswith("lead"):
            continue
        print("    ", line)
        shown += 1
        if shown == 5:
            break

    print("\n=== benchmark ===")
    cli("benchmark", "--reps", "10")
