"""Expert-count ablation: train and score MoE detectors for several E.

Drives the mgtd CLI end to end for each expert count, then collects the
per-E evaluation reports into one summary JSON. No accuracy ordering is
assumed; the sweep exists to make the comparison cheap to run.

Usage:
    python scripts/expert_sweep.py --train train.jsonl --val val.jsonl \
        --test test.jsonl --out-dir sweep/ [--experts 1,3,6] [--mode hard] \
        [--task binary] [--seed 0] [--epochs 10]
"""

import argparse
import json
import os
import sys

from mgtd.cli import dispatch


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--train", required=True)
    parser.add_argument("--val", default=None)
    parser.add_argument("--test", required=True)
    parser.add_argument("--out-dir", dest="out_dir", required=True)
    parser.add_argument("--experts", default="1,3,6")
    parser.add_argument("--mode", default="hard", choices=["hard", "soft"])
    parser.add_argument("--task", default="binary", choices=["binary", "multiclass"])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--embed-dim", dest="embed_dim", type=int, default=256)
    parser.add_argument("--hidden", type=int, default=64)
    args = parser.parse_args(argv)

    os.makedirs(args.out_dir, exist_ok=True)
    summary = {}
    for experts in [int(e) for e in args.experts.split(",")]:
        tag = f"E{experts}"
        model_path = os.path.join(args.out_dir, f"moe_{tag}.json")
        pred_path = os.path.join(args.out_dir, f"pred_{tag}.jsonl")
        report_path = os.path.join(args.out_dir, f"report_{tag}.json")
        train_cmd = [
            "train", "--model", "moe", "--task", args.task, "--mode", args.mode,
            "--experts", str(experts), "--in", args.train, "--out", model_path,
            "--seed", str(args.seed), "--epochs", str(args.epochs),
            "--embed-dim", str(args.embed_dim), "--hidden", str(args.hidden),
        ]
        if args.val:
            train_cmd += ["--val", args.val]
        for cmd in (
            train_cmd,
            ["detect", "--model", model_path, "--in", args.test, "--out", pred_path],
            ["evaluate", "--gold", args.test, "--pred", pred_path, "--task", args.task,
             "--format", "json", "--out", report_path],
        ):
            code = dispatch(cmd)
            if code != 0:
                print(f"step failed for {tag}: {' '.join(cmd)}", file=sys.stderr)
                return code
        with open(report_path, encoding="utf-8") as fh:
            report = json.load(fh)
        summary[tag] = {
            "experts": experts,
            "accuracy": report["accuracy"],
            "macro_f1": report["macro_f1"],
            "per_class": report["per_class"],
        }
    out = os.path.join(args.out_dir, "sweep_summary.json")
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for tag, row in sorted(summary.items()):
        print(f"{tag}: accuracy={row['accuracy']:.4f} macro_f1={row['macro_f1']:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
