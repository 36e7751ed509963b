"""Run a BER campaign from a scenario TOML and print a per-scheme table.

Thin wrapper over the simulator with a progress line; use the ``sdmimo simulate``
command when a manifest is needed.
"""
import argparse
import sys
from pathlib import Path

from sdmimo.cli import load_toml, scenario_from_config
from sdmimo.sim import default_threads, run_ber


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", type=Path)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int, default=default_threads())
    ap.add_argument("--paper-scale", dest="full_scale", action="store_true")
    ap.add_argument("--csv", type=Path)
    args = ap.parse_args()

    cfg = scenario_from_config(load_toml(args.config), args.seed, args.full_scale)

    def progress(done, total):
        print(f"\rtrial {done}/{total}", end="", file=sys.stderr, flush=True)

    rep = run_ber(cfg, threads=args.threads, progress=progress)
    print(file=sys.stderr)
    print("scheme   " + " ".join(f"{s:>9g}" for s in cfg.snr_db))
    for s in cfg.schemes:
        print(f"{s:8s} " + " ".join(f"{b:9.2e}" for b in rep.ber(s)))
    if args.csv:
        args.csv.parent.mkdir(parents=True, exist_ok=True)
        args.csv.write_text(rep.to_csv())


if __name__ == "__main__":
    main()
