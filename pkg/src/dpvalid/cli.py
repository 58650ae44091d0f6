"""Command-line entry points.

    dpvalid gen-data --n 100000 --seed 7 --out data.csv
    dpvalid run --config experiment.json
    dpvalid metrics --raw runs/means/raw.json
    dpvalid serve --config server.json

Configuration errors exit with status 2; anything else that fails raises
normally so the traceback is visible.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .columns import write_table_csv
from .errors import DpvalidError
from .harness import ExperimentConfig, records_from_raw, run_experiment, write_records_csv, write_summary_csv
from .synth import synth_taxlike_data, taxlike_schema


def cmd_gen_data(args) -> int:
    table = synth_taxlike_data(args.n, args.seed)
    columns = {name: col.values for name, col in table.numeric.items()}
    columns.update({name: col.values for name, col in table.categorical.items()})
    write_table_csv(args.out, columns)
    schema_path = args.schema or str(Path(args.out).with_suffix(".schema.json"))
    Path(schema_path).write_text(
        json.dumps(taxlike_schema(), indent=1, sort_keys=True), encoding="utf-8"
    )
    print(f"wrote {table.n} rows to {args.out} (schema: {schema_path})")
    return 0


def cmd_run(args) -> int:
    doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    config = ExperimentConfig.from_json(doc)
    records = run_experiment(config)
    print(f"{len(records)} metric records written under {config.out_dir}")
    return 0


def cmd_metrics(args) -> int:
    doc = json.loads(Path(args.raw).read_text(encoding="utf-8"))
    records = records_from_raw(doc)
    out = Path(args.out_dir or Path(args.raw).parent)
    out.mkdir(parents=True, exist_ok=True)
    write_records_csv(out / "records.csv", records)
    write_summary_csv(out / "summary.csv", records)
    print(f"recomputed {len(records)} metric records under {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import ServerConfig, build_app

    config = ServerConfig.from_file(args.config)
    app = build_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dpvalid")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic benchmark dataset to CSV")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--schema", default=None, help="schema sidecar path (default: <out>.schema.json)")
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("run", help="run an experiment described by a JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("metrics", help="recompute metrics from a stored raw.json")
    p.add_argument("--raw", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("serve", help="start the query server")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_serve)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (DpvalidError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
