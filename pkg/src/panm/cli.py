"""
Command-line front end.

    panm run    [--config FILE.json] [--out DIR] [--<field> VALUE ...]
    panm theory --n N --a A --l L --k K [--t-max T] [--trials M]
    panm theory table [--trials M] [--ts 3,5,7]
    panm sweep  MANIFEST.json

Exit codes: 0 success, 2 invalid configuration or input, 3 training diverged.
Run outputs go to ``--out``, else ``$PANM_OUTPUT_DIR``, else ``./results``.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import sys
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path

from .data import IngestionError
from .engine import RunConfig, run_simulation, write_outputs
from .learner import DivergenceError
from .theory import (
    TABLE_III_SETTINGS,
    BallSelectionSetting,
    ConfigurationError,
    monte_carlo_selection_oracle,
    nsmc_prob_series,
    pens_prob_series,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
OUTPUT_ENV = "PANM_OUTPUT_DIR"

log = logging.getLogger("panm")

# RunConfig fields whose default is None need an explicit parser
_OPTIONAL_TYPES = {"data_path": str, "labels_path": str, "loss_eval_samples": int}


def percent(p: float) -> str:
    """Probability as a percentage string, two decimals, round-half-even."""
    return str(Decimal(repr(float(p) * 100.0)).quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN))


def _int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _field_parser(f: dataclasses.Field):
    if f.name in _OPTIONAL_TYPES:
        return _OPTIONAL_TYPES[f.name]
    if f.name == "hidden":
        return _int_tuple
    return type(f.default)


def _output_dir(flag: str | None) -> Path:
    return Path(flag or os.environ.get(OUTPUT_ENV) or "results")


def load_config(path: str | None, overrides: dict) -> RunConfig:
    """File values first, then flag overrides; unknown keys are rejected."""
    raw: dict = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigurationError("config: file must hold one JSON object")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(raw).validate()


def execute(cfg: RunConfig, out_dir: Path, emit_csv: bool = True, emit_json: bool = True) -> list[str]:
    result = run_simulation(cfg)
    csv_path, json_path = write_outputs(result, out_dir)
    kept = []
    for p, keep in ((csv_path, emit_csv), (json_path, emit_json)):
        if keep:
            kept.append(p)
        else:
            os.remove(p)
    return kept


# ------------------------------------------------------------------ theory
def theory_series_rows(s: BallSelectionSetting, t_max: int, trials: int = 0, seed: int = 0) -> list[dict]:
    nsmc = nsmc_prob_series(t_max, s)
    pens = pens_prob_series(t_max, s)
    mc_n = mc_p = None
    if trials:
        mc_n = monte_carlo_selection_oracle(s, t_max, trials, seed, "nsmc")
        mc_p = monte_carlo_selection_oracle(s, t_max, trials, seed, "pens")
    rows = []
    for t in range(1, t_max + 1):
        rows.append({
            "n": s.n, "a": s.a, "l": s.l, "k": s.k, "t": t,
            "pens_prob": percent(pens[t - 1]),
            "nsmc_prob": percent(nsmc[t - 1]),
            "mc_pens": percent(mc_p[t - 1]) if trials else "",
            "mc_nsmc": percent(mc_n[t - 1]) if trials else "",
        })
    return rows


THEORY_COLUMNS = ["n", "a", "l", "k", "t", "pens_prob", "nsmc_prob", "mc_pens", "mc_nsmc"]


def theory_table_rows(ts=(3, 5, 7), trials: int = 0, seed: int = 0, include_self: bool = True) -> list[dict]:
    rows = []
    for n, a, l, k in TABLE_III_SETTINGS:
        s = BallSelectionSetting(n, a, l, k, include_self=include_self)
        wanted = set(ts)
        rows += [r for r in theory_series_rows(s, max(ts), trials, seed) if r["t"] in wanted]
    return rows


def _write_csv(rows: list[dict], columns: list[str], dest: str | None) -> None:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if dest:
        Path(dest).write_text(buf.getvalue(), encoding="utf-8")
    else:
        sys.stdout.write(buf.getvalue())


# ----------------------------------------------------------------- parsers
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="panm", description="P2P clustered federated learning simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one configuration")
    run.add_argument("--config", help="JSON object with RunConfig keys")
    run.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./results)")
    for f in dataclasses.fields(RunConfig):
        names = [f"--{f.name}"]
        if "_" in f.name:
            names.append(f"--{f.name.replace('_', '-')}")
        run.add_argument(*names, dest=f.name, type=_field_parser(f), default=None,
                         help=f"default {f.default!r}" if f.default is not dataclasses.MISSING else None)

    th = sub.add_parser("theory", help="all-true-neighbor probabilities (percent)")
    th.add_argument("what", nargs="?", choices=["table"], help="emit the reference grid instead of one setting")
    th.add_argument("--n", type=int)
    th.add_argument("--a", type=int)
    th.add_argument("--l", type=int)
    th.add_argument("--k", type=int)
    th.add_argument("--t-max", type=int, default=7)
    th.add_argument("--ts", type=_int_tuple, default=(3, 5, 7), help="rounds for the table (comma list)")
    th.add_argument("--trials", type=int, default=0, help="Monte-Carlo trials; 0 skips the mc columns")
    th.add_argument("--seed", type=int, default=0)
    th.add_argument("--urn", choices=["clients", "peers"], default="clients",
                    help="clients: owner counted among the a white balls; peers: n-1 balls, a-1 white")
    th.add_argument("--output", help="write CSV here instead of stdout")

    sw = sub.add_parser("sweep", help="run a manifest of methods x seeds")
    sw.add_argument("manifest")
    sw.add_argument("--out", help="overrides the manifest output_dir")
    return p


def cmd_run(args) -> int:
    overrides = {f.name: getattr(args, f.name) for f in dataclasses.fields(RunConfig)}
    cfg = load_config(args.config, overrides)
    for path in execute(cfg, _output_dir(args.out)):
        print(path)
    return EXIT_OK


def cmd_theory(args) -> int:
    include_self = args.urn == "clients"
    if args.trials < 0:
        raise ConfigurationError("trials: must be >= 0")
    if args.what == "table":
        rows = theory_table_rows(args.ts, args.trials, args.seed, include_self)
    else:
        missing = [k for k in ("n", "a", "l", "k") if getattr(args, k) is None]
        if missing:
            raise ConfigurationError(f"{missing[0]}: required unless 'theory table' is used")
        if args.t_max < 1:
            raise ConfigurationError("t_max: must be >= 1")
        s = BallSelectionSetting(args.n, args.a, args.l, args.k, include_self=include_self)
        rows = theory_series_rows(s, args.t_max, args.trials, args.seed)
    _write_csv(rows, THEORY_COLUMNS, args.output)
    return EXIT_OK


_MANIFEST_KEYS = {"base", "methods", "seeds", "output_dir", "emit"}


def load_manifest(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        m = json.load(fh)
    if not isinstance(m, dict):
        raise ConfigurationError("manifest: must be a JSON object")
    unknown = sorted(set(m) - _MANIFEST_KEYS)
    if unknown:
        raise ConfigurationError(f"{unknown[0]}: unknown manifest key")
    emit = {"csv": True, "json": True, "theory_tables": False}
    extra = sorted(set(m.get("emit", {})) - set(emit))
    if extra:
        raise ConfigurationError(f"emit.{extra[0]}: unknown emit flag")
    emit.update(m.get("emit", {}))
    base = dict(m.get("base", {}))
    methods = m.get("methods") or [base.get("method", RunConfig.method)]
    seeds = m.get("seeds") or [base.get("seed", RunConfig.seed)]
    configs = [RunConfig.from_dict({**base, "method": meth, "seed": s}).validate() for meth in methods for s in seeds]
    return {"configs": configs, "output_dir": m.get("output_dir"), "emit": emit}


def cmd_sweep(args) -> int:
    m = load_manifest(args.manifest)
    out = _output_dir(args.out or m["output_dir"])
    for cfg in m["configs"]:
        for path in execute(cfg, out, m["emit"]["csv"], m["emit"]["json"]):
            print(path)
    if m["emit"]["theory_tables"]:
        out.mkdir(parents=True, exist_ok=True)
        dest = out / "theory_table.csv"
        _write_csv(theory_table_rows(), THEORY_COLUMNS, str(dest))
        print(dest)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"run": cmd_run, "theory": cmd_theory, "sweep": cmd_sweep}[args.command]
    try:
        return handler(args)
    except (ConfigurationError, IngestionError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"panm: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"panm: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
