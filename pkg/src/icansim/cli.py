"""Command-line interface: ``icansim run|summarize|geometry|crlb|oracle``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import engine, kernels
from .beams import BH, TMCB
from .constants import SPEED_OF_LIGHT
from .config import ConfigError, apply_overrides, load_config
from .positioning import MODE_2D, MODE_3D, NonConvergenceError, monte_carlo_rmse

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2

log = logging.getLogger("icansim")

_SCHEMES = {"bh": (BH,), "tmcb": (TMCB,), "both": (BH, TMCB)}


def _parse_set(items):
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _config(args):
    cfg = load_config(args.config)
    cfg = apply_overrides(cfg, _parse_set(args.set))
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "snapshots", None) is not None:
        changes["num_snapshots"] = args.snapshots
    if getattr(args, "ues", None) is not None:
        changes["ue_count"] = args.ues
    if getattr(args, "scheme", None) is not None:
        changes["schemes"] = _SCHEMES[args.scheme]
    return cfg.replace(**changes).validate() if changes else cfg


def _write(text: str, out) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _add_config_args(p, scenario=True):
    p.add_argument("--config", help="scenario JSON (default: bundled reference scenario)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config field, e.g. shell.altitude=1.1e6 (repeatable)")
    p.add_argument("--seed", type=int)
    if scenario:
        p.add_argument("--snapshots", type=int)
        p.add_argument("--ues", type=int)


# ---------------------------------------------------------------- subcommands

def cmd_run(args) -> int:
    cfg = _config(args)
    log.info("backend=%s fingerprint=%s", kernels.BACKEND, cfg.fingerprint())

    def progress(done, total):
        log.info("snapshot %d/%d", done, total)

    results = engine.run_scenario(cfg, threads=args.threads, progress=progress)
    writers = {"csv": engine.to_csv, "json": engine.to_json, "svg": engine.to_svg}
    _write(writers[args.format](results), args.out)
    return EXIT_OK


def cmd_summarize(args) -> int:
    results = engine.load_results(args.results)
    summary = engine.summarize(results)
    if args.brief:
        lines = [f"{k}: {v:.3f} m" for k, v in summary["run_median"].items()]
        for n, series in summary["ratio"].items():
            ratios = [p["ratio"] for p in series]
            lines.append(f"TMCB/BH n={n}: {1.0 / engine.nearest_rank(ratios, 50):.2f}")
        _write("\n".join(lines) + "\n", args.out)
    else:
        _write(json.dumps(summary, indent=1) + "\n", args.out)
    return EXIT_OK


def cmd_geometry(args) -> int:
    cfg = _config(args)
    rows = engine.beam_geometry(cfg, args.snapshot, _SCHEMES[args.scheme or "bh"][0],
                                args.num_sats, args.serving)
    buf = [",".join(engine.GEOMETRY_COLUMNS)]
    for sat, b, lat, lon, color, role, active in rows:
        buf.append(f"{sat},{b},{lat:.6f},{lon:.6f},{color},{role},{int(active)}")
    _write("\n".join(buf) + "\n", args.out)
    return EXIT_OK


def cmd_crlb(args) -> int:
    cfg = _config(args)
    scheme = _SCHEMES[args.scheme or "bh"][0]
    cfg = cfg.replace(schemes=(scheme,), num_sats_list=(args.num_sats,))
    if not 0 <= args.snapshot < cfg.num_snapshots:
        raise ConfigError(f"snapshot must lie in 0..{cfg.num_snapshots - 1}")
    capture: dict = {}
    table = engine.run_scenario(cfg, threads=1, ue_ids=[args.ue], last_snapshot=args.snapshot,
                                capture=capture)
    row = next(r for r in table.rows if r.snapshot == args.snapshot)
    out = [f"ue {args.ue} snapshot {args.snapshot} scheme {scheme} n={args.num_sats}",
           f"status {row.status}, serving {row.serving_sat}, measurable {row.num_measurable}"]
    got = capture.get((args.snapshot, args.ue, scheme, args.num_sats))
    if got is not None:
        out.append("selected satellites (reference first):")
        out.append("  sat_id    sinr_db   elev_deg   sigma_range_m")
        for sid, s_db, el, sig in zip(got["selected"], got["sinr_db"], got["elevation"],
                                      got["sigma_tau"] * SPEED_OF_LIGHT):
            out.append(f"  {engine.format_sat(sid):8s} {s_db:8.2f} {el:9.2f} {sig:14.3f}")
        for mode in (MODE_3D, MODE_2D):
            res = got["results"][mode]
            if res is None:
                out.append(f"{mode}: singular FIM")
                continue
            out.append(f"{mode}: crlb {res.crlb_rmse:.3f} m, gdop {res.gdop:.3f}")
            out.append("  FIM (1/m^2):")
            for line in np.array2string(res.fim, precision=6).splitlines():
                out.append("    " + line)
    _write("\n".join(out) + "\n", args.out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _config(args)
    cases = engine.sample_geometries(cfg, args.cases, seed=args.oracle_seed, n=args.num_sats)
    out = ["ue  snap   crlb_m      mc_rmse_m   ratio   nonconv"]
    for i, case in enumerate(cases):
        try:
            mc = monte_carlo_rmse(case["ue_ecef"], case["positions"], case["sigma_tau"],
                                  trials=args.trials, seed=args.oracle_seed + i)
        except NonConvergenceError as exc:
            out.append(f"{case['ue_id']:3d} {case['snapshot']:4d}  {exc}")
            continue
        ratio = mc.rmse / case["crlb"].crlb_rmse
        out.append(f"{case['ue_id']:3d} {case['snapshot']:4d} {case['crlb'].crlb_rmse:9.3f} "
                   f"{mc.rmse:12.3f} {ratio:7.3f} {mc.nonconvergence:8.4f}")
    _write("\n".join(out) + "\n", args.out)
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="icansim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scenario and write results")
    _add_config_args(p)
    p.add_argument("--scheme", choices=sorted(_SCHEMES))
    p.add_argument("--format", choices=("csv", "json", "svg"), default="csv")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--threads", type=int, help="worker threads (default: ICAN_SIM_THREADS or 1)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("summarize", help="percentile statistics of a results file")
    p.add_argument("results", help="CSV or JSON written by 'run'")
    p.add_argument("--brief", action="store_true", help="run-level medians only")
    p.add_argument("--out")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("geometry", help="dump the beam ground points of one cluster")
    _add_config_args(p, scenario=False)
    p.add_argument("--snapshot", type=int, default=0)
    p.add_argument("--scheme", choices=("bh", "tmcb"))
    p.add_argument("--num-sats", type=int, default=8)
    p.add_argument("--serving", help="serving satellite as plane-slot, e.g. 12-40")
    p.add_argument("--out")
    p.set_defaults(func=cmd_geometry)

    p = sub.add_parser("crlb", help="single UE/snapshot deep-dive")
    _add_config_args(p, scenario=False)
    p.add_argument("--ue", type=int, default=0)
    p.add_argument("--snapshot", type=int, default=0)
    p.add_argument("--scheme", choices=("bh", "tmcb"))
    p.add_argument("--num-sats", type=int, default=8)
    p.add_argument("--out")
    p.set_defaults(func=cmd_crlb)

    p = sub.add_parser("oracle", help="Monte-Carlo RMSE against the CRLB")
    _add_config_args(p, scenario=False)
    p.add_argument("--cases", type=int, default=10)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--num-sats", type=int, default=6)
    p.add_argument("--oracle-seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, KeyError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
