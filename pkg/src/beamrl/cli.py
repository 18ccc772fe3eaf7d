"""Command-line client for the simulator service.

By default commands run in-process through the same entry points the
FastAPI service uses; pass --server URL to submit against a running
service instead.  Exit codes: 0 success, 2 config error, 3 when a run's
slots were all lost to numerical singularities.

Imports of the numeric stack are deferred until after argument parsing
so that --deterministic can pin the BLAS thread pools first.
"""

import argparse
import itertools
import json
import os
import sys
import time

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SINGULAR = 3


def _parser():
    parser = argparse.ArgumentParser(
        prog="beamrl",
        description="Massive-MIMO beam selection under channel aging: "
        "DRL policies vs classical baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--profile", default="paper", choices=["paper", "desk"],
                       help="base profile when no --config is given")
        p.add_argument("--seed", type=int, action="append",
                       help="seed (repeatable); overrides the config's seeds")
        p.add_argument("--policy",
                       help="comma-separated policies; overrides the config")
        p.add_argument("--slots", type=int, help="cap on slots per run")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--deterministic", action="store_true",
                       help="pin numerical thread pools to one thread")
        p.add_argument("--server", help="base URL of a running beamrl service")

    run_p = sub.add_parser("run", help="run the configured policies")
    add_common(run_p)

    sweep_p = sub.add_parser("sweep", help="grid sweep over config keys")
    add_common(sweep_p)
    sweep_p.add_argument(
        "--grid", action="append", required=True, metavar="KEY=V1,V2,...",
        help="config key with comma-separated values (repeatable)",
    )

    stats_p = sub.add_parser("stats", help="CDF/quartiles from an emitted CSV")
    stats_p.add_argument("--input", required=True, help="CSV produced by run")
    stats_p.add_argument("--column", default="avg_rate")
    stats_p.add_argument("--grid-points", type=int, default=101)
    stats_p.add_argument("--ma-window", type=int, default=0,
                         help="apply a moving average before the stats")
    stats_p.add_argument("--out", help="write the CDF grid as CSV here")

    serve_p = sub.add_parser("serve", help="start the FastAPI service")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8000)
    return parser


def _pin_threads():
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        os.environ[var] = "1"


def _load_base_config(args):
    from .config import ExperimentConfig, desk_profile, load_config

    if args.config:
        return load_config(args.config)
    return desk_profile() if args.profile == "desk" else ExperimentConfig()


def _apply_cli_overrides(cfg, args):
    from .config import config_overrides

    overrides = {}
    if args.seed:
        overrides["seeds"] = tuple(args.seed)
    if args.policy:
        overrides["policies"] = tuple(
            p.strip() for p in args.policy.split(",") if p.strip()
        )
    if overrides:
        cfg = config_overrides(cfg, overrides)
    return cfg


def _run_local(cfg, slots, out_dir, tag="run"):
    from .harness import emit_csv, run_experiment, summarize

    os.makedirs(out_dir, exist_ok=True)

    def progress(policy, seed, done, total):
        print(f"  {policy} seed={seed}: {done}/{total} slots", flush=True)

    records = run_experiment(cfg, slots=slots, progress=progress)
    csv_path = os.path.join(out_dir, f"{tag}.csv")
    emit_csv(records, csv_path, cfg.k, cfg.n_s)
    summaries = summarize(records, cfg.ma_window)
    for s in summaries:
        print(
            f"{s['policy']:>8} seed={s['seed']}: mean rate "
            f"{s['mean_rate']:.4f}, final MA {s['final_ma_rate']:.4f} "
            f"bits/s/Hz ({s['singular_slots']} singular slots)"
        )
    print(f"records written to {csv_path}")
    aborted = any(
        s["singular_slots"] == s["slots"] and s["slots"] > 0 for s in summaries
    )
    return EXIT_SINGULAR if aborted else EXIT_OK


def _run_remote(args, cfg, slots, out_dir, tag="run"):
    import httpx

    from .config import format_config

    payload = {"config_text": format_config(cfg), "slots": slots}
    base = args.server.rstrip("/")
    with httpx.Client(base_url=base, timeout=60.0) as client:
        resp = client.post("/jobs", json=payload)
        if resp.status_code == 422:
            print(f"config rejected: {resp.json()['detail']}", file=sys.stderr)
            return EXIT_CONFIG
        resp.raise_for_status()
        job_id = resp.json()["job_id"]
        print(f"submitted job {job_id}")
        while True:
            status = client.get(f"/jobs/{job_id}").json()
            if status["state"] in ("done", "failed"):
                break
            print(f"  {status['detail'] or status['state']}", flush=True)
            time.sleep(1.0)
        if status["state"] == "failed":
            print(f"job failed: {status['detail']}", file=sys.stderr)
            return 1
        os.makedirs(out_dir, exist_ok=True)
        csv_text = client.get(f"/jobs/{job_id}/csv").text
        csv_path = os.path.join(out_dir, f"{tag}.csv")
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text)
        for s in status["summaries"]:
            print(
                f"{s['policy']:>8} seed={s['seed']}: mean rate "
                f"{s['mean_rate']:.4f}, final MA {s['final_ma_rate']:.4f}"
            )
        print(f"records written to {csv_path}")
        aborted = any(
            s["singular_slots"] == s["slots"] and s["slots"] > 0
            for s in status["summaries"]
        )
        return EXIT_SINGULAR if aborted else EXIT_OK


def cmd_run(args):
    from .errors import ConfigError

    try:
        cfg = _apply_cli_overrides(_load_base_config(args), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.server:
        return _run_remote(args, cfg, args.slots, args.out)
    return _run_local(cfg, args.slots, args.out)


def cmd_sweep(args):
    from .config import config_overrides, _parse_value  # shared key parsing
    from .errors import ConfigError

    try:
        base = _apply_cli_overrides(_load_base_config(args), args)
        axes = []
        for spec in args.grid:
            key, _, values = spec.partition("=")
            key = key.strip()
            if not values:
                raise ConfigError(f"--grid needs KEY=V1,V2,..., got {spec!r}")
            axes.append(
                (key, [_parse_value(key, v) for v in values.split(",")])
            )
    except (ConfigError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    worst = EXIT_OK
    for combo in itertools.product(*(vals for _, vals in axes)):
        overrides = {key: val for (key, _), val in zip(axes, combo)}
        try:
            cfg = config_overrides(base, overrides)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        tag = "run_" + "_".join(
            f"{key}={val}" for (key, _), val in zip(axes, combo)
        )
        print(f"== sweep point {tag}")
        if args.server:
            code = _run_remote(args, cfg, args.slots, args.out, tag=tag)
        else:
            code = _run_local(cfg, args.slots, args.out, tag=tag)
        worst = max(worst, code)
    return worst


def cmd_stats(args):
    from .harness import load_csv
    from .stats import distribution_stats, moving_average

    rows = load_csv(args.input)
    if not rows:
        print("empty CSV", file=sys.stderr)
        return EXIT_CONFIG
    if args.column not in rows[0]:
        print(f"no column {args.column!r} in {args.input}", file=sys.stderr)
        return EXIT_CONFIG
    values = [row[args.column] for row in rows]
    if args.ma_window > 1:
        values = list(moving_average(values, args.ma_window))
    d = distribution_stats(values, args.grid_points)
    summary = {
        "column": args.column,
        "count": len(values),
        "q1": d.q1,
        "median": d.median,
        "q3": d.q3,
        "whisker_low": d.whisker_low,
        "whisker_high": d.whisker_high,
    }
    print(json.dumps(summary, indent=2))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write("value,cdf\n")
            for g, c in zip(d.grid, d.cdf):
                fh.write(f"{g!r},{c!r}\n")
        print(f"CDF grid written to {args.out}")
    return EXIT_OK


def cmd_serve(args):
    import uvicorn

    uvicorn.run("beamrl.service:app", host=args.host, port=args.port)
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    if getattr(args, "deterministic", False):
        _pin_threads()
    handlers = {
        "run": cmd_run,
        "sweep": cmd_sweep,
        "stats": cmd_stats,
        "serve": cmd_serve,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
