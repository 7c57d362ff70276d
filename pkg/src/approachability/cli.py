"""Command-line interface: ``approach {check,simulate,sweep,counterexample,value}``.

Exit codes: 0 approachable (or every check passed), 2 not approachable (or a
check failed), 1 malformed input or any other error.

Options may also come from ``--config file.json``, whose keys are the long
option names (``game``, ``target``, ``horizon``, ...); flags given on the
command line win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import corpus
from .conditions import check_convex_full, check_convex_partial
from .game import GameFormatError, GameSpec, check_mixed, load_json
from .geometry import load_target, target_from_dict
from .incomplete_info import IIGame, cav_u, informed_suite, simulate_guarantee, u_of_p
from .simulator import (log_checkpoints, per_type_regret, run_batch, sweep, write_checkpoint_csv)
from .strategies import (BestResponseExcluder, BlackwellStrategy, BlockStrategy, CalibratedStrategy,
                         DoublingStrategy, FixedMixed, ProbedBestResponse, Stationary, ThresholdExcluder,
                         WeakApproachStrategy, alternating, switching)

log = logging.getLogger("approachability")

EXIT_OK, EXIT_ERROR, EXIT_NOT_APPROACHABLE = 0, 1, 2


class UsageError(ValueError):
    pass


# inputs


def load_game(ref) -> GameSpec:
    """A JSON file, or ``builtin:<name>`` for the bundled games."""
    ref = str(ref)
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        if name not in corpus.GAMES:
            raise UsageError(f"unknown builtin game {name!r}; choose from {sorted(corpus.GAMES)}")
        return corpus.GAMES[name]()
    return GameSpec.load(ref)


def load_target_ref(ref):
    """A JSON file or an inline JSON object."""
    ref = str(ref)
    if ref.lstrip().startswith("{"):
        return target_from_dict(_inline_json(ref, "target"))
    return load_target(ref)


def _inline_json(text, what):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what}: invalid JSON ({exc.msg})") from exc


def parse_spec(value, default_name=None) -> dict:
    """Strategy spec: a name, an inline JSON object or a JSON file, always with a 'name'."""
    if value is None:
        if default_name is None:
            raise UsageError("a strategy is required")
        return {"name": default_name}
    if isinstance(value, dict):
        spec = dict(value)
    else:
        text = str(value)
        if text.lstrip().startswith("{"):
            spec = _inline_json(text, "strategy")
        elif text.endswith(".json"):
            spec = load_json(text)
        else:
            spec = {"name": text}
    if "name" not in spec:
        raise UsageError("strategy spec needs a 'name'")
    return spec


def parse_seeds(value) -> list[int]:
    """``"7"`` (one seed), ``"0:50"`` (range) or ``"1,5,9"``; lists and ints pass through."""
    if isinstance(value, int):
        return [value]
    if isinstance(value, list):
        return [int(v) for v in value]
    text = str(value)
    try:
        if ":" in text:
            a, b = text.split(":")
            seeds = list(range(int(a), int(b)))
        else:
            seeds = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse seeds {text!r}") from exc
    if not seeds:
        raise UsageError("no seeds given")
    return seeds


def parse_horizons(value) -> list[int]:
    if isinstance(value, int):
        vals = [value]
    elif isinstance(value, list):
        vals = [int(v) for v in value]
    else:
        try:
            vals = [int(float(v)) for v in str(value).split(",") if v.strip()]
        except ValueError as exc:
            raise UsageError(f"cannot parse horizon {value!r}") from exc
    if not vals or min(vals) < 1:
        raise UsageError("horizons must be positive")
    return vals


# registries


def _calibrated(game, C, spec, epsilon):
    return CalibratedStrategy.from_game(game, C, float(spec.get("epsilon", epsilon)), steps=spec.get("steps"),
                                        witness=spec.get("witness", "cell"),
                                        estimator=spec.get("estimator", "min-norm"))


def _doubling(game, C, spec, epsilon):
    cache = {}

    def factory(eps):
        if eps not in cache:
            cache[eps] = CalibratedStrategy.from_game(game, C, eps, check=False)
        return cache[eps]

    return DoublingStrategy(factory, game.num_actions_p1, L0=int(spec.get("L0", 64)),
                            growth=int(spec.get("growth", 4)))


STRATEGIES = {
    "blackwell": lambda g, C, s, e: BlackwellStrategy(g, C),
    "blackwell-naive": lambda g, C, s, e: BlackwellStrategy(
        g, C, assumed_opponent=s.get("assumed", np.full(g.num_actions_p2, 1.0 / g.num_actions_p2))),
    "calibrated": _calibrated,
    "doubling": _doubling,
    "block": lambda g, C, s, e: BlockStrategy(int(s.get("max_p", 4))),
    "weak": lambda g, C, s, e: WeakApproachStrategy(int(s.get("k", 2)), int(s.get("M", 4)),
                                                    int(s.get("horizon_block", 10_000))),
    "fixed": lambda g, C, s, e: FixedMixed(s["x"]),
}

ADVERSARIES = {
    "stationary": lambda g, C, s: Stationary(s["y"]),
    "uniform": lambda g, C, s: Stationary(np.full(g.num_actions_p2, 1.0 / g.num_actions_p2), "uniform"),
    "alternating": lambda g, C, s: alternating(g.num_actions_p2),
    "switching": lambda g, C, s: switching(g.num_actions_p2, int(s.get("first", 0)), int(s.get("second", 1)),
                                           int(s["at"])),
    "threshold": lambda g, C, s: ThresholdExcluder(float(s.get("threshold", 0.75)), int(s.get("probe_runs", 200))),
    "best-response": lambda g, C, s: BestResponseExcluder(g, C, int(s.get("probe_runs", 200)),
                                                          float(s.get("mesh", 1 / 64))),
    "probed-br": lambda g, C, s: ProbedBestResponse(g, C, int(s.get("probe_runs", 200))),
}


def build_strategy(spec: dict, game, C, epsilon: float):
    try:
        make = STRATEGIES[spec["name"]]
    except KeyError:
        raise UsageError(f"unknown strategy {spec['name']!r}; choose from {sorted(STRATEGIES)}") from None
    try:
        return make(game, C, spec, epsilon)
    except KeyError as exc:
        raise UsageError(f"strategy {spec['name']!r} needs parameter {exc.args[0]!r}") from None


def build_adversary(spec: dict, game, C):
    try:
        make = ADVERSARIES[spec["name"]]
    except KeyError:
        raise UsageError(f"unknown adversary {spec['name']!r}; choose from {sorted(ADVERSARIES)}") from None
    try:
        return make(game, C, spec)
    except KeyError as exc:
        raise UsageError(f"adversary {spec['name']!r} needs parameter {exc.args[0]!r}") from None


def _label(spec: dict) -> str:
    return str(spec.get("label", spec["name"]))


# commands


def _write_json(path, data):
    text = json.dumps(data, indent=2, sort_keys=True, default=_json_default)
    if path is None:
        return text
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text + "\n")
    return text


def _json_default(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def cmd_check(args) -> int:
    game = load_game(_need(args, "game"))
    C = load_target_ref(_need(args, "target"))
    method = args.method
    if method == "auto":
        method = "full" if game.is_full_monitoring else "partial"
    if method == "full":
        cert = check_convex_full(game, C, tol=args.tol)
    else:
        cert = check_convex_partial(game, C, mesh=args.mesh, tol=args.tol)
    data = {"game": game.name, "target": C.to_dict(), **cert.to_dict()}
    text = _write_json(args.out, data)
    if not args.quiet:
        print(text)
    return EXIT_OK if cert.approachable else EXIT_NOT_APPROACHABLE


def _need(args, key):
    v = getattr(args, key, None)
    if v is None:
        raise UsageError(f"--{key} is required")
    return v


def cmd_simulate(args) -> int:
    game = load_game(_need(args, "game"))
    C = load_target_ref(_need(args, "target"))
    sspec = parse_spec(args.strategy, "blackwell")
    aspec = parse_spec(args.adversary[-1] if args.adversary else None, "uniform")
    horizon = max(parse_horizons(args.horizon))
    seeds = parse_seeds(args.seeds)
    out = Path(args.out or ".")
    sigma = build_strategy(sspec, game, C, args.epsilon)
    tau = build_adversary(aspec, game, C)
    cps = log_checkpoints(horizon)
    res = run_batch(game, sigma, tau, horizon, seeds, target=C, checkpoints=cps)
    witnesses = getattr(sigma, "witnesses", None)
    files = []
    for r, seed in enumerate(seeds):
        freq = reg = None
        if res.type_counts is not None and witnesses is not None:
            pairs = [per_type_regret(game, C, witnesses, res.type_counts[r, c], res.type_y[r, c])
                     for c in range(len(res.checkpoints))]
            freq = np.array([p[0] for p in pairs])
            reg = np.array([p[1] for p in pairs])
        path = out / f"{game.name}_{_label(sspec)}_{_label(aspec)}_{seed}.csv"
        write_checkpoint_csv(path, res.checkpoints, res.averages[r], res.distances[r], freq, reg)
        files.append(path.name)
    final = res.distances[:, -1]
    summary = {"game": game.name, "target": C.to_dict(), "strategy": sspec, "adversary": aspec,
               "horizon": horizon, "seeds": seeds, "files": files,
               "final_distance": {"mean": float(final.mean()), "max": float(final.max()),
                                  "per_seed": final.tolist()},
               "final_average": res.final.tolist()}
    _write_json(out / f"{game.name}_{_label(sspec)}_{_label(aspec)}_summary.json", summary)
    if not args.quiet:
        print(json.dumps(summary["final_distance"]))
    return EXIT_OK


def cmd_sweep(args) -> int:
    game = load_game(_need(args, "game"))
    C = load_target_ref(_need(args, "target"))
    sspec = parse_spec(args.strategy, "blackwell")
    aspecs = [parse_spec(a) for a in (args.adversary or ["uniform"])]
    horizons = parse_horizons(args.horizon)
    seeds = parse_seeds(args.seeds)
    out = Path(args.out or ".")
    taus = [build_adversary(a, game, C) for a in aspecs]
    # strategy construction can be costly: build once and hand out the same object
    proto = build_strategy(sspec, game, C, args.epsilon)
    stats = sweep(game, lambda: proto, taus, horizons, len(seeds), C, n_jobs=args.jobs, seeds=seeds)
    rows = []
    for spec, st in zip(aspecs, stats):
        path = out / f"{game.name}_{_label(sspec)}_{_label(spec)}_sweep.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            fh.write("n,mean_d,mean_sq_d,std_sq_d,q10,q50,q90\n")
            for k, n in enumerate(st.checkpoints):
                vals = [st.mean[k], st.mean_sq[k], st.std_sq[k]] + [st.quantiles[q][k] for q in ("q10", "q50", "q90")]
                fh.write(f"{n}," + ",".join(repr(float(v)) for v in vals) + "\n")
        rows.append({"adversary": _label(spec), **st.to_dict()})
    _write_json(out / f"{game.name}_{_label(sspec)}_sweep.json",
                {"game": game.name, "strategy": sspec, "seeds": seeds, "stats": rows})
    if not args.quiet:
        for r in rows:
            print(r["adversary"], "slope", r["slope"], "mean d", r["mean"][-1])
    return EXIT_OK


def counterexample_report(quick: bool = False, seeds: int | None = None, horizon: int | None = None,
                          max_p: int | None = None) -> dict:
    """The four parts of the counterexample: verdict, exclusion pressure, block play, weak approach."""
    from .experiments import block_report, criterion_7, criterion_9

    game, C = corpus.counterexample("none"), corpus.COUNTEREXAMPLE_TARGET
    cert = check_convex_partial(game, C)
    checker = {"verdict": cert.verdict, "deficit": cert.deficit,
               "excluding_action": cert.excluding_action, "expected_deficit": 0.25}
    checker["passed"] = (not cert.approachable) and abs(cert.deficit - 0.25) <= 1e-6
    n_seeds = seeds or (10 if quick else 100)
    n = horizon or (1000 if quick else 10_000)
    excl = criterion_7(n_seeds=n_seeds, horizon=n)
    exclusion = {"horizon": n, "seeds": n_seeds, "rows": excl.details["rows"], "threshold": 0.2,
                 "passed": excl.passed}
    rep = block_report(max_p or (2 if quick else 4))
    block = {"max_p": rep["max_p"], "lengths": rep["lengths"], "opponents": rep["opponents"]}
    block["passed"] = all(all(o["endpoint_ok"]) and all(x["ok"] for x in o["near_zero"])
                          for o in rep["opponents"].values())
    weak_o = criterion_9(horizon_block=1000 if quick else 10_000, n_runs=200 if quick else 10_000)
    weak = {**weak_o.details, "passed": weak_o.passed}
    report = {"game": game.name, "target": C.to_dict(), "quick": quick, "checker": checker,
              "exclusion": exclusion, "block": block, "weak": weak}
    report["passed"] = all(report[k]["passed"] for k in ("checker", "exclusion", "block", "weak"))
    return json.loads(json.dumps(report, default=_json_default))


def cmd_counterexample(args) -> int:
    report = counterexample_report(quick=args.quick, seeds=len(parse_seeds(args.seeds)) if args.seeds else None,
                                   horizon=max(parse_horizons(args.horizon)) if args.horizon else None,
                                   max_p=args.max_p)
    text = _write_json(args.out, report)
    if not args.quiet:
        print(text)
    return EXIT_OK if report["passed"] else EXIT_NOT_APPROACHABLE


def cmd_value(args) -> int:
    g = IIGame.load(_need(args, "game"))
    if args.prior is not None:
        try:
            prior = [float(v) for v in str(args.prior).split(",")]
        except ValueError as exc:
            raise UsageError(f"cannot parse prior {args.prior!r}") from exc
        g = g.with_prior(check_mixed(prior, g.K, "prior"))
    mesh = args.mesh if args.mesh is not None else 1 / 50
    cav = cav_u(g, mesh=mesh)
    data = {"game": g.name, "prior": g.prior, "u": u_of_p(g, g.prior), "cav_u": cav.value,
            "m": None if cav.m is None else cav.m, "mesh": mesh}
    if args.simulate and cav.m is not None:
        horizon = max(parse_horizons(args.horizon or 10_000))
        seeds = parse_seeds(args.seeds or "0:50")
        sims = simulate_guarantee(g, cav.m, informed_suite(g), horizon, seeds)
        data["simulation"] = {"horizon": horizon, "seeds": len(seeds),
                              "profiles": {k: {"mean": float(v.mean()), "max": float(v.max())}
                                           for k, v in sims.items()}}
    text = _write_json(args.out, data)
    if not args.quiet:
        print(text)
    return EXIT_OK


# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default option values")
    common.add_argument("--game", help="game JSON file or builtin:<name>")
    common.add_argument("--target", help="target JSON file or inline JSON object")
    common.add_argument("--strategy", help="strategy name, inline JSON or JSON file")
    common.add_argument("--adversary", action="append",
                        help="adversary name, inline JSON or JSON file (repeat for sweep)")
    common.add_argument("--horizon", help="horizon, or comma-separated horizons for sweep")
    common.add_argument("--seeds", help="seed, a:b range or comma list")
    common.add_argument("--mesh", type=float, help="grid mesh of the checkers")
    common.add_argument("--epsilon", type=float, default=0.05, help="calibration accuracy")
    common.add_argument("--out", help="output file (check, counterexample, value) or directory")
    common.add_argument("--quiet", action="store_true", help="do not print results")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="approach", description="Approachability checks and simulations.")
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("check", parents=[common], help="decide approachability of a convex target")
    c.add_argument("--method", choices=["auto", "full", "partial"], default="auto")
    c.add_argument("--tol", type=float, default=1e-6)
    sub.add_parser("simulate", parents=[common], help="play one strategy pair and write checkpoint CSVs")
    s = sub.add_parser("sweep", parents=[common], help="distance statistics over adversaries and horizons")
    s.add_argument("--jobs", type=int, default=1, help="worker processes")
    x = sub.add_parser("counterexample", parents=[common], help="reproduce the no-signal counterexample")
    x.add_argument("--quick", action="store_true", help="small sizes, runs in about a second")
    x.add_argument("--max-p", type=int, dest="max_p", help="number of blocks of the block strategy")
    v = sub.add_parser("value", parents=[common], help="Cav(u) of an incomplete-information game")
    v.add_argument("--prior", help="comma-separated prior overriding the file")
    v.add_argument("--simulate", action="store_true", help="check the guarantee by simulation")
    return p


COMMANDS = {"check": cmd_check, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "counterexample": cmd_counterexample, "value": cmd_value}


def _apply_config(args, argv):
    if not args.config:
        return args
    conf = load_json(args.config)
    if not isinstance(conf, dict):
        raise UsageError("config must be a JSON object")
    given = {a.split("=", 1)[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
    for key, val in conf.items():
        key = key.replace("-", "_")
        if key == "command" or key in given:
            continue
        if not hasattr(args, key):
            raise UsageError(f"unknown config key {key!r}")
        if key == "strategy" and isinstance(val, dict):
            val = json.dumps(val)
        if key == "adversary":
            val = [json.dumps(v) if isinstance(v, dict) else v for v in (val if isinstance(val, list) else [val])]
        if key in ("horizon", "seeds") and isinstance(val, list):
            val = ",".join(str(v) for v in val)
        setattr(args, key, val)
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args = _apply_config(args, argv)
        if args.mesh is not None and not args.mesh > 0:
            raise UsageError("--mesh must be positive")
        if args.command == "check" and args.mesh is None:
            args.mesh = 1 / 64
        return COMMANDS[args.command](args)
    except (UsageError, GameFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
