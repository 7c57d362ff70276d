"""Repeated play of a batch of independent runs, with omniscient evaluation.

The engine samples both actions and Player 1's signal from per-run streams,
feeds each player only what it is allowed to see, and keeps compensated
running sums of the payoffs.  The opponent's mixed actions are recorded for
the evaluator (true flags), never passed to Player 1.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .game import GameSpec, flag_of, inverse_flag_polytope, sample_signals
from .geometry import ConvexTarget
from .rng import SIM_TAG, UniformStreams, sample_rows
from .running import KahanSum
from .solvers import enumerate_vertices, min_max_distance

PROBE_BASE = 1 << 40


class SimulationError(RuntimeError):
    """A strategy failed; the message names the stage."""


@dataclass
class Trace:
    """One simulated play.  Stage arrays are indexed by t - 1."""

    seed: int
    game: str
    actions_p1: np.ndarray
    actions_p2: np.ndarray
    signals: np.ndarray
    mixed_x: np.ndarray
    mixed_y: np.ndarray
    payoffs: np.ndarray
    averages: np.ndarray
    types: np.ndarray | None = None
    target: str = ""

    @property
    def horizon(self) -> int:
        return len(self.actions_p1)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("seed", "game", "target")}
        for k in ("actions_p1", "actions_p2", "signals", "mixed_x", "mixed_y", "payoffs", "averages", "types"):
            v = getattr(self, k)
            out[k] = None if v is None else v.tolist()
        return out


@dataclass
class BatchResult:
    seeds: list
    horizon: int
    checkpoints: np.ndarray
    averages: np.ndarray  # (R, C, d) average payoff at each checkpoint
    action_counts: np.ndarray  # (R, I)
    distances: np.ndarray | None = None  # (R, C)
    type_counts: np.ndarray | None = None  # (R, C, L)
    type_y: np.ndarray | None = None  # (R, C, L, J) sums of the opponent's mixed actions per type
    traces: list = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.averages[:, -1]


def _checkpoint_list(horizon, checkpoints):
    if checkpoints is None:
        return np.array([horizon])
    cps = sorted({int(c) for c in checkpoints if 1 <= c <= horizon})
    if not cps or cps[-1] != horizon:
        cps.append(horizon)
    return np.array(cps)


def run_batch(game: GameSpec, sigma, tau, horizon: int, seeds, target: ConvexTarget | None = None,
              checkpoints=None, record: bool = False, track_types: bool = True) -> BatchResult:
    """Play ``horizon`` stages of (sigma, tau) for every seed.

    Args:
        game: the game; sigma plays rows, tau plays columns.
        sigma, tau: batched strategies (see :mod:`approachability.strategies`).
        horizon: number of stages.
        seeds: one integer seed per run.
        target: if given, distances to it are reported at checkpoints.
        checkpoints: stages at which averages are stored (the horizon always is).
        record: keep full per-stage traces.
        track_types: accumulate per-type counts and opponent mixed actions
            when sigma exposes types.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    seeds = [int(s) for s in seeds]
    R = len(seeds)
    n_i, n_j, d = game.payoffs.shape
    cps = _checkpoint_list(horizon, checkpoints)
    if hasattr(tau, "prepare"):
        tau.prepare(game, sigma, horizon)
    sigma.reset(seeds)
    tau.reset(seeds)
    streams = UniformStreams(seeds, SIM_TAG)
    total = KahanSum((R, d))
    counts = np.zeros((R, n_i), dtype=np.int64)
    avg_out = np.empty((R, len(cps), d))
    L = getattr(sigma, "n_types", 0) if track_types else 0
    if L:
        tcount = np.zeros((R, L), dtype=np.int64)
        ty = np.zeros((R, L, n_j))
        tc_out = np.empty((R, len(cps), L), dtype=np.int64)
        ty_out = np.empty((R, len(cps), L, n_j))
    if record:
        rec = {k: [] for k in ("i", "j", "s", "x", "y", "pay", "avg", "types")}
    rows = np.arange(R)
    k = 0
    for t in range(1, horizon + 1):
        try:
            x = sigma.next_mixed()
            y = tau.next_mixed()
        except Exception as exc:
            raise SimulationError(f"stage {t}: {type(exc).__name__}: {exc}") from exc
        u = streams.draw(3)
        i = sample_rows(x, u[:, 0])
        j = sample_rows(y, u[:, 1])
        s = sample_signals(game, i, j, u[:, 2])
        pay = game.payoffs[i, j]
        total.add(pay)
        counts[rows, i] += 1
        types = sigma.current_types if L else None
        if L and types is not None:
            tcount[rows, types] += 1
            ty[rows, types] += y
        try:
            sigma.observe(i, s, pay)
            tau.observe(i, j, s)
        except Exception as exc:
            raise SimulationError(f"stage {t}: {type(exc).__name__}: {exc}") from exc
        if record:
            for key, val in (("i", i), ("j", j), ("s", s), ("x", np.array(x)), ("y", np.array(y)),
                             ("pay", pay), ("avg", total.mean())):
                rec[key].append(val)
            rec["types"].append(None if types is None else np.array(types))
        if t == cps[k]:
            avg_out[:, k] = total.mean()
            if L:
                tc_out[:, k] = tcount
                ty_out[:, k] = ty
            k += 1
    res = BatchResult(seeds, horizon, cps, avg_out, counts)
    if target is not None:
        res.distances = target.distance(avg_out.reshape(-1, d)).reshape(R, len(cps))
    if L:
        res.type_counts, res.type_y = tc_out, ty_out
    if record:
        st = {k: np.stack(v, axis=1) for k, v in rec.items() if k != "types"}
        has_types = rec["types"] and rec["types"][0] is not None
        types_arr = np.stack(rec["types"], axis=1) if has_types else None
        for r, seed in enumerate(seeds):
            res.traces.append(Trace(seed, game.name, st["i"][r], st["j"][r], st["s"][r], st["x"][r], st["y"][r],
                                    st["pay"][r], st["avg"][r],
                                    None if types_arr is None else types_arr[r],
                                    "" if target is None else repr(target)))
    return res


def run(game: GameSpec, sigma, tau, horizon: int, seed: int, target: ConvexTarget | None = None) -> Trace:
    """Single recorded run."""
    return run_batch(game, sigma, tau, horizon, [seed], target=target, record=True).traces[0]


def probe_action_frequency(game, sigma, tau, horizon: int, runs: int) -> np.ndarray:
    """Monte-Carlo estimate of E[average action of Player 1] over ``horizon`` stages."""
    res = run_batch(game, sigma, tau, horizon, [PROBE_BASE + r for r in range(runs)], track_types=False)
    return res.action_counts.sum(axis=0) / (runs * horizon)


# evaluation


def metrics(trace: Trace, C: ConvexTarget) -> np.ndarray:
    """d_C of the running average at every stage."""
    return np.asarray(C.distance(trace.averages))


def type_regret(game: GameSpec, C: ConvexTarget, witness, y_avg, tol: float = 1e-6) -> float:
    """sup_x G(x, mu) - G(x(l), mu) for the flag mu of the average opponent action y_avg."""
    if game.is_full_monitoring:
        verts = np.atleast_2d(y_avg)
    else:
        verts = np.array(enumerate_vertices(inverse_flag_polytope(game, flag_of(game, y_avg)),
                                            check_bounded=False))
    own = float(C.distance(np.einsum("i,vj,ijd->vd", witness, verts, game.payoffs)).max())
    if own <= tol:
        return own
    _, best = min_max_distance(game, verts, C, tol=tol)
    return max(own - best, 0.0)


def per_type_regret(game: GameSpec, C: ConvexTarget, witnesses, counts, y_sums, tol: float = 1e-6):
    """(|N(l)|/n, R(l)) for every type from per-type counts and opponent-action sums.

    Types never played get weight 0 and regret 0.
    """
    counts = np.asarray(counts)
    n = counts.sum()
    freq = counts / max(n, 1)
    reg = np.zeros(len(counts))
    for l in np.flatnonzero(counts):
        y = y_sums[l] / counts[l]
        y = np.clip(y, 0.0, None)
        reg[l] = type_regret(game, C, witnesses[l], y / y.sum(), tol)
    return freq, reg


def per_type_regret_trace(trace: Trace, witnesses, game: GameSpec, C: ConvexTarget, stages=None):
    """Series of (|N_t(l)|/t, R_t(l)) at the given stages of a recorded trace."""
    if trace.types is None:
        raise ValueError("trace has no type assignments")
    if trace.mixed_y is None:
        raise ValueError("trace lacks the opponent's mixed actions (omniscient data)")
    stages = [trace.horizon] if stages is None else stages
    L = len(witnesses)
    out = []
    for t in stages:
        tp = trace.types[:t]
        counts = np.bincount(tp, minlength=L)
        sums = np.zeros((L, trace.mixed_y.shape[1]))
        np.add.at(sums, tp, trace.mixed_y[:t])
        out.append(per_type_regret(game, C, witnesses, counts, sums))
    return out


def consistency_gap(freq, reg, eps: float) -> float:
    """max_l (|N(l)|/n) (R(l) - eps)."""
    return float(np.max(freq * (reg - eps)))


def excursion_frequency(distances, checkpoints, N: int, eta: float) -> float:
    """Fraction of runs with d >= eta at some checkpoint n >= N."""
    sel = np.asarray(checkpoints) >= N
    return float((np.asarray(distances)[:, sel] >= eta).any(axis=1).mean())


def loglog_slope(ns, values, min_n: int = 100) -> float:
    ns = np.asarray(ns, float)
    values = np.asarray(values, float)
    ok = (ns >= min_n) & (values > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(ns[ok]), np.log(values[ok]), 1)[0])


@dataclass
class RunStats:
    adversary: str
    checkpoints: list
    mean: list
    mean_sq: list
    std_sq: list
    quantiles: dict
    slope: float
    n_seeds: int
    distances: np.ndarray | None = None

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("adversary", "checkpoints", "mean", "mean_sq", "std_sq",
                                             "quantiles", "slope", "n_seeds")}
        return json.loads(json.dumps(out, default=float))


def _stats(name, cps, D):
    qs = {f"q{int(q * 100)}": np.quantile(D, q, axis=0).tolist() for q in (0.1, 0.5, 0.9)}
    sq = D ** 2
    return RunStats(name, [int(c) for c in cps], D.mean(axis=0).tolist(), sq.mean(axis=0).tolist(),
                    sq.std(axis=0).tolist(), qs, loglog_slope(cps, sq.mean(axis=0)), D.shape[0], D)


def _sweep_one(args):
    game, sigma_factory, tau, horizons, seeds, C = args
    sigma = sigma_factory()
    if hasattr(tau, "prepare"):
        # horizon-indexed: one batch per horizon
        cols = [run_batch(game, sigma, tau, h, seeds, target=C, track_types=False).distances[:, -1]
                for h in horizons]
        return _stats(tau.name, horizons, np.stack(cols, axis=1))
    res = run_batch(game, sigma, tau, max(horizons), seeds, target=C, checkpoints=horizons, track_types=False)
    return _stats(tau.name, res.checkpoints, res.distances)


def sweep(game: GameSpec, sigma_factory, taus, horizons, n_seeds: int, C: ConvexTarget,
          seed0: int = 0, n_jobs: int = 1, seeds=None) -> list[RunStats]:
    """Distance statistics of sigma against each adversary at each horizon.

    Seeds are ``seed0, ..., seed0 + n_seeds - 1`` unless given explicitly.
    Results are ordered like ``taus``; parallel execution does not change them.
    """
    horizons = sorted(int(h) for h in horizons)
    seeds = list(range(seed0, seed0 + n_seeds)) if seeds is None else [int(s) for s in seeds]
    jobs = [(game, sigma_factory, tau, horizons, seeds, C) for tau in taus]
    if n_jobs == 1:
        return [_sweep_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_sweep_one, jobs))


def log_checkpoints(horizon: int, per_decade: int = 4) -> list[int]:
    pts = {int(round(10 ** (k / per_decade))) for k in range(int(per_decade * math.log10(horizon)) + 1)}
    return sorted(p for p in pts | {horizon} if p <= horizon)


def write_checkpoint_csv(path, checkpoints, averages, distances, type_freq=None, type_regret=None) -> None:
    """One row per checkpoint: n, d_C, rho_bar_1..d, then freq_l and regret_l per type."""
    averages = np.asarray(averages)
    d = averages.shape[1]
    header = ["n", "d_C"] + [f"rho_bar_{k + 1}" for k in range(d)]
    L = 0 if type_freq is None else np.asarray(type_freq).shape[1]
    header += [f"freq_{l}" for l in range(L)] + [f"regret_{l}" for l in range(L)]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k, n in enumerate(checkpoints):
            row = [int(n), repr(float(distances[k]))] + [repr(float(v)) for v in averages[k]]
            if L:
                row += [repr(float(v)) for v in type_freq[k]] + [repr(float(v)) for v in type_regret[k]]
            w.writerow(row)
