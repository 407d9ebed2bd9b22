"""Reproducible experiment runner.

Subcommands: sample | evolve | test-invariance | verify-lemma |
gen-functional | compare-oracles.  Every run needs an explicit master seed
(--seed or QUASISTAT_SEED); per-replica generators are spawned from it as
SeedSequence(seed, spawn_key=(stream, replica)), so outputs are byte-stable.
Exit codes: 0 all checks pass, 1 statistical rejection, 2 usage/config error.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import analysis, dynamics, pointproc, stattest

DEFAULTS = {
    "kind": "pd",
    "alpha": 0.5,
    "alphas": "0.3,0.7",   # mixture components for kind=mixture-of-pd
    "rho": 1.0,
    "beta": 1.0,
    "mu": 0.0,
    "sigma": 1.0,
    "replicas": 2000,
    "trunc_n": 500,
    "tau": 1,
    "topk": 5,
    "level": 0.01,
    "n_perm": 199,
    "f_a": 0.5,
    "f_d": 0.5,
    "ck": 1.5,             # C + K for the jump-event bound
    "grid_points": 100,
    "input": "",
    "out": ".",
}

_INT_KEYS = {"replicas", "trunc_n", "tau", "topk", "n_perm", "grid_points", "seed"}
_STR_KEYS = {"kind", "alphas", "input", "out"}


class ConfigError(ValueError):
    pass


def load_config_file(path):
    """Flat key=value file; '#' starts a comment, blank lines ignored."""
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
                key, value = (s.strip() for s in line.split("=", 1))
                key = key.replace("-", "_")
                if key not in DEFAULTS and key != "seed":
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = value
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    return values


def _coerce(key, value):
    if key in _STR_KEYS:
        return str(value)
    if key in _INT_KEYS:
        return int(value)
    return float(value)


def resolve_config(args):
    """defaults < config file < command-line flags; returns a plain dict."""
    cfg = dict(DEFAULTS)
    cfg["seed"] = None
    if args.config:
        for key, value in load_config_file(args.config).items():
            cfg[key] = _coerce(key, value)
    for key in list(DEFAULTS) + ["seed"]:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = _coerce(key, value)
    if cfg["seed"] is None and os.environ.get("QUASISTAT_SEED"):
        cfg["seed"] = int(os.environ["QUASISTAT_SEED"])
    if cfg["seed"] is None:
        raise ConfigError("a master seed is required (--seed or QUASISTAT_SEED)")
    for key, lo in [("replicas", 1), ("trunc_n", 1), ("topk", 1), ("n_perm", 199)]:
        if cfg[key] < lo:
            raise ConfigError(f"{key} must be >= {lo}")
    if cfg["tau"] < 0:
        raise ConfigError("tau must be >= 0")
    if not 0 < cfg["level"] < 1:
        raise ConfigError("level must be in (0, 1)")
    return cfg


def replica_rng(seed, stream, replica=0):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, replica)))


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _increment_law(cfg):
    return dynamics.IncrementLaw.gaussian(cfg["mu"], cfg["sigma"])


def _mixture_alphas(cfg):
    try:
        alphas = [float(s) for s in cfg["alphas"].split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"bad alphas list {cfg['alphas']!r}")
    if not alphas or any(not 0 < a < 1 for a in alphas):
        raise ConfigError("mixture alphas must lie in (0, 1)")
    return alphas


def _sample_partition(cfg, kind, rng):
    n = cfg["trunc_n"]
    if kind == "pd":
        return pointproc.sample_pd_poisson_kingman(cfg["alpha"], n, rng)
    if kind == "geometric":
        masses = 0.5 ** np.arange(1, n + 1)
        return pointproc.MassPartition(masses, tail_mass=0.5 ** n)
    if kind == "mixture-of-pd":
        alphas = _mixture_alphas(cfg)
        alpha = alphas[rng.integers(len(alphas))]
        return pointproc.sample_pd_poisson_kingman(alpha, n, rng)
    raise ConfigError(f"unsupported partition kind {kind!r}")


def _mass_matrix(cfg, kind, stream, evolved=False):
    """Replica x top-k matrix of masses, optionally after one reshuffle."""
    k, law, beta = cfg["topk"], _increment_law(cfg), cfg["beta"]
    rows = np.empty((cfg["replicas"], k))
    for i in range(cfg["replicas"]):
        rng = replica_rng(cfg["seed"], stream, i)
        part = _sample_partition(cfg, kind, rng)
        if evolved:
            for _ in range(max(1, cfg["tau"])):
                part = dynamics.evolve_multiplicative(part, law, beta=beta, rng=rng)
        if len(part) < k:
            raise ConfigError("trunc_n too small for requested topk")
        rows[i] = part.masses[:k]
    return rows


def _gap_matrix(cfg, stream, tau):
    """Replica x top-k matrix of gaps of PP(rho), after tau additive steps."""
    k, law = cfg["topk"], _increment_law(cfg)
    rows = np.empty((cfg["replicas"], k))
    for i in range(cfg["replicas"]):
        rng = replica_rng(cfg["seed"], stream, i)
        config = pointproc.sample_pp_exponential(cfg["rho"], cfg["trunc_n"], rng, beta=cfg["beta"])
        for _ in range(tau):
            config = dynamics.evolve_additive(config, law, rng)
        rows[i] = analysis.gap_vector(config, k)
    return rows


def _matrix_from_file(cfg):
    if not cfg["input"]:
        raise ConfigError("kind=custom-from-file requires input=<csv path>")
    try:
        data = np.loadtxt(cfg["input"], delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise ConfigError(f"cannot read input file: {exc}")
    if data.shape[0] < 2:
        raise ConfigError("custom input needs at least 2 rows")
    return data


def _record(cfg, experiment, started, **extra):
    rec = {
        "experiment": experiment,
        "config": {k: cfg[k] for k in sorted(cfg)},
        "runtime_seconds": round(time.time() - started, 3),
    }
    rec.update(extra)
    return rec


def _json_default(obj):
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _emit(cfg, experiment, record):
    os.makedirs(cfg["out"], exist_ok=True)
    path = os.path.join(cfg["out"], f"{experiment}_report.json")
    with open(path, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def cmd_sample(cfg):
    started = time.time()
    if cfg["kind"] == "pp":
        rows = np.empty((cfg["replicas"], cfg["topk"]))
        for i in range(cfg["replicas"]):
            rng = replica_rng(cfg["seed"], 0, i)
            config = pointproc.sample_pp_exponential(cfg["rho"], cfg["trunc_n"], rng, beta=cfg["beta"])
            rows[i] = config.points[: cfg["topk"]]
        header = [f"x_{j}" for j in range(1, cfg["topk"] + 1)]
    else:
        rows = _mass_matrix(cfg, cfg["kind"], stream=0)
        header = [f"xi_{j}" for j in range(1, cfg["topk"] + 1)]
    os.makedirs(cfg["out"], exist_ok=True)
    csv_path = os.path.join(cfg["out"], "sample.csv")
    write_csv(csv_path, header, rows)
    record = _record(cfg, "sample", started, files=[csv_path],
                     column_means=[float(m) for m in rows.mean(axis=0)])
    _emit(cfg, "sample", record)
    return record, True


def cmd_evolve(cfg):
    started = time.time()
    if cfg["kind"] == "pp":
        rows = _gap_matrix(cfg, stream=0, tau=cfg["tau"])
        header = [f"gap_{j}" for j in range(1, cfg["topk"] + 1)]
    else:
        rows = _mass_matrix(cfg, cfg["kind"], stream=0, evolved=cfg["tau"] > 0)
        header = [f"xi_{j}" for j in range(1, cfg["topk"] + 1)]
    os.makedirs(cfg["out"], exist_ok=True)
    csv_path = os.path.join(cfg["out"], "evolved.csv")
    write_csv(csv_path, header, rows)
    record = _record(cfg, "evolve", started, files=[csv_path])
    _emit(cfg, "evolve", record)
    return record, True


def cmd_test_invariance(cfg):
    started = time.time()
    kind = cfg["kind"]
    law, beta = _increment_law(cfg), cfg["beta"]
    if kind == "pp":
        before = _gap_matrix(cfg, stream=0, tau=0)
        after = _gap_matrix(cfg, stream=1, tau=max(1, cfg["tau"]))
        names = [f"gap_{j}" for j in range(1, cfg["topk"] + 1)]
    elif kind == "custom-from-file":
        data = _matrix_from_file(cfg)
        half = data.shape[0] // 2
        before = data[:half, : cfg["topk"]]
        after = np.empty((data.shape[0] - half, cfg["topk"]))
        for i, row in enumerate(data[half:]):
            rng = replica_rng(cfg["seed"], 1, i)
            total = row.sum()
            if total > 1 + 1e-9:
                raise ConfigError("custom rows must sum to at most 1")
            part = pointproc.MassPartition(np.sort(row[row > 0])[::-1],
                                           tail_mass=max(0.0, 1.0 - total))
            part = dynamics.evolve_multiplicative(part, law, beta=beta, rng=rng)
            after[i] = part.masses[: cfg["topk"]]
        names = [f"xi_{j}" for j in range(1, cfg["topk"] + 1)]
    else:
        before = _mass_matrix(cfg, kind, stream=0)
        after = _mass_matrix(cfg, kind, stream=1, evolved=True)
        names = [f"xi_{j}" for j in range(1, cfg["topk"] + 1)]
    report = stattest.invariance_verdict(before, after, level=cfg["level"],
                                         n_perm=cfg["n_perm"], rng=replica_rng(cfg["seed"], 2))
    os.makedirs(cfg["out"], exist_ok=True)
    pcsv = os.path.join(cfg["out"], "pvalues.csv")
    write_csv(pcsv, ["coordinate", "ks_statistic", "ks_p"],
              [[j + 1, d, p] for j, (d, p) in enumerate(report.per_coordinate_ks)])
    record = _record(
        cfg, "test_invariance", started,
        coordinates=names,
        ks=[{"coordinate": n, "statistic": d, "p": p}
            for n, (d, p) in zip(names, report.per_coordinate_ks)],
        energy_p=report.energy_p,
        verdict=report.verdict,
        files=[pcsv],
    )
    _emit(cfg, "test_invariance", record)
    return record, report.verdict == "consistent"


def cmd_verify_lemma(cfg):
    started = time.time()
    law, beta, tau = _increment_law(cfg), cfg["beta"], cfg["tau"]
    v = analysis.v_beta(law, beta)
    speed = v / beta * tau
    grid = np.linspace(-5.0, speed + 5.0, cfg["grid_points"])
    markov_violations = 0
    z_violations = 0
    max_ratio = 0.0
    starts = []
    for i in range(cfg["replicas"]):
        rng = replica_rng(cfg["seed"], 0, i)
        config = pointproc.points_from_arrivals(
            pointproc.sample_gamma_arrivals(cfg["trunc_n"], rng), rho=cfg["alpha"], beta=beta
        )
        config = dynamics.shift_tail(config)
        starts.append(config)
        profile = analysis.front_profile(config, law, tau)
        fvals = profile(grid)
        rhs = (1.0 + config.tail_weight_estimate) * np.exp(v * tau - beta * grid)
        markov_violations += int(np.any(fvals > rhs))
        max_ratio = max(max_ratio, float(np.max(fvals / rhs)))
        # F strictly decreasing, so F(speed) <= 1 pins Z <= (v/beta)*tau
        if tau > 0 and profile(speed) > 1.0:
            z_violations += 1
    ck = cfg["ck"]
    jump = analysis.jump_event_bound_check(
        starts, law, tau, K=ck - (law.mean() - 1.0), C=law.mean() - 1.0,
        beta=beta, rng=replica_rng(cfg["seed"], 1),
    )
    passed = markov_violations == 0 and z_violations == 0 and jump.passed
    record = _record(
        cfg, "verify_lemma", started,
        v_beta=v,
        markov_violations=markov_violations,
        z_violations=z_violations,
        max_bound_ratio=max_ratio,
        jump={"frequency": jump.frequency, "bound": jump.bound,
              "events": jump.n_events, "passed": jump.passed},
        passed=passed,
    )
    _emit(cfg, "verify_lemma", record)
    return record, passed


def cmd_gen_functional(cfg):
    started = time.time()
    f = analysis.StepTestFunction.single(cfg["f_a"], cfg["f_d"])
    configs = np.empty((cfg["replicas"], cfg["trunc_n"]))
    for i in range(cfg["replicas"]):
        rng = replica_rng(cfg["seed"], 0, i)
        configs[i] = pointproc.sample_pp_exponential(cfg["rho"], cfg["trunc_n"], rng).points
    mc, se = analysis.gen_functional_mc(configs, f)
    closed = analysis.gen_functional_pp_exponential(cfg["rho"], f, include_leader_term=True)
    deviation = abs(mc - closed)
    rel = deviation / closed if closed else 0.0
    passed = bool(deviation <= 3.0 * se and rel < 0.02)
    record = _record(
        cfg, "gen_functional", started,
        mc_estimate=mc, mc_se=se, closed_form=closed,
        closed_form_no_leader=analysis.gen_functional_pp_exponential(cfg["rho"], f),
        relative_deviation=rel, passed=passed,
    )
    _emit(cfg, "gen_functional", record)
    return record, passed


def cmd_compare_oracles(cfg):
    started = time.time()
    alpha, n, k = cfg["alpha"], cfg["trunc_n"], cfg["topk"]
    samplers = {
        "poisson_kingman": lambda rng: pointproc.sample_pd_poisson_kingman(alpha, n, rng),
        "stick_breaking": lambda rng: pointproc.sample_pd_stickbreaking(alpha, max(k, 50), rng),
        "exp_of_pp": lambda rng: pointproc.mass_partition_from_config(
            pointproc.sample_pp_exponential(alpha, n, rng, beta=1.0)),
    }
    tops = {}
    sumsq = {}
    for stream, (name, sampler) in enumerate(samplers.items()):
        rows = np.empty((cfg["replicas"], k))
        ss = np.empty(cfg["replicas"])
        for i in range(cfg["replicas"]):
            rng = replica_rng(cfg["seed"], stream, i)
            part = sampler(rng)
            rows[i] = part.masses[:k]
            ss[i] = analysis.sum_squares(part)
        tops[name] = rows
        sumsq[name] = {"mean": float(ss.mean()),
                       "se": float(ss.std(ddof=1) / np.sqrt(len(ss)))}
    names = list(samplers)
    pairs = {}
    consistent = True
    perm_rng = replica_rng(cfg["seed"], 10)
    for a in range(len(names)):
        for b in range(a + 1, len(names)):
            p = stattest.energy_distance_perm_test(tops[names[a]], tops[names[b]],
                                                   n_perm=cfg["n_perm"], rng=perm_rng)
            pairs[f"{names[a]}|{names[b]}"] = p
            consistent = consistent and bool(p >= cfg["level"])
    record = _record(cfg, "compare_oracles", started,
                     pairwise_energy_p=pairs, sum_squares=sumsq,
                     expected_sum_squares=1.0 - alpha, passed=consistent)
    _emit(cfg, "compare_oracles", record)
    return record, consistent


_COMMANDS = {
    "sample": cmd_sample,
    "evolve": cmd_evolve,
    "test-invariance": cmd_test_invariance,
    "verify-lemma": cmd_verify_lemma,
    "gen-functional": cmd_gen_functional,
    "compare-oracles": cmd_compare_oracles,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="quasistat",
        description="Simulation and statistical verification of ranked-point and "
                    "mass-partition reshuffling dynamics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int, help="master seed (or set QUASISTAT_SEED)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--kind", help="pd | pp | geometric | mixture-of-pd | custom-from-file")
        p.add_argument("--replicas", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--alphas", help="comma list of mixture components")
        p.add_argument("--rho", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--mu", type=float, help="increment law mean")
        p.add_argument("--sigma", type=float, help="increment law std dev")
        p.add_argument("--tau", type=int)
        p.add_argument("--topk", type=int)
        p.add_argument("--trunc-n", dest="trunc_n", type=int)
        p.add_argument("--level", type=float)
        p.add_argument("--n-perm", dest="n_perm", type=int)
        p.add_argument("--f-a", dest="f_a", type=float, help="step amplitude")
        p.add_argument("--f-d", dest="f_d", type=float, help="step width")
        p.add_argument("--ck", type=float, help="C + K in the jump-event bound")
        p.add_argument("--grid-points", dest="grid_points", type=int)
        p.add_argument("--input", help="CSV of masses for kind=custom-from-file")
        p.add_argument("--show-config", action="store_true",
                       help="print the resolved config and exit")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.show_config:
        print(json.dumps(cfg, indent=2, sort_keys=True))
        return 0
    try:
        record, passed = _COMMANDS[args.command](cfg)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(record, indent=2, sort_keys=True, default=_json_default))
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
