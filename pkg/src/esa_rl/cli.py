"""Command-line front end: ``esa-rl {run,sweep,verify,gen,plot}``.

Exit codes: 0 on success, 1 on a configuration or usage error, 2 when
``verify`` finds a hard invariant failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from .agents import DEFAULT_CB, DEFAULT_DELTA, Hyperparams, make_agent
from .envs import GeneratorSpec, random_mdp
from .harness import (
    CHECK_LEVELS,
    InitStateSchedule,
    deterministic_failures,
    read_regret_csv,
    run_experiment,
    sweep,
)
from .mdp import InvalidMDPError, load_mdp, save_mdp
from .plotting import regret_svg
from .rates import rate_suite

log = logging.getLogger("esa_rl")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    algorithm: str = "esa"
    env: dict = field(default_factory=lambda: GeneratorSpec().to_dict())
    episodes: int = 1000
    seeds: list = field(default_factory=lambda: [0])
    c_b: float = DEFAULT_CB
    delta: float = DEFAULT_DELTA
    schedule: str = "fixed:0"
    check_level: str = "off"
    monotone: bool = True
    out: str = "out"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        """Accept a RunConfig document or a summary.json written by ``run``."""
        if "config" in d and isinstance(d["config"], dict):
            d = d["config"]
        d = dict(d)
        if "hyperparams" in d:
            hp = d.pop("hyperparams")
            d.update(c_b=hp["c_b"], delta=hp["delta"])
            d.setdefault("episodes", hp["K"])
        if "seed" in d:
            d["seeds"] = [d.pop("seed")]
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def validate(self) -> None:
        if self.algorithm not in ("esa", "ucb-q"):
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.check_level not in CHECK_LEVELS:
            raise ConfigError(f"unknown check level {self.check_level!r}")
        if self.episodes < 0:
            raise ConfigError("episodes must be >= 0")
        if "path" in self.env and not Path(self.env["path"]).is_file():
            raise ConfigError(f"MDP file not found: {self.env['path']}")
        try:
            InitStateSchedule.parse(self.schedule)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def build_env(self):
        if "path" in self.env:
            return load_mdp(self.env["path"])
        try:
            return GeneratorSpec(**self.env).build()
        except TypeError as exc:
            raise ConfigError(f"bad environment spec {self.env}: {exc}") from exc


def _add_env_flags(p):
    g = p.add_argument_group("environment")
    g.add_argument("--env", choices=("random", "chain", "needle"))
    g.add_argument("--mdp-file")
    g.add_argument("--S", type=int)
    g.add_argument("--A", type=int)
    g.add_argument("--H", type=int)
    g.add_argument("--slip", type=float)
    g.add_argument("--gap", type=float)
    g.add_argument("--env-seed", type=int)
    g.add_argument("--perturb", type=float)


def _add_run_flags(p, many: bool):
    _add_env_flags(p)
    p.add_argument("--algo", action="append" if many else "store", choices=("esa", "ucb-q"))
    p.add_argument("--episodes", type=int)
    p.add_argument("--seed", type=int, action="append")
    p.add_argument("--cb", type=float, action="append" if many else "store")
    p.add_argument("--delta", type=float)
    p.add_argument("--schedule", help="fixed[:state] | round-robin | seeded-random")
    p.add_argument("--check-level", choices=CHECK_LEVELS)
    p.add_argument("--no-monotone", action="store_true", help="ucb-q only: drop the min with the previous Q entry")
    p.add_argument("--out")
    p.add_argument("--config", help="JSON RunConfig or a summary.json to replay; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="esa-rl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    _add_run_flags(sub.add_parser("run", help="single experiment -> regret.csv + summary.json"), many=False)
    _add_run_flags(sub.add_parser("sweep", help="grid over algorithms, bonus constants and seeds"), many=True)

    v = sub.add_parser("verify", help="learning-rate property suite and invariant fuzzing")
    v.add_argument("--rate-suite", action="store_true")
    v.add_argument("--Nmax", type=int, default=1000)
    v.add_argument("--invariant-fuzz", type=int, metavar="N", default=None, help="number of random MDPs to fuzz")
    v.add_argument("--episodes", type=int, default=500)
    v.add_argument("--seed", type=int, default=0)

    g = sub.add_parser("gen", help="write a generated MDP as JSON")
    _add_env_flags(g)
    g.add_argument("--out", required=True)

    pl = sub.add_parser("plot", help="regret CSV(s) -> SVG line chart")
    pl.add_argument("csv", nargs="+")
    pl.add_argument("--out", required=True)
    pl.add_argument("--loglog", action="store_true")
    return parser


def _env_from_flags(args, base: dict) -> dict:
    if args.mdp_file:
        return {"path": args.mdp_file}
    if "path" in base and not args.env:
        return base
    env = {} if "path" in base else dict(base)
    updates = {
        "kind": args.env,
        "S": args.S,
        "A": args.A,
        "H": args.H,
        "slip": args.slip,
        "gap": args.gap,
        "seed": args.env_seed,
        "perturb": args.perturb,
    }
    env.update({k: v for k, v in updates.items() if v is not None})
    return GeneratorSpec(**{k: v for k, v in env.items() if k != "path"}).to_dict()


def resolve_config(args, many: bool) -> RunConfig:
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    cfg = RunConfig.from_dict(base) if base else RunConfig()
    cfg.env = _env_from_flags(args, cfg.env)
    if args.algo:
        cfg.algorithm = args.algo
    if args.episodes is not None:
        cfg.episodes = args.episodes
    if args.seed:
        cfg.seeds = list(args.seed)
    if args.cb is not None:
        cfg.c_b = args.cb
    if args.delta is not None:
        cfg.delta = args.delta
    if args.schedule:
        cfg.schedule = args.schedule
    if args.check_level:
        cfg.check_level = args.check_level
    if args.no_monotone:
        cfg.monotone = False
    if args.out:
        cfg.out = args.out
    if many:
        cfg.algorithm = cfg.algorithm if isinstance(cfg.algorithm, list) else [cfg.algorithm]
        cfg.c_b = cfg.c_b if isinstance(cfg.c_b, list) else [cfg.c_b]
    else:
        cfg.validate()
    return cfg


def _config_echo(cfg: RunConfig) -> dict:
    d = {"env": cfg.env, "episodes": cfg.episodes}
    if cfg.algorithm == "ucb-q":
        d["monotone"] = cfg.monotone
    return d


def cmd_run(args) -> int:
    cfg = resolve_config(args, many=False)
    if len(cfg.seeds) != 1:
        raise ConfigError("run takes exactly one --seed; use sweep for several")
    mdp = cfg.build_env()
    seed = cfg.seeds[0]
    # iota needs a positive budget; an empty run still records zero episodes
    hp = Hyperparams.for_mdp(mdp, K=max(cfg.episodes, 1), c_b=cfg.c_b, delta=cfg.delta)
    agent = make_agent(cfg.algorithm, hp, **({"monotone": cfg.monotone} if cfg.algorithm == "ucb-q" else {}))
    record = run_experiment(
        mdp,
        cfg.algorithm,
        hp,
        InitStateSchedule.parse(cfg.schedule),
        seed,
        cfg.check_level,
        agent=agent,
        config=_config_echo(cfg),
        episodes=cfg.episodes,
    )
    csv_path, json_path = record.write(cfg.out)
    s = record.summary()
    print(f"{cfg.algorithm}: K={record.K} final regret {s['final_cum_regret']:.4f} slope {s['slope']} -> {csv_path}, {json_path}")
    return 0


def cmd_sweep(args) -> int:
    cfg = resolve_config(args, many=True)
    env = cfg.env
    if "path" in env:
        mdps = [load_mdp(env["path"])]
    else:
        mdps = [GeneratorSpec(**env)]
    grid = [{"K": cfg.episodes, "c_b": cb, "delta": cfg.delta} for cb in cfg.c_b]
    results = sweep(mdps, cfg.algorithm, grid, cfg.seeds, InitStateSchedule.parse(cfg.schedule), cfg.check_level)
    out = Path(cfg.out)
    index = []
    for res in results:
        name = f"{res.algo}_cb{res.hp_overrides['c_b']:g}_seed{res.seed}"
        entry = {"cell": name, "algo": res.algo, "c_b": res.hp_overrides["c_b"], "seed": res.seed}
        if res.record is not None:
            res.record.config["env"] = env
            res.record.write(out / name)
            entry["final_cum_regret"] = res.record.final_regret
        else:
            entry["error"] = res.error
        index.append(entry)
        print(json.dumps(entry))
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.json").write_text(json.dumps(index, indent=2) + "\n")
    return 0


def cmd_verify(args) -> int:
    run_rates = args.rate_suite or args.invariant_fuzz is None
    n_fuzz = args.invariant_fuzz if args.invariant_fuzz is not None else (0 if args.rate_suite else 20)
    failed = False
    if run_rates:
        failures, n = rate_suite(N_max=args.Nmax)
        print(f"rate suite: {n - len(failures)}/{n} checks passed")
        for name, H, N in failures[:20]:
            print(f"  FAIL {name} H={H} N={N}")
        failed |= bool(failures)
    if n_fuzz:
        import numpy as np

        rng = np.random.default_rng(args.seed)
        bad = 0
        for i in range(n_fuzz):
            S, A, H = (int(x) for x in rng.integers(1, 5, size=3))
            mdp = random_mdp(S, A, H, seed=int(rng.integers(2**31)))
            hp = Hyperparams.for_mdp(mdp, K=args.episodes)
            rec = run_experiment(mdp, "esa", hp, InitStateSchedule("round-robin"), seed=i, check_level="full")
            hard = deterministic_failures(rec.violations)
            if hard:
                bad += 1
                print(f"  FAIL fuzz case {i} (S={S}, A={A}, H={H}): {hard}")
        print(f"invariant fuzz: {n_fuzz - bad}/{n_fuzz} cases clean")
        failed |= bad > 0
    print("verify: " + ("FAILED" if failed else "pass"))
    return 2 if failed else 0


def cmd_gen(args) -> int:
    env = _env_from_flags(args, GeneratorSpec().to_dict())
    if "path" in env:
        raise ConfigError("gen builds from a generator; --mdp-file is not accepted")
    mdp = GeneratorSpec(**env).build()
    save_mdp(mdp, args.out)
    print(f"wrote {mdp!r} to {args.out}")
    return 0


def cmd_plot(args) -> int:
    curves = {}
    for path in args.csv:
        try:
            _, cum = read_regret_csv(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        curves[Path(path).parent.name or Path(path).stem] = cum
    Path(args.out).write_text(regret_svg(curves, loglog=args.loglog))
    print(f"wrote {args.out}")
    return 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify, "gen": cmd_gen, "plot": cmd_plot}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InvalidMDPError, ValueError) as exc:
        print(f"esa-rl: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
