"""Command-line front end: synthetic-day generation, training, evaluation and
policy comparison, all emitting machine-parseable CSV tables.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Setting ``EVCS_OUT_DIR`` redirects every output path into that directory.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import baseline, data, policy
from .baseline import QeFeatureConfig
from .data import DataError
from .env import ArrivalEvent, EpisodeConfig
from .llf import laxity
from .policy import DivergenceError, PolicyParams, TrainConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1 instead of argparse's 2
        raise UsageError(message)


# --- experiment configs ------------------------------------------------------

DEFAULT_EXPERIMENT: dict = {
    "version": data.DEFAULT_PROFILES_VERSION,
    "days": 20,
    "horizon": 96,
    "slots_per_hour": 4,
    "max_laxity": 12,
    "price": {"base": 12.0, "morning_peak": 6.0, "evening_peak": 18.0, "noise": 1.5},
    "profiles": [
        {
            "category": p.category.value,
            "hourly_rates": list(p.hourly_rates),
            "demand": list(p.demand),
            "parking": list(p.parking),
        }
        for p in data.DEFAULT_PROFILES
    ],
}


def config_hash(document: dict) -> str:
    canonical = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def _require(document: dict, field: str, context: str):
    if field not in document:
        raise DataError(f"{context}: missing field '{field}'")
    return document[field]


def parse_experiment(document: dict) -> dict:
    """Validate a generation config, raising DataError with the failing field."""
    out = {
        "days": int(_require(document, "days", "config")),
        "horizon": int(_require(document, "horizon", "config")),
        "slots_per_hour": int(document.get("slots_per_hour", 4)),
        "max_laxity": int(document.get("max_laxity", 12)),
    }
    if out["days"] < 0:
        raise DataError("config: field 'days' must be >= 0")
    if out["horizon"] < 1 or out["horizon"] % out["slots_per_hour"]:
        raise DataError("config: field 'horizon' must be a positive multiple of slots_per_hour")
    price = document.get("price", {})
    out["price"] = {
        "base": float(price.get("base", 12.0)),
        "morning_peak": float(price.get("morning_peak", 6.0)),
        "evening_peak": float(price.get("evening_peak", 18.0)),
        "noise": float(price.get("noise", 1.5)),
    }
    profiles = []
    for i, entry in enumerate(_require(document, "profiles", "config")):
        context = f"config: profiles[{i}]"
        try:
            category = data.Category(_require(entry, "category", context))
        except ValueError:
            raise DataError(f"{context}: unknown category {entry.get('category')!r}") from None
        profiles.append(
            data.CategoryProfile(
                category=category,
                hourly_rates=tuple(_require(entry, "hourly_rates", context)),
                demand=tuple(_require(entry, "demand", context)),
                parking=tuple(_require(entry, "parking", context)),
            )
        )
    out["profiles"] = tuple(profiles)
    return out


# --- day-file loading --------------------------------------------------------

def load_days(data_dir: str | Path, slots_per_hour: int = 4) -> list[tuple[str, EpisodeConfig]]:
    """Load every dayNN_{prices,arrivals}.csv pair in a directory."""
    directory = Path(data_dir)
    if not directory.is_dir():
        raise DataError(f"{directory}: not a directory")
    days: list[tuple[str, EpisodeConfig]] = []
    for arrivals_path in sorted(directory.glob("*_arrivals.csv")):
        stem = arrivals_path.name[: -len("_arrivals.csv")]
        prices_path = directory / f"{stem}_prices.csv"
        if not prices_path.exists():
            raise DataError(f"{arrivals_path}: missing matching file {prices_path.name}")
        series = data.load_prices(prices_path, slots_per_hour)
        horizon = len(series.values)
        events = data.load_arrivals(arrivals_path)
        for event in events:
            if event.t >= horizon:
                raise DataError(
                    f"{arrivals_path}: arrival slot {event.t} outside horizon {horizon}"
                )
        days.append(
            (stem, EpisodeConfig(horizon, data.episode_prices(series, horizon), tuple(events)))
        )
    if not days:
        raise DataError(f"{directory}: no day files (*_arrivals.csv) found")
    return days


def observed_max_laxity(days: Sequence[tuple[str, EpisodeConfig]]) -> int:
    top = 0
    for _, config in days:
        for event in config.arrivals:
            top = max(top, laxity(event.demand, event.parking))
    return top


def percent_improvement(reward_a: float, reward_b: float) -> float:
    """Percentage by which reward_a improves on reward_b: (a-b)/|b| * 100."""
    if reward_a == reward_b:
        return 0.0
    if reward_b == 0:
        raise ValueError("baseline reward is zero; improvement is undefined")
    return (reward_a - reward_b) / abs(reward_b) * 100.0


def _out_path(raw: str | Path) -> Path:
    override = os.environ.get("EVCS_OUT_DIR")
    path = Path(raw)
    if override:
        return Path(override) / path.name
    return path


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        handle.write(",".join(header) + "\n")
        for row in rows:
            handle.write(",".join(str(cell) for cell in row) + "\n")


# --- subcommands -------------------------------------------------------------

def cmd_generate(args: argparse.Namespace) -> int:
    if args.config:
        try:
            document = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise DataError(f"{args.config}: no such config file") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"{args.config}: invalid JSON: {exc}") from None
    else:
        document = DEFAULT_EXPERIMENT
    experiment = parse_experiment(document)
    digest = config_hash(document)

    out_dir = _out_path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    root = np.random.SeedSequence(args.seed)
    hours = experiment["horizon"] // experiment["slots_per_hour"]
    for day, seed in enumerate(root.spawn(experiment["days"])):
        rng = np.random.default_rng(seed)
        hourly = data.gen_prices(rng, **experiment["price"], hours=hours)
        events = data.gen_day(
            experiment["profiles"],
            rng,
            horizon=experiment["horizon"],
            slots_per_hour=experiment["slots_per_hour"],
            max_laxity=experiment["max_laxity"],
        )
        stem = f"day{day:02d}"
        data.save_prices(out_dir / f"{stem}_prices.csv", hourly)
        data.save_arrivals(out_dir / f"{stem}_arrivals.csv", events)
    manifest = {
        "config_hash": digest,
        "days": experiment["days"],
        "seed": args.seed,
        "config": document,
    }
    (out_dir / "generation.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    print(f"wrote {experiment['days']} day(s) to {out_dir} (config {digest})")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    days = load_days(args.data)
    configs = [config for _, config in days]
    max_laxity = max(observed_max_laxity(days), 1)
    level_cap = args.lmax
    if level_cap is not None and level_cap < 1:
        raise UsageError("--lmax must be >= 1")

    settings = {
        "algo": args.algo,
        "alpha": args.alpha,
        "sigma": args.sigma,
        "iterations": args.iterations,
        "seed": args.seed,
        "lmax": level_cap,
        "max_laxity": max_laxity,
        "days": [stem for stem, _ in days],
    }
    digest = config_hash(settings)
    model_path = _out_path(args.out)
    curve_path = model_path.with_name(model_path.stem + "_curve.csv")

    if args.algo == "pg":
        train_config = TrainConfig(
            step_size=args.alpha,
            iterations=args.iterations,
            batch=args.batch if args.batch else len(configs),
            seed=args.seed,
            sigma_decay=args.sigma_decay,
            step_decay=args.step_decay,
        )
        dim = policy.feature_dim(max_laxity, level_cap)
        initial = PolicyParams(np.zeros(dim), 0.0, args.sigma)
        result = policy.train(configs, initial, train_config, max_laxity, level_cap)
        model = policy.pg_model_dict(result.params, result.scaler, max_laxity, level_cap, digest)
        labels = ["w_price"] + [f"w_n{l}" for l in range(dim - 1)] + ["bias", "sigma"]
        trace = result.param_trace
        curve = result.curve
    else:
        train_config = TrainConfig(
            step_size=args.alpha,
            iterations=args.iterations,
            seed=args.seed,
        )
        result = baseline.qe_train(configs, train_config, QeFeatureConfig(), max_laxity)
        model = baseline.qe_model_dict(result.params, result.feature_config, max_laxity, digest)
        labels = [f"theta{i}" for i in range(baseline.N_FEATURES)]
        trace = result.param_trace
        curve = result.curve

    model_path.parent.mkdir(parents=True, exist_ok=True)
    policy.save_model(model_path, model)
    rows = [
        [i, repr(float(curve[i]))] + [repr(float(v)) for v in trace[i]]
        for i in range(len(curve))
    ]
    _write_csv(curve_path, ["iteration", "reward"] + labels, rows)
    print(f"wrote model {model_path} and learning curve {curve_path} (config {digest})")
    return EXIT_OK


def _eval_model(model: dict, config: EpisodeConfig) -> tuple[float, tuple[int, ...]]:
    if model["algo"] == policy.MODEL_KIND_PG:
        params, scaler, max_laxity, level_cap = policy.pg_from_model(model)
        try:
            return policy.evaluate_policy(config, params, scaler, max_laxity, level_cap)
        except ValueError as exc:
            raise DataError(f"model does not fit this data: {exc}") from None
    if model["algo"] == baseline.MODEL_KIND_QE:
        params, feature_config, max_laxity = baseline.qe_from_model(model)
        try:
            return baseline.evaluate_qe(config, params, feature_config, max_laxity)
        except ValueError as exc:
            raise DataError(f"model does not fit this data: {exc}") from None
    raise DataError(f"unknown model algo {model['algo']!r}")


def cmd_eval(args: argparse.Namespace) -> int:
    model = policy.load_model(args.model)
    days = load_days(args.data)
    rows = []
    rewards = []
    for stem, config in days:
        reward, _ = _eval_model(model, config)
        rows.append([stem, repr(float(reward))])
        rewards.append(reward)
    rows.append(["average", repr(float(np.mean(rewards)))])
    lines = ["day,reward"] + [",".join(map(str, row)) for row in rows]
    print("\n".join(lines))
    if args.out:
        _write_csv(_out_path(args.out), ["day", "reward"], rows)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    model_a = policy.load_model(args.model_a)
    model_b = policy.load_model(args.model_b)
    days = load_days(args.data)
    out_dir = _out_path(args.out) if args.out else None

    rows = []
    rewards_a, rewards_b = [], []
    for stem, config in days:
        reward_a, actions_a = _eval_model(model_a, config)
        reward_b, actions_b = _eval_model(model_b, config)
        rewards_a.append(reward_a)
        rewards_b.append(reward_b)
        rows.append(
            [stem, repr(float(reward_a)), repr(float(reward_b)),
             f"{percent_improvement(reward_a, reward_b):.2f}"]
        )
        if out_dir is not None:
            _write_csv(
                out_dir / f"actions_{stem}.csv",
                ["slot", "price", "action_a", "action_b"],
                [
                    [t, repr(float(config.prices[t])), actions_a[t], actions_b[t]]
                    for t in range(config.horizon)
                ],
            )
    mean_a, mean_b = float(np.mean(rewards_a)), float(np.mean(rewards_b))
    rows.append(
        ["average", repr(mean_a), repr(mean_b),
         f"{percent_improvement(mean_a, mean_b):.2f}"]
    )
    header = ["day", "reward_a", "reward_b", "improvement_pct"]
    print(",".join(header))
    for row in rows:
        print(",".join(map(str, row)))
    if out_dir is not None:
        _write_csv(out_dir / "compare.csv", header, rows)
    return EXIT_OK


# --- entry point -------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="evcs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write synthetic day files")
    gen.add_argument("--config", help="experiment config (JSON); defaults built in")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(func=cmd_generate)

    train = sub.add_parser("train", help="train a policy on a directory of days")
    train.add_argument("--data", required=True, help="directory of day files")
    train.add_argument("--algo", choices=["pg", "qe"], default="pg")
    train.add_argument("--iterations", type=int, default=400)
    train.add_argument("--alpha", type=float, default=0.08)
    train.add_argument("--sigma", type=float, default=2.0)
    train.add_argument("--sigma-decay", type=float, default=0.995)
    train.add_argument("--step-decay", type=float, default=0.995)
    train.add_argument("--batch", type=int, default=0, help="days per update (0 = all)")
    train.add_argument("--lmax", type=int, default=None,
                       help="pool laxity levels >= this cap in the policy state")
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--out", required=True, help="model file to write")
    train.set_defaults(func=cmd_train)

    eva = sub.add_parser("eval", help="evaluate a model on a directory of days")
    eva.add_argument("--model", required=True)
    eva.add_argument("--data", required=True)
    eva.add_argument("--out", help="also write the table to this CSV file")
    eva.set_defaults(func=cmd_eval)

    cmp_ = sub.add_parser("compare", help="compare two models day by day")
    cmp_.add_argument("model_a")
    cmp_.add_argument("model_b")
    cmp_.add_argument("--data", required=True)
    cmp_.add_argument("--out", help="directory for compare.csv and action traces")
    cmp_.set_defaults(func=cmd_compare)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DivergenceError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
