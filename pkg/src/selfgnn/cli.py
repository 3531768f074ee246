"""Command-line entry point: ``selfgnn <command> [flags]``.

Every command resolves its configuration (built-in defaults, then the JSON
``--config`` file, then flags), writes it to ``<out>/config.json`` and only
then starts working. Feeding that file back through ``--config`` reproduces
the run.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path


from .checkpoint import load_checkpoint, save_checkpoint
from .config import VARIANTS, HyperParams
from .data import core_filter, load_interactions, partition_intervals, split_leave_two
from .errors import CheckpointError, ConfigurationError, DataError, DivergenceError
from .evaluation import (
    edge_short_term_likelihood,
    evaluate_protocol,
    inject_noise,
    sal_case_statistics,
    with_train,
)
from .gradcheck import check_gradients, format_table, group_rows, toy_problem
from .streams import stream
from .synthetic import clustered_log
from .training import EpochRecord, train

log = logging.getLogger("selfgnn")

COMMANDS = ("prepare", "train", "evaluate", "ablate", "noise-test", "sparsity", "gradcheck", "case-study")
NOISE_RATIOS = (0.0, 0.05, 0.10, 0.15, 0.20)
SYNTHETIC = "synthetic"

# flag dest -> HyperParams field
HP_FLAGS = {
    "seed": "seed",
    "variant": "variant",
    "epochs": "epochs",
    "T": "n_periods",
    "layers": "layers",
    "att_layers": "att_layers",
    "dsal": "d_sal",
    "lambda1": "lambda1",
    "batch": "batch_size",
    "max_seq": "max_seq",
}


@dataclass
class RunConfig:
    command: str
    data: str | None
    out: str
    hp: HyperParams
    noise_ratio: float = 0.0
    ratios: list[float] = field(default_factory=lambda: list(NOISE_RATIOS))
    cohorts: list[int] = field(default_factory=lambda: [15, 25])
    n_list: list[int] = field(default_factory=lambda: [10, 20])
    variants: list[str] = field(default_factory=lambda: list(VARIANTS))
    checkpoint: str | None = None
    core: int = 0
    test_user_cap: int = 10_000

    def to_dict(self) -> dict:
        out = {k: v for k, v in dataclasses.asdict(self).items() if k != "hp"}
        out.update(self.hp.to_dict())
        return out

    @classmethod
    def option_names(cls) -> set[str]:
        return {f.name for f in dataclasses.fields(cls)} - {"hp"}


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="selfgnn", description="Train and evaluate the SelfGNN recommender.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", metavar="PATH", help="JSON file of settings (flags take precedence)")
    p.add_argument("--data", metavar="PATH", help=f"interaction CSV, or '{SYNTHETIC}' for the clustered toy set")
    p.add_argument("--out", metavar="DIR", help="output directory (default: runs/<command>)")
    p.add_argument("--seed", type=int)
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--noise-ratio", type=float, dest="noise_ratio")
    p.add_argument("--epochs", type=int)
    p.add_argument("--T", type=int, dest="T", help="number of time intervals")
    p.add_argument("--layers", type=int)
    p.add_argument("--att-layers", type=int, dest="att_layers")
    p.add_argument("--dsal", type=int, help="hidden size of the personalized-weight network")
    p.add_argument("--lambda1", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--max-seq", type=int, dest="max_seq")
    p.add_argument("--checkpoint", metavar="PATH", help="checkpoint to evaluate or resume from")
    p.add_argument("--cohorts", metavar="B1,B2,...", help="sparsity cohort boundaries")
    p.add_argument("--n-list", metavar="N1,N2,...", dest="n_list", help="cutoffs for HR/NDCG")
    p.add_argument("--variants", metavar="V1,V2,...", help="variants for ablate")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _csv_list(text: str, kind):
    try:
        return [kind(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad list {text!r}: {exc}") from None


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    settings: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            settings = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(settings, dict):
            raise UsageError("config file must hold a JSON object")
        settings.pop("command", None)

    hp_fields = {f.name for f in dataclasses.fields(HyperParams)}
    options = RunConfig.option_names()
    unknown = set(settings) - hp_fields - options
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    hp_values = {k: v for k, v in settings.items() if k in hp_fields}
    opt_values = {k: v for k, v in settings.items() if k in options}

    for flag, name in HP_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            hp_values[name] = value
    for name in ("data", "out", "noise_ratio", "checkpoint"):
        value = getattr(args, name)
        if value is not None:
            opt_values[name] = value
    if args.cohorts:
        opt_values["cohorts"] = _csv_list(args.cohorts, int)
    if args.n_list:
        opt_values["n_list"] = _csv_list(args.n_list, int)
    if args.variants:
        opt_values["variants"] = _csv_list(args.variants, str)

    try:
        hp = HyperParams.from_dict(hp_values)
    except (ConfigurationError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    bad = [v for v in opt_values.get("variants", []) if v not in VARIANTS]
    if bad:
        raise UsageError(f"unknown variants {bad}; expected some of {VARIANTS}")
    opt_values.setdefault("out", str(Path("runs") / args.command))
    opt_values.setdefault("data", None)
    return RunConfig(command=args.command, hp=hp, **opt_values)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_split(cfg: RunConfig):
    if cfg.data is None:
        raise DataError("--data is required for this command")
    if cfg.data == SYNTHETIC:
        interactions = clustered_log(seed=cfg.hp.seed)
    else:
        interactions = load_interactions(cfg.data)
    if cfg.core > 0:
        interactions = core_filter(interactions, cfg.core)
    return split_leave_two(interactions, test_user_cap=cfg.test_user_cap, seed=cfg.hp.seed)


def write_history(path: Path, history: list[EpochRecord]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EpochRecord.COLUMNS)
        for rec in history:
            writer.writerow(rec.row())


def _ratio_tag(ratio: float) -> str:
    return f"{ratio:.2f}".replace(".", "p")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_prepare(cfg: RunConfig, out: Path) -> None:
    split = load_split(cfg)
    split.save_manifest(out / "split.json")
    graphs = partition_intervals(split.train, cfg.hp.effective_periods)
    _write_json(out / "intervals.json", {
        "n_periods": len(graphs),
        "periods": [
            {"period": g.period, "t_start": float(g.t_start), "t_end": float(g.t_end), "n_edges": g.n_edges}
            for g in graphs
        ],
    })


def cmd_train(cfg: RunConfig, out: Path) -> None:
    split = load_split(cfg)
    resume = load_checkpoint(cfg.checkpoint) if cfg.checkpoint else None
    result = train(split, hp=cfg.hp, resume=resume, epochs=cfg.hp.epochs if resume else None)
    save_checkpoint(out / "last.ckpt", result.last)
    save_checkpoint(out / "best.ckpt", result.best)
    write_history(out / "history.csv", result.history)


def _checkpoint_path(cfg: RunConfig, out: Path) -> Path:
    return Path(cfg.checkpoint) if cfg.checkpoint else out / "best.ckpt"


def cmd_evaluate(cfg: RunConfig, out: Path) -> None:
    ckpt = load_checkpoint(_checkpoint_path(cfg, out))
    split = load_split(cfg)
    report = evaluate_protocol(ckpt, split, cfg.n_list)
    (out / "report.json").write_text(report.to_json() + "\n")


def cmd_ablate(cfg: RunConfig, out: Path) -> None:
    split = load_split(cfg)
    for variant in cfg.variants:
        result = train(split, hp=cfg.hp.replace(variant=variant))
        report = evaluate_protocol(result.best, split, cfg.n_list)
        (out / f"ablate_{variant.lstrip('-')}.json").write_text(report.to_json() + "\n")


def cmd_noise_test(cfg: RunConfig, out: Path) -> None:
    split = load_split(cfg)
    for ratio in cfg.ratios:
        noisy = inject_noise(split.train, ratio, stream(cfg.hp.seed, "noise"))
        noisy_split = with_train(split, noisy)
        result = train(noisy_split, hp=cfg.hp)
        report = evaluate_protocol(result.best, noisy_split, cfg.n_list, noise_ratio=ratio)
        (out / f"noise_{_ratio_tag(ratio)}.json").write_text(report.to_json() + "\n")


def cmd_sparsity(cfg: RunConfig, out: Path) -> None:
    split = load_split(cfg)
    if cfg.checkpoint:
        model = load_checkpoint(cfg.checkpoint)
    else:
        model = train(split, hp=cfg.hp).best
    report = evaluate_protocol(model, split, cfg.n_list, cohort_boundaries=cfg.cohorts)
    (out / "sparsity.json").write_text(report.to_json() + "\n")


def cmd_gradcheck(cfg: RunConfig, out: Path) -> int:
    # Toy sizes; lambda1 = 1 so the SAL term is large enough to check.
    toy_hp = cfg.hp.replace(
        d=8, n_heads=2, d_sal=min(cfg.hp.d_sal, 8), n_sal=8, max_seq=4, lambda1=1.0, embed_std=0.1,
    )
    loss_fn, params = toy_problem(toy_hp, seed=cfg.hp.seed)
    rows = check_gradients(loss_fn, params)
    table = format_table(rows)
    (out / "gradcheck.txt").write_text(table + "\n")
    groups = group_rows(rows)
    _write_json(out / "gradcheck.json", {"groups": groups, "tensors": [dataclasses.asdict(r) for r in rows]})
    for g in groups:
        print(f"{g['group']:<20} max rel err {g['max_rel_error']:.2e}  {'pass' if g['passed'] else 'FAIL'}")
    if not all(g["passed"] for g in groups):
        print("gradient check failed", file=sys.stderr)
        return 1
    return 0


def cmd_case_study(cfg: RunConfig, out: Path) -> None:
    split = load_split(cfg)
    ratio = cfg.noise_ratio or 0.15
    noisy, mask = inject_noise(split.train, ratio, stream(cfg.hp.seed, "noise"), return_mask=True)
    noisy_split = with_train(split, noisy)
    with_sal = train(noisy_split, hp=cfg.hp.replace(variant="full")).last
    without_sal = train(noisy_split, hp=cfg.hp.replace(variant="-SAL")).last
    users, items, stamps = noisy.users[mask], noisy.items[mask], noisy.timestamps[mask]
    stats = sal_case_statistics(with_sal, without_sal, noisy_split, zip(users, items))
    stats["noise_ratio"] = ratio
    stats["short_term_likelihood"] = {
        "with_sal": float(edge_short_term_likelihood(with_sal, noisy_split, users, items, stamps).mean()),
        "without_sal": float(edge_short_term_likelihood(without_sal, noisy_split, users, items, stamps).mean()),
    }
    _write_json(out / "case_study.json", stats)


HANDLERS = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "noise-test": cmd_noise_test,
    "sparsity": cmd_sparsity,
    "gradcheck": cmd_gradcheck,
    "case-study": cmd_case_study,
}


def run(command: str, cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", {"command": command, **cfg.to_dict()})
    status = HANDLERS[command](cfg, out)
    return int(status or 0)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on unknown commands or flags
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve_config(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"selfgnn: error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(args.command, cfg)
    except FileNotFoundError as exc:
        print(f"selfgnn: {exc}", file=sys.stderr)
        return 1
    except (CheckpointError, DataError, ConfigurationError, DivergenceError, ValueError, OSError) as exc:
        print(f"selfgnn: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
