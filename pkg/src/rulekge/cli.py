"""Command-line pipeline: mine -> ground -> train -> eval.

Every run is driven by one flat configuration assembled from built-in
defaults, an optional ``key=value`` config file, and command-line flags (in
that order of increasing precedence; flags mirror config keys one-to-one).
All randomness used by a run derives from the single ``seed`` value, so a
fixed configuration reproduces its outputs byte for byte in single-threaded
mode.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import checkpoint, evaluation, mining, training
from .kg import DatasetSplits, Vocabulary, filter_subset, make_splits, parse_triple_file
from .mining import RuleType
from .models import ModelKind, Norm
from .rng import STREAM_TC_TEST, STREAM_TC_VALID, SplitMix64, derive_seed
from .training import TrainConfig, TrainingDiverged


class CliError(ValueError):
    pass


@dataclass
class RunConfig:
    train: str | None = None
    valid: str | None = None
    test: str | None = None
    columns: str = "hrt"
    relation_prefixes: str | None = None  # comma-separated label prefixes
    model: str = "transe"
    dim: int = 50
    margin: float = 2.0
    lr: float = 0.01
    lr2: float | None = None
    norm: str = "l1"
    epochs: int = 1000
    epochs2: int | None = None
    batch_size: int = 1
    tau1: float = 0.5
    tau2: float = 0.6
    tau3: float = 0.5
    mode: str = "baseline"
    seed: int = 0
    out: str = "run"
    threads: int = 1
    backend: str | None = None
    task: str = "lp"
    setting: str = "both"
    tie: str = "optimistic"
    tc_negatives: int = 10
    rules: str | None = None
    ground_rules: str | None = None
    checkpoint: str | None = None
    checkpoint_every: int = 0
    dump_ranks: bool = False

    def thresholds(self) -> dict[RuleType, float]:
        return {
            RuleType.INFERENCE: self.tau1,
            RuleType.TRANSITIVITY: self.tau2,
            RuleType.ANTISYMMETRY: self.tau3,
        }

    def train_config(self) -> TrainConfig:
        epochs2 = self.epochs2
        if epochs2 is None:
            # the second phase only exists in joint-rule training
            epochs2 = self.epochs if self.mode == "rule" else 0
        return TrainConfig(
            dim=self.dim,
            margin=self.margin,
            lr=self.lr,
            lr2=self.lr2,
            norm=Norm(self.norm),
            epochs=self.epochs,
            epochs2=epochs2,
            batch_size=self.batch_size,
            seed=self.seed,
            kind=ModelKind(self.model),
            threads=self.threads,
            backend=self.backend,
        )


_BOOL_KEYS = {"dump_ranks"}
_INT_KEYS = {
    "dim", "epochs", "epochs2", "batch_size", "seed", "threads",
    "tc_negatives", "checkpoint_every",
}
_FLOAT_KEYS = {"margin", "lr", "lr2", "tau1", "tau2", "tau3"}


def _coerce(key: str, value: str):
    if key in _BOOL_KEYS:
        if value.lower() in ("1", "true", "yes"):
            return True
        if value.lower() in ("0", "false", "no"):
            return False
        raise CliError(f"config key {key}: expected a boolean, got {value!r}")
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError:
        raise CliError(f"config key {key}: bad numeric value {value!r}")
    return value


def read_config_file(path: str) -> dict:
    """Flat ``key=value`` lines; '#' starts a comment."""
    known = {f.name for f in fields(RunConfig)}
    out: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in known:
                raise CliError(f"{path}:{lineno}: unknown config key {key!r}")
            out[key] = _coerce(key, value)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rulekge",
        description="Mine logic rules from a triple store and train rule-enhanced "
        "translation embeddings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("mine", "mine rules from the training triples"),
        ("ground", "instantiate selected rules over the training triples"),
        ("train", "train embeddings (baseline, rule-augmented data, or joint)"),
        ("eval", "evaluate a checkpoint on link prediction / triple classification"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="key=value config file; flags override it")
        p.add_argument("--train", help="training triple file")
        p.add_argument("--valid", help="validation triple file")
        p.add_argument("--test", help="test triple file")
        p.add_argument("--columns", help="file column order, a permutation of 'hrt'")
        p.add_argument("--relation-prefixes", dest="relation_prefixes",
                       help="keep only relations whose label starts with one of "
                            "these comma-separated prefixes")
        p.add_argument("--model", choices=["transe", "transh", "transr"])
        p.add_argument("--dim", type=int)
        p.add_argument("--margin", type=float)
        p.add_argument("--lr", type=float)
        p.add_argument("--lr2", type=float, help="second-phase learning rate")
        p.add_argument("--norm", choices=["l1", "l2"])
        p.add_argument("--epochs", type=int)
        p.add_argument("--epochs2", type=int, help="second-phase epochs")
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--tau1", type=float, help="inference confidence threshold")
        p.add_argument("--tau2", type=float, help="transitivity confidence threshold")
        p.add_argument("--tau3", type=float, help="antisymmetry confidence threshold")
        p.add_argument("--mode", choices=["baseline", "pre", "rule"])
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int)
        p.add_argument("--backend", choices=["auto", "compiled", "python"])
        p.add_argument("--task", choices=["lp", "tc", "both"])
        p.add_argument("--setting", choices=["raw", "filtered", "both"])
        p.add_argument("--tie", choices=["optimistic", "pessimistic", "mean"])
        p.add_argument("--tc-negatives", dest="tc_negatives", type=int)
        p.add_argument("--rules", help="rule file produced by 'mine'")
        p.add_argument("--ground-rules", dest="ground_rules",
                       help="ground-rule file produced by 'ground'")
        p.add_argument("--checkpoint", help="checkpoint file to evaluate")
        p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
        p.add_argument("--dump-ranks", dest="dump_ranks", action="store_const",
                       const=True, help="write per-triple ranks to a CSV")
    return parser


def build_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    if args.config:
        if not Path(args.config).is_file():
            raise CliError(f"--config: no such file: {args.config}")
        for key, value in read_config_file(args.config).items():
            setattr(config, key, value)
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            setattr(config, f.name, value)
    return config


def _validate_common(config: RunConfig, need_files: tuple[str, ...]) -> None:
    for name in need_files:
        path = getattr(config, name)
        if path is None:
            raise CliError(f"--{name} is required for this command")
        if not Path(path).is_file():
            raise CliError(f"--{name}: no such file: {path}")
    for name in ("rules", "ground_rules", "checkpoint", "config"):
        path = getattr(config, name, None)
        if path is not None and not Path(path).is_file():
            raise CliError(f"--{name.replace('_', '-')}: no such file: {path}")
    for tau in ("tau1", "tau2", "tau3"):
        value = getattr(config, tau)
        if not 0.0 <= value <= 1.0:
            raise CliError(f"--{tau} must be in [0, 1], got {value}")
    if sorted(config.columns) != ["h", "r", "t"]:
        raise CliError(f"--columns must be a permutation of 'hrt', got {config.columns!r}")
    if config.tc_negatives < 1:
        raise CliError("--tc-negatives must be >= 1")
    try:
        config.train_config().validate()
    except ValueError as exc:
        raise CliError(str(exc))


def _load_splits(config: RunConfig) -> DatasetSplits:
    entities, relations = Vocabulary(), Vocabulary()
    parts = []
    for name in ("train", "valid", "test"):
        path = getattr(config, name)
        if path is None:
            parts.append([])
            continue
        with open(path, encoding="utf-8") as fh:
            parts.append(parse_triple_file(fh, entities, relations, config.columns))
    splits = make_splits(parts[0], parts[1], parts[2], entities, relations)
    if config.relation_prefixes:
        prefixes = [p for p in config.relation_prefixes.split(",") if p]
        splits = filter_subset(splits, prefixes)
        print(
            f"relation-prefix filter kept {splits.train.n_relations} relations, "
            f"{len(splits.train)} train triples"
        )
    return splits


def _outdir(config: RunConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _mine(config: RunConfig, splits: DatasetSplits) -> mining.MiningResult:
    return mining.mine_rules(splits.train, config.thresholds())


def cmd_mine(config: RunConfig) -> int:
    _validate_common(config, ("train",))
    splits = _load_splits(config)
    result = _mine(config, splits)
    out = _outdir(config)
    mining.write_rules(out / "rules.tsv", result.rules, splits.relations)
    lines = [
        f"{rule_type.value}\t{result.count(rule_type)}" for rule_type in RuleType
    ]
    lines.append(f"total\t{len(result.rules)}")
    (out / "mine_stats.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    print(f"wrote {out / 'rules.tsv'}")
    return 0


def _load_rules(config: RunConfig, splits: DatasetSplits):
    if config.rules:
        return mining.read_rules(config.rules, splits.relations)
    return _mine(config, splits).rules


def cmd_ground(config: RunConfig) -> int:
    _validate_common(config, ("train",))
    splits = _load_splits(config)
    rules = _load_rules(config, splits)
    grounds = mining.ground(rules, splits.train)
    out = _outdir(config)
    mining.write_ground_rules(
        out / "ground_rules.tsv", grounds, splits.entities, splits.relations
    )
    print(f"wrote {len(grounds)} ground rules to {out / 'ground_rules.tsv'}")
    return 0


def cmd_train(config: RunConfig) -> int:
    _validate_common(config, ("train",))
    splits = _load_splits(config)
    out = _outdir(config)
    graph = splits.train
    rules: list = []
    grounds: list = []
    if config.mode == "pre":
        rules = _load_rules(config, splits)
        extra = training.inferred_triples(rules, graph)
        augmented = sorted(graph.triples) + sorted(extra)
        graph = make_splits(
            augmented, [], [], splits.entities, splits.relations
        ).train
        print(f"pre mode: added {len(extra)} rule-generated triples to training data")
    elif config.mode == "rule":
        if config.ground_rules:
            grounds = mining.read_ground_rules(
                config.ground_rules, splits.entities, splits.relations
            )
            if config.rules:
                rules = mining.read_rules(config.rules, splits.relations)
        else:
            rules = _load_rules(config, splits)
            grounds = mining.ground(rules, graph)
            mining.write_rules(out / "rules.tsv", rules, splits.relations)
            mining.write_ground_rules(
                out / "ground_rules.tsv", grounds, splits.entities, splits.relations
            )
        print(f"joint training over {len(graph)} triples and {len(grounds)} ground rules")

    train_config = config.train_config()
    log_path = out / "train_log.csv"
    with open(log_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "phase", "mean_loss", "seconds"])

        def on_epoch(entry, params):
            writer.writerow(
                [entry.epoch, entry.phase, repr(entry.mean_loss), f"{entry.seconds:.3f}"]
            )
            if config.checkpoint_every and entry.epoch % config.checkpoint_every == 0:
                checkpoint.save_params(
                    str(out / f"checkpoint_epoch{entry.epoch}.tsv"),
                    params,
                    splits.entities.labels,
                    splits.relations.labels,
                )

        try:
            result = training.train(
                graph, grounds, rules, train_config, epoch_callback=on_epoch
            )
        except TrainingDiverged as exc:
            raise CliError(str(exc))
    checkpoint.save_params(
        str(out / "checkpoint.tsv"),
        result.params,
        splits.entities.labels,
        splits.relations.labels,
    )
    final = result.log[-1].mean_loss if result.log else float("nan")
    print(f"trained {len(result.log)} epochs; final mean loss {final:.6f}")
    print(f"wrote {out / 'checkpoint.tsv'} and {log_path}")
    return 0


def _write_metrics_csv(path: Path, rows: list[tuple[str, str, float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "setting", "value"])
        for metric, setting, value in rows:
            writer.writerow([metric, setting, repr(value)])


def _lp_table(metrics: dict[str, evaluation.LPMetrics]) -> str:
    settings = list(metrics)
    header = ["metric"] + settings
    rows = [["MR"], ["MRR"]] + [[f"Hits@{n}"] for n in evaluation.HITS_LEVELS]
    for s in settings:
        m = metrics[s]
        rows[0].append(f"{m.mr:.1f}")
        rows[1].append(f"{m.mrr:.4f}")
        for i, n in enumerate(evaluation.HITS_LEVELS):
            rows[2 + i].append(f"{m.hits[n]:.4f}")
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*header)] + [fmt.format(*r) for r in rows]
    return "\n".join(lines) + "\n"


def cmd_eval(config: RunConfig) -> int:
    _validate_common(config, ("train", "valid", "test"))
    if not config.checkpoint:
        raise CliError("--checkpoint is required for eval")
    splits = _load_splits(config)
    params, ent_labels, rel_labels = checkpoint.load_params(config.checkpoint)
    if params.kind is not ModelKind(config.model):
        raise CliError(
            f"checkpoint model kind is {params.kind.value!r} but the configuration "
            f"says {config.model!r}"
        )
    if params.dim != config.dim:
        raise CliError(
            f"checkpoint dimension is {params.dim} but the configuration says {config.dim}"
        )
    if ent_labels != splits.entities.labels or rel_labels != splits.relations.labels:
        raise CliError(
            "checkpoint vocabulary does not match the dataset files "
            "(different labels or ordering)"
        )
    out = _outdir(config)
    norm = Norm(config.norm)

    if config.task in ("lp", "both"):
        if not splits.test:
            raise CliError("link prediction needs a non-empty test set")
        settings = (
            ("raw", "filtered") if config.setting == "both" else (config.setting,)
        )
        report = evaluation.evaluate_rankings(
            params, splits.test, splits, settings, norm,
            tie=config.tie, keep_results=config.dump_ranks,
        )
        rows = []
        for s in settings:
            m = report.metrics[s]
            rows.append(("mr", s, m.mr))
            rows.append(("mrr", s, m.mrr))
            for n in evaluation.HITS_LEVELS:
                rows.append((f"hits@{n}", s, m.hits[n]))
        _write_metrics_csv(out / "metrics_lp.csv", rows)
        table = _lp_table(report.metrics)
        (out / "lp_report.txt").write_text(table, encoding="utf-8")
        print(table, end="")
        if config.dump_ranks:
            with open(out / "ranks.csv", "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(
                    ["head", "relation", "tail", "setting", "rank_head", "rank_tail"]
                )
                for s in settings:
                    for rr in report.results[s]:
                        writer.writerow(
                            [
                                ent_labels[rr.triple.head],
                                rel_labels[rr.triple.relation],
                                ent_labels[rr.triple.tail],
                                s,
                                rr.rank_head,
                                rr.rank_tail,
                            ]
                        )

    if config.task in ("tc", "both"):
        if not splits.valid or not splits.test:
            raise CliError("triple classification needs non-empty valid and test sets")
        rng_valid = SplitMix64(derive_seed(config.seed, STREAM_TC_VALID))
        rng_test = SplitMix64(derive_seed(config.seed, STREAM_TC_TEST))
        labeled_valid = evaluation.generate_tc_negatives(
            splits.valid, splits, rng_valid, config.tc_negatives
        )
        labeled_test = evaluation.generate_tc_negatives(
            splits.test, splits, rng_test, config.tc_negatives
        )
        thresholds = evaluation.fit_thresholds(params, labeled_valid, norm)
        metrics = evaluation.triple_classification(params, thresholds, labeled_test, norm)
        _write_metrics_csv(
            out / "metrics_tc.csv", [("accuracy", "test", metrics.accuracy)]
        )
        with open(out / "tc_thresholds.tsv", "w", encoding="utf-8") as fh:
            fh.write(f"?default?\t{thresholds.default!r}\n")
            for relation in sorted(thresholds.per_relation):
                fh.write(f"{rel_labels[relation]}\t{thresholds.per_relation[relation]!r}\n")
        print(
            f"triple classification accuracy {metrics.accuracy:.4f} "
            f"({metrics.n_correct}/{metrics.n_total})"
        )
    return 0


_COMMANDS = {"mine": cmd_mine, "ground": cmd_ground, "train": cmd_train, "eval": cmd_eval}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = build_config(args)
        return _COMMANDS[args.command](config)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
