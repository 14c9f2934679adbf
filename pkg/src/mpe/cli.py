"""Command-line pipeline: graph building, dataset generation, statistics,
adjudication, voting baselines, training, evaluation, and gradient checks.

Every file-producing run writes a `<output>.manifest.json` beside its primary
output recording the subcommand, argv, input hashes, configuration (with a
hash), and format versions — enough to reproduce the run byte-for-byte.
Interactive adjudication decisions are recorded in the manifest so those runs
stay reproducible too. Inputs are loaded and validated in full before any
output is written, and all writes are atomic, so a failed run leaves no
partial artifacts.

Relative paths resolve against $MPE_DATA_DIR when it is set.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .autodiff import CHECKPOINT_VERSION, cross_entropy, grad_check
from .dataset import (
    FORMAT_VERSION,
    GenerationConfig,
    ITEMS_FORMAT,
    Item,
    SPE_FORMAT,
    adjudicate,
    aggregate_labels,
    corpus_stats,
    generate_items,
    graph_captions,
    load_captions,
    load_decisions,
    load_items,
    load_spe_pairs,
    save_items,
    _atomic_write,
)
from .graph import GRAPH_VERSION, build_graph
from .models import (
    ARCHITECTURES,
    EmbeddingTable,
    concat_premises,
    load_model,
    load_pretrained_vectors,
)
from .training import (
    PRESETS,
    TrainConfig,
    build_model,
    evaluate,
    format_eval_report,
    pretrain_finetune,
    train,
    vocabulary_from_items,
)
from .voting import attach_pair_labels, load_pair_labels, score_baselines

DATA_DIR_ENV = "MPE_DATA_DIR"

MODEL_ALIASES = {
    "lstm": "conditional-lstm",
    "attn": "attention",
    "se": "sum-of-experts",
    **{name: name for name in ARCHITECTURES},
}


class CliError(Exception):
    """Validation problem: bad flags, missing or malformed inputs."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        raise CliError(f"{self.prog}: {message}")


def _resolve(path: str) -> Path:
    p = Path(path)
    base = os.environ.get(DATA_DIR_ENV)
    if base and not p.is_absolute():
        return Path(base) / p
    return p


def _require_input(path: str) -> Path:
    resolved = _resolve(path)
    if not resolved.is_file():
        raise CliError(f"input file not found: {resolved}")
    return resolved


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(
    primary_output: Path,
    command: str,
    argv: Sequence[str],
    inputs: dict[str, Path],
    config: dict,
    outputs: Sequence[Path],
    extra: dict | None = None,
) -> Path:
    config_blob = json.dumps(config, sort_keys=True)
    manifest = {
        "command": command,
        "argv": list(argv),
        "inputs": {
            name: {"path": str(path), "sha256": _sha256(path)}
            for name, path in sorted(inputs.items())
        },
        "outputs": [str(p) for p in outputs],
        "config": config,
        "config_hash": hashlib.sha256(config_blob.encode("utf-8")).hexdigest(),
        "versions": {
            "package": __version__,
            "items_format": FORMAT_VERSION,
            "graph_format": GRAPH_VERSION,
            "checkpoint_format": CHECKPOINT_VERSION,
        },
    }
    if extra:
        manifest.update(extra)
    path = primary_output.with_name(primary_output.name + ".manifest.json")
    _atomic_write(path, json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return path


def _write_json(path: Path, record: dict) -> None:
    _atomic_write(path, json.dumps(record, sort_keys=True, indent=2) + "\n")


def _load_examples(path: Path) -> list:
    """Load an items or single-premise-pairs file, dispatching on its header."""
    with path.open(encoding="utf-8") as fh:
        first = fh.readline()
    try:
        header = json.loads(first)
    except json.JSONDecodeError:
        raise CliError(f"{path}:1: not a data file (bad header)") from None
    kind = header.get("format") if isinstance(header, dict) else None
    if kind == ITEMS_FORMAT:
        return load_items(path)
    if kind == SPE_FORMAT:
        return load_spe_pairs(path)
    raise CliError(f"{path}:1: unrecognized format {kind!r}")


# --- subcommands --------------------------------------------------------------


def cmd_build_graph(args, argv) -> int:
    captions_path = _require_input(args.captions)
    groups = load_captions(captions_path)
    graph = build_graph(graph_captions(groups))
    out = _resolve(args.out)
    graph.save(out)
    _write_manifest(
        out,
        "build-graph",
        argv,
        {"captions": captions_path},
        {},
        [out],
    )
    print(f"graph: {len(graph)} nodes, {len(graph.edges)} edges -> {out}")
    return 0


def cmd_build_dataset(args, argv) -> int:
    captions_path = _require_input(args.captions)
    config = GenerationConfig(
        n_items=args.n_items,
        seed=args.seed,
        overlap_max=args.overlap_max,
        related_fraction=args.related_fraction,
        min_support=args.min_support,
        split=args.split,
    )
    groups = load_captions(captions_path)
    graph = build_graph(graph_captions(groups))
    result = generate_items(groups, graph, config)
    out = _resolve(args.out)
    save_items(result.items, out)
    diag = asdict(result.diagnostics)
    _write_manifest(
        out,
        "build-dataset",
        argv,
        {"captions": captions_path},
        asdict(config),
        [out],
        extra={"diagnostics": diag},
    )
    print(
        f"items: {diag['produced']}/{diag['requested']} "
        f"(related {diag['related']}, unrelated {diag['unrelated']}, "
        f"shortfall {diag['shortfall']}) -> {out}"
    )
    if diag["shortfall"]:
        print(
            f"warning: short by {diag['shortfall']} "
            f"(rejected: support {diag['rejected_support']}, "
            f"overlap {diag['rejected_overlap']}, "
            f"no-content {diag['rejected_no_content']})"
        )
    return 0


def _format_stats(report) -> str:
    lines = [
        f"items: {report.item_count}",
        f"types: {report.type_count}",
        f"tokens: {report.token_count}",
        f"premise-set length: {report.premise_set_length.mean:.2f} "
        f"(sd {report.premise_set_length.sd:.2f})",
        f"hypothesis length: {report.hypothesis_length.mean:.2f} "
        f"(sd {report.hypothesis_length.sd:.2f})",
        "label distribution: "
        + "  ".join(
            f"{label} {share:.1%}"
            for label, share in report.label_distribution.items()
        ),
    ]
    for name, table in (
        ("full overlap", report.overlap_full),
        ("lemma overlap", report.overlap_lemma),
    ):
        parts = []
        for key, moments in table.items():
            parts.append(f"{key} -" if moments is None else f"{key} {moments.mean:.2f}")
        lines.append(f"{name}: " + "  ".join(parts))
    if report.agreement_overall is not None:
        per = "  ".join(
            f"{label} {value:.2f}" if value is not None else f"{label} -"
            for label, value in report.agreement_by_label.items()
        )
        lines.append(f"agreement: {report.agreement_overall:.2f} ({per})")
    if report.overlap_excluded:
        lines.append(f"overlap excluded items: {report.overlap_excluded}")
    return "\n".join(lines) + "\n"


def cmd_stats(args, argv) -> int:
    items_path = _require_input(args.items)
    items = load_items(items_path)
    report = corpus_stats(items)
    print(_format_stats(report), end="")
    if args.out:
        out = _resolve(args.out)
        _write_json(out, asdict(report))
        _write_manifest(out, "stats", argv, {"items": items_path}, {}, [out])
    return 0


def _raw(text) -> str:
    """Sentence objects render as their raw text; plain strings pass through."""
    return getattr(text, "raw", text)


def _adjudication_prompt(item: Item, stream) -> str | None:
    counts = {label: item.judgments.count(label) for label in ("E", "N", "C")}
    print(f"\nitem {item.id} (votes E:{counts['E']} N:{counts['N']} C:{counts['C']})")
    for i, premise in enumerate(item.premises, 1):
        print(f"  premise {i}: {_raw(premise)}")
    print(f"  hypothesis: {_raw(item.hypothesis)}")
    while True:
        print("label [E/N/C/s=skip]? ", end="", flush=True)
        line = stream.readline()
        if not line:
            return None  # EOF: stop adjudicating
        answer = line.strip().upper()
        if answer in ("E", "N", "C"):
            return answer
        if answer in ("S", "SKIP", ""):
            return "skip"
        print(f"unrecognized answer {line.strip()!r}")


def run_adjudication_loop(flagged: Sequence[Item], stream) -> dict[str, str]:
    """Terminal review: returns the decisions the reviewer entered."""
    decisions: dict[str, str] = {}
    for item in flagged:
        answer = _adjudication_prompt(item, stream)
        if answer is None:
            break
        if answer != "skip":
            decisions[item.id] = answer
    return decisions


def cmd_adjudicate(args, argv) -> int:
    items_path = _require_input(args.items)
    items = load_items(items_path)
    flagged = [
        item
        for item in items
        if item.judgments and aggregate_labels(item.judgments).needs_adjudication
    ]
    if not flagged:
        raise CliError(f"{items_path}: no items need adjudication")
    inputs = {"items": items_path}
    if args.decisions:
        decisions_path = _require_input(args.decisions)
        inputs["decisions"] = decisions_path
        decisions = load_decisions(decisions_path)
    else:
        decisions = run_adjudication_loop(flagged, sys.stdin)
    resolved, unresolved = adjudicate(flagged, decisions)
    by_id = {item.id: item for item in resolved}
    merged = [by_id.get(item.id, item) for item in items]
    out = _resolve(args.out)
    save_items(merged, out)
    _write_manifest(
        out,
        "adjudicate",
        argv,
        inputs,
        {},
        [out],
        extra={"decisions": dict(sorted(decisions.items())), "unresolved": unresolved},
    )
    print(
        f"flagged {len(flagged)}, decided {len(decisions)}, "
        f"unresolved {len(unresolved)} -> {out}"
    )
    return 0


def cmd_vote(args, argv) -> int:
    items_path = _require_input(args.items)
    pairs_path = _require_input(args.pairs)
    items = load_items(items_path)
    pair_labels = load_pair_labels(pairs_path)
    items = attach_pair_labels(items, pair_labels)
    report = score_baselines(items)
    histogram = "  ".join(
        f"{cat}:{share:.1%}" for cat, share in enumerate(report.category_histogram)
    )
    print(f"scored {report.n_scored} items ({report.n_skipped} skipped)")
    print(f"majority (strict):           {report.majority_acc_strict:.1%}")
    print(f"majority (neutral fallback): {report.majority_acc_neutral_fallback:.1%}")
    print(f"entail/contradict heuristic: {report.heuristic_acc:.1%}")
    print(f"agreement histogram: {histogram}")
    if args.out:
        out = _resolve(args.out)
        _write_json(out, asdict(report))
        _write_manifest(
            out, "vote", argv, {"items": items_path, "pairs": pairs_path}, {}, [out]
        )
    return 0


def _train_config(args) -> TrainConfig:
    config = PRESETS[args.preset] if args.preset else TrainConfig()
    overrides = {}
    for name in (
        "model",
        "state_dim",
        "embedding_dim",
        "epochs",
        "batch_size",
        "learning_rate",
        "keep_prob",
        "seed",
        "regime",
    ):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if "model" in overrides:
        overrides["model"] = MODEL_ALIASES.get(overrides["model"], overrides["model"])
    if args.pretrain and "regime" not in overrides and config.regime == "single":
        overrides["regime"] = "pretrain-then-finetune"
    if args.embeddings and args.trainable_embeddings:
        overrides["trainable_embeddings"] = True
    elif args.embeddings:
        overrides["trainable_embeddings"] = False
    try:
        return replace(config, **overrides)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def cmd_train(args, argv) -> int:
    config = _train_config(args)
    items_path = _require_input(args.items)
    items = _load_examples(items_path)
    inputs = {"items": items_path}
    dev = None
    if args.dev:
        dev_path = _require_input(args.dev)
        inputs["dev"] = dev_path
        dev = _load_examples(dev_path)
    pretrain_items = None
    if args.pretrain:
        pretrain_path = _require_input(args.pretrain)
        inputs["pretrain"] = pretrain_path
        pretrain_items = _load_examples(pretrain_path)
    if config.regime == "pretrain-then-finetune" and pretrain_items is None:
        raise CliError("regime pretrain-then-finetune needs --pretrain")

    embeddings = None
    if args.embeddings:
        embeddings_path = _require_input(args.embeddings)
        inputs["embeddings"] = embeddings_path
        vectors = load_pretrained_vectors(embeddings_path)
        embeddings = EmbeddingTable.from_vectors(
            vectors,
            np.random.default_rng(config.seed),
            trainable=config.trainable_embeddings,
        )

    corpus = list(items) + (list(pretrain_items) if pretrain_items else [])
    model = build_model(config, vocabulary_from_items(corpus), embeddings=embeddings)
    if config.regime == "pretrain-then-finetune":
        result = pretrain_finetune(pretrain_items, items, config, dev=dev, model=model)
    else:
        result = train(items, config, dev=dev, model=model)

    out = _resolve(args.out)
    result.model.save(out)
    outputs = [out]
    logs_path = (
        _resolve(args.logs) if args.logs else out.with_name(out.name + ".logs.jsonl")
    )
    _atomic_write(
        logs_path,
        "".join(json.dumps(log.to_record(), sort_keys=True) + "\n" for log in result.logs),
    )
    outputs.append(logs_path)
    if args.best_out:
        best_path = _resolve(args.best_out)
        result.save_best_checkpoint(best_path)
        outputs.append(best_path)
    _write_manifest(
        out,
        "train",
        argv,
        inputs,
        asdict(config),
        outputs,
        extra={"best_phase": result.best_phase, "best_epoch": result.best_epoch},
    )
    last = result.logs[-1]
    dev_note = "" if last.dev_accuracy is None else f", dev acc {last.dev_accuracy:.1%}"
    print(
        f"trained {config.model} for {len(result.logs)} epochs "
        f"(final loss {last.train_loss:.4f}, train acc {last.train_accuracy:.1%}"
        f"{dev_note}) -> {out}"
    )
    print(f"best epoch: {result.best_phase} {result.best_epoch}")
    return 0


def cmd_eval(args, argv) -> int:
    model_path = _require_input(args.model)
    items_path = _require_input(args.items)
    model = load_model(model_path)
    items = _load_examples(items_path)
    report = evaluate(model, items)
    print(format_eval_report(report), end="")
    outputs = []
    out = None
    if args.out:
        out = _resolve(args.out)
        _write_json(out, report.to_record())
        outputs.append(out)
    if args.predictions:
        predictions_path = _resolve(args.predictions)
        _atomic_write(
            predictions_path,
            "".join(
                f"{item.id}\t{guess}\n"
                for item, guess in zip(items, report.predictions)
            ),
        )
        outputs.append(predictions_path)
    if outputs:
        _write_manifest(
            out or outputs[0],
            "eval",
            argv,
            {"model": model_path, "items": items_path},
            {},
            outputs,
        )
    return 0


GRADCHECK_PREMISES = (
    ("w00", "w01", "w02"),
    ("w03", "w04"),
    ("w05", "w06", "w07"),
    ("w08", "w09"),
)
GRADCHECK_HYPOTHESIS = ("w10", "w11")


def run_model_gradcheck(kind: str, dim: int, state_dim: int, seed: int):
    """Finite-difference check of one architecture on a fixed tiny example."""
    vocab = [f"w{i:02d}" for i in range(12)]
    model = ARCHITECTURES[kind].init(
        vocab_tokens=vocab,
        dim=dim,
        state_dim=state_dim,
        rng=np.random.default_rng(seed),
        keep_prob=1.0,
    )

    def forward():
        if kind == "sum-of-experts":
            logits, _ = model.forward(
                [list(p) for p in GRADCHECK_PREMISES], list(GRADCHECK_HYPOTHESIS)
            )
        elif kind == "attention":
            logits, _ = model.forward(
                concat_premises(GRADCHECK_PREMISES), list(GRADCHECK_HYPOTHESIS)
            )
        else:
            logits = model.forward(
                concat_premises(GRADCHECK_PREMISES), list(GRADCHECK_HYPOTHESIS)
            )
        return cross_entropy(logits, 1)

    return grad_check(
        forward, model.params(), np.random.default_rng(seed + 1), samples=3
    )


def cmd_gradcheck(args, argv) -> int:
    kinds = (
        sorted(ARCHITECTURES)
        if args.model == "all"
        else [MODEL_ALIASES[args.model]]
    )
    all_passed = True
    for kind in kinds:
        report = run_model_gradcheck(kind, args.dim, args.state_dim, args.seed)
        verdict = "PASS" if report.passed else "FAIL"
        worst = max(report.worst_by_param, key=report.worst_by_param.get)
        print(
            f"{kind}: max rel err {report.max_rel_err:.3e} "
            f"(worst: {worst}) [{verdict}]"
        )
        all_passed = all_passed and report.passed
    return 0 if all_passed else 2


# --- argument parsing ----------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="mpe", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mpe {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("build-graph", help="build the phrase graph from captions")
    p.add_argument("--captions", required=True, help="caption groups TSV")
    p.add_argument("--out", required=True, help="graph file to write")
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("build-dataset", help="generate entailment items")
    p.add_argument("--captions", required=True)
    p.add_argument("--out", required=True, help="items file to write")
    p.add_argument("--n-items", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--overlap-max", type=float, default=0.5)
    p.add_argument("--related-fraction", type=float, default=0.5)
    p.add_argument("--min-support", type=int, default=2)
    p.add_argument("--split", default="train", choices=("train", "dev", "test"))
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("stats", help="summarize a labeled items file")
    p.add_argument("--items", required=True)
    p.add_argument("--out", help="also write the report as JSON")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("adjudicate", help="resolve items with split judgments")
    p.add_argument("--items", required=True)
    p.add_argument("--out", required=True, help="items file with decisions applied")
    p.add_argument(
        "--decisions", help="TSV of item-id<TAB>label; omit for an interactive loop"
    )
    p.set_defaults(func=cmd_adjudicate)

    p = sub.add_parser("vote", help="score the pair-label voting baselines")
    p.add_argument("--items", required=True)
    p.add_argument("--pairs", required=True, help="pair labels TSV")
    p.add_argument("--out", help="also write the report as JSON")
    p.set_defaults(func=cmd_vote)

    p = sub.add_parser("train", help="train an entailment model")
    p.add_argument("--items", required=True, help="training items")
    p.add_argument("--out", required=True, help="checkpoint to write")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--model", choices=sorted(MODEL_ALIASES))
    p.add_argument("--dev", help="dev items for per-epoch accuracy")
    p.add_argument("--pretrain", help="first-phase items (single-premise ok)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--keep-prob", type=float)
    p.add_argument("--state-dim", type=int)
    p.add_argument("--embedding-dim", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--regime", choices=("single", "pretrain-then-finetune"))
    p.add_argument("--logs", help="epoch log path (default: <out>.logs.jsonl)")
    p.add_argument("--best-out", help="also write the best-epoch checkpoint")
    p.add_argument("--embeddings", help="pretrained vector file (frozen by default)")
    p.add_argument(
        "--trainable-embeddings",
        action="store_true",
        help="update pretrained embeddings during training",
    )
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on labeled items")
    p.add_argument("--model", required=True, help="checkpoint file")
    p.add_argument("--items", required=True)
    p.add_argument("--out", help="also write the report as JSON")
    p.add_argument("--predictions", help="write id<TAB>prediction lines")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient check")
    p.add_argument(
        "--model", default="all", choices=sorted(MODEL_ALIASES) + ["all"]
    )
    p.add_argument("--dim", type=int, default=8, help="embedding dimension")
    p.add_argument("--state-dim", type=int, default=8)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help/--version
        return int(exc.code or 0)
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
