"""Score the released corpus against its reference statistics.

Expects the released data converted into this package's file formats:
  <dir>/train.items.jsonl   labeled training items with their five judgments
  <dir>/dev.items.jsonl     labeled dev items
  <dir>/dev.pairs.tsv       per-premise pair labels (`id<TAB>L,L,L,L`)

Prints each measured quantity beside its reference value and tolerance, and
exits non-zero if any falls outside tolerance.

Usage: python3 scripts/reproduce_released.py --released-dir DIR
       (or set MPE_RELEASED_DIR)
"""

import argparse
import os
import sys
from pathlib import Path

from mpe.dataset import corpus_stats, load_items
from mpe.voting import attach_pair_labels, load_pair_labels, score_baselines


def check(name: str, got: float, want: float, tol: float) -> bool:
    ok = abs(got - want) <= tol
    mark = "ok " if ok else "OUT"
    print(f"  [{mark}] {name:34s} got {got:7.4f}  want {want:.4f} ± {tol}")
    return ok


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--released-dir", default=os.environ.get("MPE_RELEASED_DIR"))
    args = parser.parse_args()
    if not args.released_dir:
        print("no --released-dir given and MPE_RELEASED_DIR unset", file=sys.stderr)
        return 1
    base = Path(args.released_dir)
    for name in ("train.items.jsonl", "dev.items.jsonl", "dev.pairs.tsv"):
        if not (base / name).is_file():
            print(f"missing {base / name}", file=sys.stderr)
            return 1

    dev = attach_pair_labels(
        load_items(base / "dev.items.jsonl"), load_pair_labels(base / "dev.pairs.tsv")
    )
    vote = score_baselines(dev)
    stats = corpus_stats(load_items(base / "train.items.jsonl"))

    print("voting baselines (dev):")
    ok = check("heuristic accuracy", vote.heuristic_acc, 0.417, 0.005)
    ok &= check("strict majority accuracy", vote.majority_acc_strict, 0.346, 0.005)
    for cat, want in enumerate((0.218, 0.269, 0.167, 0.248, 0.098)):
        ok &= check(
            f"agreement category {cat} share",
            vote.category_histogram[cat],
            want,
            0.005,
        )
    print("corpus statistics (train):")
    for label, want in (("E", 0.323), ("N", 0.263), ("C", 0.416)):
        ok &= check(
            f"label share {label}", stats.label_distribution[label], want, 0.002
        )
    ok &= check("annotator agreement", stats.agreement_overall, 0.70, 0.02)
    for label, want in (("E", 0.82), ("N", 0.42), ("C", 0.78)):
        ok &= check(
            f"agreement on {label}", stats.agreement_by_label[label], want, 0.03
        )
    ok &= check("mean lemma overlap", stats.overlap_lemma["all"].mean, 0.33, 0.03)

    print("all within tolerance" if ok else "OUT-OF-TOLERANCE values present")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
