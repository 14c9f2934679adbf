"""Item generation, judgment aggregation, adjudication, and corpus statistics.

An item pairs four premise captions from one scene group with a hypothesis
phrase and a three-way label (E = entailment, N = neutral, C = contradiction).
Hypotheses are drawn from the phrase graph: generalizations of a fifth caption
of the same group (related) or of a caption from another group (unrelated),
kept only when they clear a support threshold and a word-overlap ceiling
against the premises.

Five crowd judgments reduce to a final label by majority, except two flagged
patterns (3-2 between E and C, and 2-2-1) that go to human adjudication;
label_source records which route produced each final label.
"""

from __future__ import annotations

import json
import os
import random
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .graph import PhraseGraph, simplify_hypothesis
from .text import (
    OverlapUndefinedError,
    Sentence,
    normalize,
    word_overlap,
)

LABELS = ("E", "N", "C")
SPLITS = ("train", "dev", "test")
LABEL_SOURCES = ("majority", "majority-provisional", "adjudicated")

ITEMS_FORMAT = "mpe-items"
SPE_FORMAT = "mpe-spe-items"
FORMAT_VERSION = 1


class UnknownItemError(KeyError):
    """A judgment or decision references an item id that does not exist."""


class EmptyCorpusError(ValueError):
    """Statistics were requested over zero items."""


def label_index(label: str) -> int:
    try:
        return LABELS.index(label)
    except ValueError:
        raise ValueError(f"unknown label {label!r}, expected one of {LABELS}") from None


def _atomic_write(path: str | Path, content: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass(frozen=True)
class Item:
    """One four-premise entailment problem."""

    id: str
    scene_group_id: str
    premises: tuple[Sentence, Sentence, Sentence, Sentence]
    hypothesis: Sentence
    gold_label: str | None = None
    judgments: tuple[str, ...] = ()
    pair_labels: tuple[str, str, str, str] | None = None
    phenomenon_tags: frozenset[str] = frozenset()
    split: str = "train"
    label_source: str | None = None

    def __post_init__(self) -> None:
        if len(self.premises) != 4:
            raise ValueError(f"item {self.id}: needs exactly 4 premises")
        if self.judgments and len(self.judgments) != 5:
            raise ValueError(f"item {self.id}: judgments must number exactly 5")
        for j in self.judgments:
            label_index(j)
        if self.gold_label is not None:
            label_index(self.gold_label)
        if self.pair_labels is not None:
            if len(self.pair_labels) != 4:
                raise ValueError(f"item {self.id}: pair_labels must number exactly 4")
            for p in self.pair_labels:
                label_index(p)
        if self.split not in SPLITS:
            raise ValueError(f"item {self.id}: bad split {self.split!r}")
        if self.label_source is not None and self.label_source not in LABEL_SOURCES:
            raise ValueError(f"item {self.id}: bad label_source {self.label_source!r}")


@dataclass(frozen=True)
class SpePair:
    """Single-premise pair, the unit of the pairwise annotations."""

    id: str
    premise: Sentence
    hypothesis: Sentence
    label: str

    def __post_init__(self) -> None:
        label_index(self.label)


def spe_pairs(items: Iterable[Item]) -> list[SpePair]:
    """Expand each item into its four annotated premise-hypothesis pairs."""
    out = []
    for item in items:
        if item.pair_labels is None:
            raise ValueError(f"item {item.id}: no pair_labels to expand")
        for i, (premise, label) in enumerate(zip(item.premises, item.pair_labels)):
            out.append(
                SpePair(
                    id=f"{item.id}#{i}",
                    premise=premise,
                    hypothesis=item.hypothesis,
                    label=label,
                )
            )
    return out


# --- judgment aggregation -------------------------------------------------

AGGREGATION_KINDS = ("clear-majority", "split-3-2", "split-2-2-1")


@dataclass(frozen=True)
class AggregationOutcome:
    """How five judgments reduce to a (possibly provisional) label.

    label is None only for 2-2-1 splits, which carry no usable majority; 3-2
    splits between E and C keep the majority label provisionally but are
    flagged for human adjudication along with the 2-2-1 cases.
    """

    kind: str
    label: str | None
    vote_counts: tuple[int, int, int]

    def __post_init__(self) -> None:
        if self.kind not in AGGREGATION_KINDS:
            raise ValueError(f"bad aggregation kind {self.kind!r}")
        if sum(self.vote_counts) != 5:
            raise ValueError(f"vote_counts {self.vote_counts} must sum to 5")

    @property
    def needs_adjudication(self) -> bool:
        return self.kind != "clear-majority"


def aggregate_labels(judgments: Sequence[str]) -> AggregationOutcome:
    """Reduce exactly five E/N/C judgments to an aggregation outcome."""
    js = tuple(judgments)
    if len(js) != 5:
        raise ValueError(f"expected exactly 5 judgments, got {len(js)}")
    for j in js:
        label_index(j)
    counts = tuple(js.count(label) for label in LABELS)
    top = max(counts)
    leaders = [label for label, c in zip(LABELS, counts) if c == top]
    if top >= 3:
        label = leaders[0]
        runners = [l for l, c in zip(LABELS, counts) if c == 2]
        if top == 3 and runners and {label, runners[0]} == {"E", "C"}:
            return AggregationOutcome("split-3-2", label, counts)
        return AggregationOutcome("clear-majority", label, counts)
    # Five votes over three labels: if no count reaches 3 the split is 2-2-1.
    return AggregationOutcome("split-2-2-1", None, counts)


def attach_judgments(
    items: Sequence[Item], judgments: Mapping[str, Sequence[str]]
) -> list[Item]:
    """Attach crowd judgments and derive labels where a majority exists.

    Items without an entry pass through unchanged. 2-2-1 items come back with
    judgments attached but no label; 3-2 E/C items get a provisional label.
    """
    known = {item.id for item in items}
    unknown = sorted(set(judgments) - known)
    if unknown:
        raise UnknownItemError(f"judgments for unknown item ids: {unknown}")
    out = []
    for item in items:
        if item.id not in judgments:
            out.append(item)
            continue
        js = tuple(judgments[item.id])
        outcome = aggregate_labels(js)
        if outcome.kind == "clear-majority":
            source: str | None = "majority"
        elif outcome.kind == "split-3-2":
            source = "majority-provisional"
        else:
            source = None
        out.append(
            replace(item, judgments=js, gold_label=outcome.label, label_source=source)
        )
    return out


def adjudicate(
    items: Sequence[Item], decisions: Mapping[str, str]
) -> tuple[list[Item], list[str]]:
    """Apply human decisions to flagged items.

    Every input item must be one aggregation flags (split-3-2 or split-2-2-1).
    Returns the updated items plus the ids left unresolved: a 2-2-1 item
    without a decision stays unlabeled, a 3-2 item keeps its provisional label.
    """
    known = {item.id for item in items}
    unknown = sorted(set(decisions) - known)
    if unknown:
        raise UnknownItemError(f"decisions for unknown item ids: {unknown}")
    out = []
    unresolved = []
    for item in items:
        outcome = aggregate_labels(item.judgments)
        if not outcome.needs_adjudication:
            raise ValueError(f"item {item.id} does not need adjudication")
        if item.id in decisions:
            decision = decisions[item.id]
            label_index(decision)
            out.append(replace(item, gold_label=decision, label_source="adjudicated"))
        else:
            unresolved.append(item.id)
            out.append(item)
    return out, unresolved


@dataclass(frozen=True)
class ProvenanceReport:
    """How final labels came to be, and how often they match a strict majority."""

    total: int
    labeled: int
    unlabeled: int
    by_source: dict[str, int]
    majority_matches: int
    majority_fraction: float | None


def provenance_report(items: Sequence[Item]) -> ProvenanceReport:
    """Fraction of final labels equal to the strict majority of judgments.

    A label "matches the majority" when the item's judgments have a unique
    count >= 3 and the final label equals it; adjudicated 2-2-1 items never
    match. Only labeled items with judgments enter the fraction.
    """
    by_source = {source: 0 for source in LABEL_SOURCES}
    labeled = 0
    judged_labeled = 0
    matches = 0
    for item in items:
        if item.gold_label is None:
            continue
        labeled += 1
        if item.label_source is not None:
            by_source[item.label_source] += 1
        if not item.judgments:
            continue
        judged_labeled += 1
        counts = [item.judgments.count(label) for label in LABELS]
        top = max(counts)
        if top >= 3 and counts.count(top) == 1:
            if item.gold_label == LABELS[counts.index(top)]:
                matches += 1
    return ProvenanceReport(
        total=len(items),
        labeled=labeled,
        unlabeled=len(items) - labeled,
        by_source=by_source,
        majority_matches=matches,
        majority_fraction=(matches / judged_labeled) if judged_labeled else None,
    )


# --- corpus loading --------------------------------------------------------


@dataclass(frozen=True)
class CaptionGroup:
    """Captions sharing one scene, ordered by their caption index."""

    gid: str
    captions: tuple[Sentence, ...]

    def __post_init__(self) -> None:
        if not self.gid or "\t" in self.gid:
            raise ValueError(f"bad scene group id {self.gid!r}")
        if not self.captions:
            raise ValueError(f"group {self.gid}: no captions")


def load_captions(path: str | Path) -> list[CaptionGroup]:
    """Parse a `gid<TAB>index<TAB>text` corpus into groups sorted by gid."""
    path = Path(path)
    rows: dict[str, dict[int, Sentence]] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(
                    f"{path}:{lineno}: expected gid<TAB>index<TAB>text, got {line!r}"
                )
            gid, idx_s, text = parts
            try:
                idx = int(idx_s)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad caption index {idx_s!r}") from None
            group = rows.setdefault(gid, {})
            if idx in group:
                raise ValueError(f"{path}:{lineno}: duplicate caption index {gid}/{idx}")
            try:
                group[idx] = normalize(text)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return [
        CaptionGroup(gid=gid, captions=tuple(rows[gid][i] for i in sorted(rows[gid])))
        for gid in sorted(rows)
    ]


def graph_captions(groups: Iterable[CaptionGroup]) -> list[tuple[str, Sentence]]:
    """Flatten groups into the (gid, Sentence) pairs build_graph consumes."""
    return [(g.gid, sent) for g in groups for sent in g.captions]


# --- item generation -------------------------------------------------------


@dataclass(frozen=True)
class GenerationConfig:
    """Knobs for item generation.

    min_support counts captions (graph caption_count) that reduce to a
    candidate phrase; overlap_max is inclusive and applies to full-token
    overlap between hypothesis and premise set. related_fraction splits the
    requested n_items between same-group and other-group hypothesis sources
    before sampling.
    """

    n_items: int
    seed: int = 0
    overlap_max: float = 0.5
    related_fraction: float = 0.5
    min_support: int = 2
    split: str = "train"

    def __post_init__(self) -> None:
        if self.n_items < 1:
            raise ValueError("n_items must be >= 1")
        if not 0.0 <= self.overlap_max <= 1.0:
            raise ValueError("overlap_max must lie in [0, 1]")
        if not 0.0 <= self.related_fraction <= 1.0:
            raise ValueError("related_fraction must lie in [0, 1]")
        if self.min_support < 1:
            raise ValueError("min_support must be >= 1")
        if self.split not in SPLITS:
            raise ValueError(f"bad split {self.split!r}")


@dataclass
class GenerationDiagnostics:
    requested: int = 0
    produced: int = 0
    related: int = 0
    unrelated: int = 0
    shortfall: int = 0
    groups_total: int = 0
    groups_with_4plus: int = 0
    groups_with_5plus: int = 0
    groups_skipped: int = 0
    rejected_support: int = 0
    rejected_overlap: int = 0
    rejected_no_content: int = 0


@dataclass(frozen=True)
class GenerationResult:
    items: list[Item]
    diagnostics: GenerationDiagnostics


def generate_items(
    groups: Sequence[CaptionGroup],
    graph: PhraseGraph,
    config: GenerationConfig,
) -> GenerationResult:
    """Sample items: one per host group, hypotheses from the phrase graph.

    Host groups are visited in seeded-shuffle order; each contributes at most
    one item. Related items draw the hypothesis from generalizations of the
    group's own fifth caption, unrelated items from a random other group's
    caption; a group that cannot fill its drawn kind backfills the other.
    A shortfall is reported in the diagnostics, never silently truncated.
    """
    rng = random.Random(config.seed)
    diag = GenerationDiagnostics(requested=config.n_items)
    groups = sorted(groups, key=lambda g: g.gid)
    diag.groups_total = len(groups)
    hosts = [g for g in groups if len(g.captions) >= 4]
    diag.groups_with_4plus = len(hosts)
    diag.groups_with_5plus = sum(1 for g in groups if len(g.captions) >= 5)

    def filtered_candidates(
        premises: Sequence[Sentence], source: Sentence
    ) -> list[Sentence]:
        out = []
        for phrase in simplify_hypothesis(source, premises, graph):
            node = graph.nodes[graph.node_id_for_phrase(phrase)]
            if node.caption_count < config.min_support:
                diag.rejected_support += 1
                continue
            hypothesis = normalize(" ".join(phrase))
            try:
                overlap = word_overlap(hypothesis, premises, "full")
            except OverlapUndefinedError:
                diag.rejected_no_content += 1
                continue
            if overlap > config.overlap_max:
                diag.rejected_overlap += 1
                continue
            out.append(hypothesis)
        return out

    order = list(hosts)
    rng.shuffle(order)
    related_left = round(config.n_items * config.related_fraction)
    unrelated_left = config.n_items - related_left
    drafted: list[tuple[CaptionGroup, Sentence, bool]] = []

    for group in order:
        if related_left + unrelated_left == 0:
            break
        premises = group.captions[:4]

        def make_related() -> Sentence | None:
            if len(group.captions) < 5:
                return None
            candidates = filtered_candidates(premises, group.captions[4])
            return rng.choice(candidates) if candidates else None

        def make_unrelated() -> Sentence | None:
            partners = [g for g in groups if g.gid != group.gid]
            if not partners:
                return None
            partner = rng.choice(partners)
            source = rng.choice(partner.captions)
            candidates = filtered_candidates(premises, source)
            return rng.choice(candidates) if candidates else None

        if related_left and unrelated_left:
            want_related = rng.random() < related_left / (related_left + unrelated_left)
        else:
            want_related = related_left > 0

        hypothesis = make_related() if want_related else make_unrelated()
        is_related = want_related
        if hypothesis is None:
            other_left = unrelated_left if want_related else related_left
            if other_left > 0:
                hypothesis = make_unrelated() if want_related else make_related()
                is_related = not want_related
        if hypothesis is None:
            diag.groups_skipped += 1
            continue
        drafted.append((group, hypothesis, is_related))
        if is_related:
            related_left -= 1
            diag.related += 1
        else:
            unrelated_left -= 1
            diag.unrelated += 1

    items = [
        Item(
            id=f"{config.split}-{i:05d}",
            scene_group_id=group.gid,
            premises=group.captions[:4],
            hypothesis=hypothesis,
            split=config.split,
        )
        for i, (group, hypothesis, _) in enumerate(drafted)
    ]
    diag.produced = len(items)
    diag.shortfall = config.n_items - len(items)
    return GenerationResult(items=items, diagnostics=diag)


# --- corpus statistics -----------------------------------------------------


@dataclass(frozen=True)
class Moments:
    mean: float
    sd: float

    def __post_init__(self) -> None:
        if self.sd < 0:
            raise ValueError("sd must be >= 0")


def _moments(values: Sequence[float]) -> Moments | None:
    if not values:
        return None
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    # Population variance; tiny negatives from roundoff clamp to zero.
    return Moments(mean=mean, sd=max(var, 0.0) ** 0.5)


@dataclass(frozen=True)
class StatsReport:
    """Corpus-level text and label statistics.

    Overlap maps are keyed by "all" plus each label; entries are None when no
    item carries that label. Agreement is the mean fraction of judgments
    matching the final label, over items that have judgments.
    """

    item_count: int
    type_count: int
    token_count: int
    premise_set_length: Moments
    hypothesis_length: Moments
    label_distribution: dict[str, float]
    overlap_full: dict[str, Moments | None]
    overlap_lemma: dict[str, Moments | None]
    agreement_overall: float | None
    agreement_by_label: dict[str, float | None]
    overlap_excluded: int


def corpus_stats(items: Sequence[Item]) -> StatsReport:
    if not items:
        raise EmptyCorpusError("no items to summarize")
    unlabeled = [item.id for item in items if item.gold_label is None]
    if unlabeled:
        raise ValueError(f"items without gold labels: {unlabeled[:5]}")

    types: set[str] = set()
    token_count = 0
    premise_lengths = []
    hyp_lengths = []
    label_counts = {label: 0 for label in LABELS}
    overlaps_full: dict[str, list[float]] = {"all": [], **{l: [] for l in LABELS}}
    overlaps_lemma: dict[str, list[float]] = {"all": [], **{l: [] for l in LABELS}}
    agreements: dict[str, list[float]] = {"all": [], **{l: [] for l in LABELS}}
    overlap_excluded = 0

    for item in items:
        sentences = list(item.premises) + [item.hypothesis]
        for sent in sentences:
            types.update(sent.tokens)
            token_count += len(sent.tokens)
        premise_lengths.append(sum(len(p.tokens) for p in item.premises))
        hyp_lengths.append(len(item.hypothesis.tokens))
        label_counts[item.gold_label] += 1
        try:
            full = word_overlap(item.hypothesis, item.premises, "full")
            lemma = word_overlap(item.hypothesis, item.premises, "lemma")
        except OverlapUndefinedError:
            overlap_excluded += 1
        else:
            overlaps_full["all"].append(full)
            overlaps_full[item.gold_label].append(full)
            overlaps_lemma["all"].append(lemma)
            overlaps_lemma[item.gold_label].append(lemma)
        if item.judgments:
            agreement = sum(j == item.gold_label for j in item.judgments) / 5
            agreements["all"].append(agreement)
            agreements[item.gold_label].append(agreement)

    n = len(items)
    overall_agreement = agreements["all"]
    return StatsReport(
        item_count=n,
        type_count=len(types),
        token_count=token_count,
        premise_set_length=_moments(premise_lengths),
        hypothesis_length=_moments(hyp_lengths),
        label_distribution={label: label_counts[label] / n for label in LABELS},
        overlap_full={k: _moments(v) for k, v in overlaps_full.items()},
        overlap_lemma={k: _moments(v) for k, v in overlaps_lemma.items()},
        agreement_overall=(
            sum(overall_agreement) / len(overall_agreement)
            if overall_agreement
            else None
        ),
        agreement_by_label={
            label: (sum(vals) / len(vals) if vals else None)
            for label, vals in agreements.items()
            if label != "all"
        },
        overlap_excluded=overlap_excluded,
    )


# --- file formats ----------------------------------------------------------


def _header_line(fmt: str) -> str:
    return json.dumps({"format": fmt, "version": FORMAT_VERSION}, sort_keys=True)


def _check_header(path: Path, line: str, fmt: str) -> None:
    try:
        header = json.loads(line)
    except json.JSONDecodeError:
        raise ValueError(f"{path}:1: bad header line {line!r}") from None
    if not isinstance(header, dict) or header.get("format") != fmt:
        raise ValueError(f"{path}:1: expected format {fmt!r}, got {line!r}")
    if header.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}:1: unsupported version {header.get('version')!r}")


def save_items(items: Sequence[Item], path: str | Path) -> None:
    lines = [_header_line(ITEMS_FORMAT)]
    for item in items:
        lines.append(
            json.dumps(
                {
                    "id": item.id,
                    "scene_group_id": item.scene_group_id,
                    "premises": [p.raw for p in item.premises],
                    "hypothesis": item.hypothesis.raw,
                    "gold_label": item.gold_label,
                    "judgments": list(item.judgments),
                    "pair_labels": (
                        list(item.pair_labels) if item.pair_labels is not None else None
                    ),
                    "phenomenon_tags": sorted(item.phenomenon_tags),
                    "split": item.split,
                    "label_source": item.label_source,
                },
                sort_keys=True,
            )
        )
    _atomic_write(path, "\n".join(lines) + "\n")


def load_items(path: str | Path) -> list[Item]:
    """Read items, re-normalizing premise and hypothesis text on the way in."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty items file")
    _check_header(path, lines[0], ITEMS_FORMAT)
    items = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        try:
            rec = json.loads(line)
            items.append(
                Item(
                    id=rec["id"],
                    scene_group_id=rec["scene_group_id"],
                    premises=tuple(normalize(p) for p in rec["premises"]),
                    hypothesis=normalize(rec["hypothesis"]),
                    gold_label=rec["gold_label"],
                    judgments=tuple(rec["judgments"]),
                    pair_labels=(
                        tuple(rec["pair_labels"])
                        if rec["pair_labels"] is not None
                        else None
                    ),
                    phenomenon_tags=frozenset(rec["phenomenon_tags"]),
                    split=rec["split"],
                    label_source=rec["label_source"],
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: bad item record: {exc}") from None
    return items


def save_spe_pairs(pairs: Sequence[SpePair], path: str | Path) -> None:
    lines = [_header_line(SPE_FORMAT)]
    for pair in pairs:
        lines.append(
            json.dumps(
                {
                    "id": pair.id,
                    "premise": pair.premise.raw,
                    "hypothesis": pair.hypothesis.raw,
                    "label": pair.label,
                },
                sort_keys=True,
            )
        )
    _atomic_write(path, "\n".join(lines) + "\n")


def load_spe_pairs(path: str | Path) -> list[SpePair]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty pairs file")
    _check_header(path, lines[0], SPE_FORMAT)
    pairs = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        try:
            rec = json.loads(line)
            pairs.append(
                SpePair(
                    id=rec["id"],
                    premise=normalize(rec["premise"]),
                    hypothesis=normalize(rec["hypothesis"]),
                    label=rec["label"],
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}:{lineno}: bad pair record: {exc}") from None
    return pairs


def save_judgments(judgments: Mapping[str, Sequence[str]], path: str | Path) -> None:
    lines = [
        f"{item_id}\t{','.join(judgments[item_id])}" for item_id in sorted(judgments)
    ]
    _atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))


def load_judgments(path: str | Path) -> dict[str, tuple[str, ...]]:
    """Read `item_id<TAB>J,J,J,J,J` lines into an id -> judgments map."""
    path = Path(path)
    out: dict[str, tuple[str, ...]] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected id<TAB>labels, got {line!r}")
            item_id, labels_s = parts
            if item_id in out:
                raise ValueError(f"{path}:{lineno}: duplicate judgments for {item_id}")
            labels = tuple(labels_s.split(","))
            if len(labels) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 labels, got {len(labels)}")
            for label in labels:
                if label not in LABELS:
                    raise ValueError(f"{path}:{lineno}: bad label {label!r}")
            out[item_id] = labels
    return out


def save_decisions(decisions: Mapping[str, str], path: str | Path) -> None:
    lines = [f"{item_id}\t{decisions[item_id]}" for item_id in sorted(decisions)]
    _atomic_write(path, "\n".join(lines) + ("\n" if lines else ""))


def load_decisions(path: str | Path) -> dict[str, str]:
    """Read `item_id<TAB>label` adjudication decisions."""
    path = Path(path)
    out: dict[str, str] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected id<TAB>label, got {line!r}")
            item_id, label = parts
            if label not in LABELS:
                raise ValueError(f"{path}:{lineno}: bad label {label!r}")
            if item_id in out:
                raise ValueError(f"{path}:{lineno}: duplicate decision for {item_id}")
            out[item_id] = label
    return out
