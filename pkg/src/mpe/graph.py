"""Caption subsumption graph built from shallow reduction rules.

Every caption is lemmatized and expanded into its closure under six
reduction rules (drop determiner, drop adjectival modifier, drop
prepositional phrase, hypernym substitution, noun-phrase extraction; the
lemmatization itself is the entry step). Each rule application yields a
strictly more generic phrase, so closures are finite DAGs: ancestors of a
phrase are its generalizations. `simplify_hypothesis` returns the
generalizations of a source caption that cannot be reached from any premise,
which is the candidate pool for hypothesis generation.

The rules are shallow chunk patterns over closed-class lexicons, not a
parser; nodes are phrases in lemma space.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .text import Sentence, _read_word_list

_DATA_DIR = Path(__file__).parent / "data"

Phrase = tuple[str, ...]

# Small internal conjunction class: blocks modifier drops and bounds
# noun-phrase chunks, but is never dropped itself.
_CONJUNCTIONS = frozenset({"and", "or", "but", "nor", "while", "as", "then"})

GRAPH_FORMAT = "mpe-graph"
GRAPH_VERSION = 1


class UnknownCaptionError(KeyError):
    """Raised when a caption was never indexed into the graph."""


class LexiconCycleError(ValueError):
    """Raised when the hypernym lexicon contains a cycle."""


def _load_hypernyms(path: Path) -> dict[str, tuple[str, ...]]:
    table: dict[str, list[str]] = {}
    for line in _read_word_list(path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"bad hypernym entry (want specific<TAB>general): {line!r}")
        specific, general = parts
        table.setdefault(specific, [])
        if general not in table[specific]:
            table[specific].append(general)
    return {k: tuple(sorted(v)) for k, v in table.items()}


def _check_acyclic(hypernyms: Mapping[str, tuple[str, ...]]) -> None:
    WHITE, GRAY, BLACK = 0, 1, 2
    color: dict[str, int] = {}

    def visit(tok: str, trail: list[str]) -> None:
        color[tok] = GRAY
        trail.append(tok)
        for parent in hypernyms.get(tok, ()):
            c = color.get(parent, WHITE)
            if c == GRAY:
                cycle = trail[trail.index(parent):] + [parent]
                raise LexiconCycleError(" -> ".join(cycle))
            if c == WHITE:
                visit(parent, trail)
        trail.pop()
        color[tok] = BLACK

    for tok in sorted(hypernyms):
        if color.get(tok, WHITE) == WHITE:
            visit(tok, [])


def _check_edge_dag(parents: Mapping[int, set[int]]) -> None:
    """Reject cyclic edge sets (only possible in hand-edited graph files)."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color: dict[int, int] = {}

    def visit(nid: int) -> None:
        color[nid] = GRAY
        for parent in parents.get(nid, ()):
            c = color.get(parent, WHITE)
            if c == GRAY:
                raise ValueError(f"graph contains a cycle through node {parent}")
            if c == WHITE:
                visit(parent)
        color[nid] = BLACK

    for nid in sorted(parents):
        if color.get(nid, WHITE) == WHITE:
            visit(nid)


@dataclass(frozen=True)
class ReductionRuleSet:
    """Closed-class lexicons driving the reduction rules."""

    determiners: frozenset[str]
    adjectives: frozenset[str]
    prepositions: frozenset[str]
    hypernyms: Mapping[str, tuple[str, ...]]

    def __post_init__(self) -> None:
        _check_acyclic(self.hypernyms)

    @classmethod
    def default(cls) -> "ReductionRuleSet":
        return cls(
            determiners=frozenset(_read_word_list(_DATA_DIR / "determiners.txt")),
            adjectives=frozenset(_read_word_list(_DATA_DIR / "adjectives.txt")),
            prepositions=frozenset(_read_word_list(_DATA_DIR / "prepositions.txt")),
            hypernyms=_load_hypernyms(_DATA_DIR / "hypernyms.txt"),
        )

    def _is_content(self, tok: str) -> bool:
        return (
            tok not in self.determiners
            and tok not in self.adjectives
            and tok not in self.prepositions
            and tok not in _CONJUNCTIONS
        )

    def _droppable_adjective(self, phrase: Phrase, i: int) -> bool:
        if phrase[i] not in self.adjectives:
            return False
        j = i + 1
        while j < len(phrase) and phrase[j] in self.adjectives:
            j += 1
        return j < len(phrase) and self._is_content(phrase[j])

    def _pp_span(self, phrase: Phrase, i: int) -> int:
        """End index (exclusive) of the prepositional phrase starting at i."""
        j = i + 1
        while j < len(phrase) and (
            phrase[j] in self.determiners or phrase[j] in self.adjectives
        ):
            j += 1
        if j < len(phrase) and self._is_content(phrase[j]):
            j += 1
        return j

    def _noun_chunks(self, phrase: Phrase) -> list[Phrase]:
        chunks: list[Phrase] = []
        start = None
        for idx in range(len(phrase) + 1):
            boundary = idx == len(phrase) or (
                phrase[idx] in self.prepositions or phrase[idx] in _CONJUNCTIONS
            )
            if boundary:
                if start is not None:
                    chunk = phrase[start:idx]
                    if any(self._is_content(t) for t in chunk):
                        chunks.append(chunk)
                    start = None
            elif start is None:
                start = idx
        return chunks

    def single_step(self, phrase: Phrase) -> set[Phrase]:
        """All phrases reachable by one rule application.

        Every result is strictly shorter than `phrase` or an equal-length
        hypernym substitution, so repeated application terminates.
        """
        out: set[Phrase] = set()
        n = len(phrase)
        for i, tok in enumerate(phrase):
            if tok in self.determiners and n > 1:
                out.add(phrase[:i] + phrase[i + 1:])
            if self._droppable_adjective(phrase, i):
                out.add(phrase[:i] + phrase[i + 1:])
            if tok in self.prepositions:
                j = self._pp_span(phrase, i)
                if j - i < n:
                    out.add(phrase[:i] + phrase[j:])
            for general in self.hypernyms.get(tok, ()):
                out.add(phrase[:i] + (general,) + phrase[i + 1:])
        for chunk in self._noun_chunks(phrase):
            if 0 < len(chunk) < n:
                out.add(chunk)
        out.discard(phrase)
        out.discard(())
        return out


def apply_reductions(caption: Sentence, rules: ReductionRuleSet) -> set[Phrase]:
    """Closure of the lemmatized caption under the reduction rules."""
    start = tuple(caption.lemmas)
    seen = {start}
    stack = [start]
    while stack:
        phrase = stack.pop()
        for nxt in rules.single_step(phrase):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


@dataclass(frozen=True)
class PhraseNode:
    """One phrase in the subsumption graph.

    support holds the scene group ids whose captions reduce to this phrase;
    caption_count is the number of individual captions that do (a group
    contributes once per caption, so caption_count >= len(support)).
    """

    id: int
    phrase: Phrase
    support: frozenset[str]
    caption_count: int

    def __post_init__(self) -> None:
        if not self.phrase:
            raise ValueError(f"node {self.id}: empty phrase")
        if not self.support:
            raise ValueError(f"node {self.id}: empty support")
        if self.caption_count < len(self.support):
            raise ValueError(
                f"node {self.id}: caption_count {self.caption_count} < "
                f"{len(self.support)} supporting groups"
            )


class PhraseGraph:
    """Subsumption DAG over caption phrases.

    Edges point parent -> child where the parent is strictly more generic;
    only the transitive reduction is stored. `ancestors` walks toward the
    generic end.
    """

    def __init__(
        self,
        nodes: dict[int, PhraseNode],
        parents: dict[int, tuple[int, ...]],
        caption_index: dict[str, int],
    ):
        self.nodes = nodes
        self._parents = parents
        self.caption_index = caption_index
        self._phrase_ids = {node.phrase: nid for nid, node in nodes.items()}
        self._ancestor_cache: dict[int, frozenset[int]] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def edges(self) -> list[tuple[int, int]]:
        out = []
        for child in sorted(self._parents):
            for parent in self._parents[child]:
                out.append((parent, child))
        return sorted(out)

    def parents(self, node_id: int) -> tuple[int, ...]:
        return self._parents.get(node_id, ())

    def phrase(self, node_id: int) -> Phrase:
        return self.nodes[node_id].phrase

    def node_id_for_phrase(self, phrase: Phrase) -> int | None:
        return self._phrase_ids.get(tuple(phrase))

    def node_for_caption(self, caption: "Sentence | str") -> int:
        raw = caption.raw if isinstance(caption, Sentence) else caption
        try:
            return self.caption_index[raw]
        except KeyError:
            raise UnknownCaptionError(f"caption not indexed in graph: {raw!r}") from None

    def ancestors(self, node_id: int) -> frozenset[int]:
        """All strictly more generic nodes reachable from node_id."""
        cached = self._ancestor_cache.get(node_id)
        if cached is not None:
            return cached
        # Iterative DFS with memoization; post-order so parents resolve first.
        stack = [(node_id, False)]
        while stack:
            nid, expanded = stack.pop()
            if nid in self._ancestor_cache:
                continue
            if expanded:
                acc: set[int] = set()
                for p in self._parents.get(nid, ()):
                    acc.add(p)
                    acc |= self._ancestor_cache[p]
                self._ancestor_cache[nid] = frozenset(acc)
            else:
                stack.append((nid, True))
                for p in self._parents.get(nid, ()):
                    if p not in self._ancestor_cache:
                        stack.append((p, False))
        return self._ancestor_cache[node_id]

    def save(self, path: str | Path) -> None:
        lines = [f"{GRAPH_FORMAT}\t{GRAPH_VERSION}"]
        for nid in sorted(self.nodes):
            node = self.nodes[nid]
            support = ",".join(sorted(node.support))
            lines.append(
                f"node\t{nid}\t{' '.join(node.phrase)}\t{support}\t{node.caption_count}"
            )
        for parent, child in self.edges:
            lines.append(f"edge\t{parent}\t{child}")
        for raw in sorted(self.caption_index):
            lines.append(f"caption\t{self.caption_index[raw]}\t{raw}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PhraseGraph":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines:
            raise ValueError(f"{path}: empty graph file")
        header = lines[0].split("\t")
        if len(header) != 2 or header[0] != GRAPH_FORMAT:
            raise ValueError(f"{path}:1: bad header {lines[0]!r}")
        if int(header[1]) != GRAPH_VERSION:
            raise ValueError(f"{path}:1: unsupported version {header[1]}")
        nodes: dict[int, PhraseNode] = {}
        parents: dict[int, set[int]] = {}
        caption_index: dict[str, int] = {}
        for lineno, line in enumerate(lines[1:], start=2):
            if not line:
                continue
            kind, _, rest = line.partition("\t")
            if kind == "node":
                nid_s, phrase_s, support_s, count_s = rest.split("\t")
                nid = int(nid_s)
                support = frozenset(support_s.split(",")) if support_s else frozenset()
                nodes[nid] = PhraseNode(
                    id=nid,
                    phrase=tuple(phrase_s.split(" ")),
                    support=support,
                    caption_count=int(count_s),
                )
            elif kind == "edge":
                parent_s, child_s = rest.split("\t")
                parents.setdefault(int(child_s), set()).add(int(parent_s))
            elif kind == "caption":
                nid_s, _, raw = rest.partition("\t")
                caption_index[raw] = int(nid_s)
            else:
                raise ValueError(f"{path}:{lineno}: unknown record kind {kind!r}")
        for child, ps in parents.items():
            unknown = (ps | {child}) - nodes.keys()
            if unknown:
                raise ValueError(f"{path}: edge references unknown node {sorted(unknown)}")
        _check_edge_dag(parents)
        return cls(
            nodes=nodes,
            parents={c: tuple(sorted(p)) for c, p in parents.items()},
            caption_index=caption_index,
        )


def _transitive_reduction(
    step_parents: dict[int, set[int]],
) -> dict[int, tuple[int, ...]]:
    """Drop edges implied by longer derivation paths (reachability preserved)."""
    full: dict[int, frozenset[int]] = {}

    def ancestors(nid: int) -> frozenset[int]:
        stack = [(nid, False)]
        while stack:
            cur, expanded = stack.pop()
            if cur in full:
                continue
            if expanded:
                acc: set[int] = set()
                for p in step_parents.get(cur, ()):
                    acc.add(p)
                    acc |= full[p]
                full[cur] = frozenset(acc)
            else:
                stack.append((cur, True))
                for p in step_parents.get(cur, ()):
                    if p not in full:
                        stack.append((p, False))
        return full[nid]

    reduced: dict[int, tuple[int, ...]] = {}
    for child in sorted(step_parents):
        direct = step_parents[child]
        kept = []
        for parent in sorted(direct):
            implied = any(
                parent in ancestors(mid) for mid in direct if mid != parent
            )
            if not implied:
                kept.append(parent)
        if kept:
            reduced[child] = tuple(kept)
    return reduced


def build_graph(
    captions: Iterable[tuple[str, Sentence]],
    rules: ReductionRuleSet | None = None,
) -> PhraseGraph:
    """Union of reduction closures over (scene_group_id, caption) pairs.

    A node's support is the set of scene group ids whose captions reach it;
    caption_count is the number of captions (not groups) that reach it.
    """
    rules = rules if rules is not None else ReductionRuleSet.default()
    captions = list(captions)
    if not captions:
        raise ValueError("build_graph needs at least one caption")
    expansion: dict[Phrase, set[Phrase]] = {}

    def expand(phrase: Phrase) -> set[Phrase]:
        cached = expansion.get(phrase)
        if cached is None:
            cached = rules.single_step(phrase)
            expansion[phrase] = cached
        return cached

    supports: dict[Phrase, set[str]] = {}
    caption_counts: dict[Phrase, int] = {}
    caption_starts: dict[str, Phrase] = {}

    for gid, sentence in captions:
        start = tuple(sentence.lemmas)
        caption_starts[sentence.raw] = start
        closure = {start}
        stack = [start]
        while stack:
            phrase = stack.pop()
            for nxt in expand(phrase):
                if nxt not in closure:
                    closure.add(nxt)
                    stack.append(nxt)
        for phrase in closure:
            supports.setdefault(phrase, set()).add(gid)
            caption_counts[phrase] = caption_counts.get(phrase, 0) + 1

    phrase_ids = {phrase: nid for nid, phrase in enumerate(sorted(supports))}
    step_parents: dict[int, set[int]] = {}
    for phrase, nid in phrase_ids.items():
        for nxt in expand(phrase):
            step_parents.setdefault(nid, set()).add(phrase_ids[nxt])

    nodes = {
        nid: PhraseNode(
            id=nid,
            phrase=phrase,
            support=frozenset(supports[phrase]),
            caption_count=caption_counts[phrase],
        )
        for phrase, nid in phrase_ids.items()
    }
    caption_index = {raw: phrase_ids[start] for raw, start in caption_starts.items()}
    return PhraseGraph(
        nodes=nodes,
        parents=_transitive_reduction(step_parents),
        caption_index=caption_index,
    )


def simplify_hypothesis(
    source_caption: "Sentence | str",
    premises: Sequence["Sentence | str"],
    graph: PhraseGraph,
) -> list[Phrase]:
    """Generalizations of the source that no premise also generalizes to.

    Returns ancestors(source) minus the union of every premise's ancestors:
    the candidate hypotheses that cannot be reproduced from a premise by the
    same reduction rules. Never contains the source caption itself. Sorted
    (set semantics, stable order) for downstream sampling.
    """
    source_id = graph.node_for_caption(source_caption)
    candidates = set(graph.ancestors(source_id))
    for premise in premises:
        candidates -= graph.ancestors(graph.node_for_caption(premise))
    return sorted(graph.phrase(nid) for nid in candidates)
