"""Reduction rules, closure, graph construction, and hypothesis candidates."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpe.graph import (
    LexiconCycleError,
    PhraseGraph,
    PhraseNode,
    ReductionRuleSet,
    UnknownCaptionError,
    apply_reductions,
    build_graph,
    simplify_hypothesis,
)
from mpe.text import normalize


def tiny_rules(**overrides):
    base = dict(
        determiners=frozenset({"a", "an", "the", "two"}),
        adjectives=frozenset({"red", "big", "blue", "young", "small"}),
        prepositions=frozenset({"in", "on", "with", "near"}),
        hypernyms={
            "girl": ("child",),
            "boy": ("child",),
            "child": ("person",),
            "man": ("person",),
            "dog": ("animal",),
        },
    )
    base.update(overrides)
    return ReductionRuleSet(**base)


def closure_of(phrase, rules):
    """Brute-force closure by repeated single steps (test-side oracle)."""
    seen = {tuple(phrase)}
    frontier = [tuple(phrase)]
    while frontier:
        nxt = set()
        for p in frontier:
            nxt |= rules.single_step(p)
        frontier = [p for p in nxt if p not in seen]
        seen |= set(frontier)
    return seen


class TestSingleStep:
    def test_drop_determiner(self):
        out = tiny_rules().single_step(("a", "dog", "run"))
        assert ("dog", "run") in out

    def test_lone_determiner_not_dropped_to_empty(self):
        out = tiny_rules().single_step(("the",))
        assert out == set()

    def test_drop_adjective_before_noun(self):
        out = tiny_rules().single_step(("big", "dog"))
        assert ("dog",) in out

    def test_drop_adjective_through_adjective_run(self):
        out = tiny_rules().single_step(("big", "red", "dog"))
        assert ("red", "dog") in out
        assert ("big", "dog") in out

    def test_trailing_adjective_kept(self):
        # Predicate position: no following noun to modify.
        out = tiny_rules().single_step(("dog", "is", "red"))
        assert ("dog", "is") not in out

    def test_adjective_before_conjunction_kept(self):
        out = tiny_rules().single_step(("red", "and", "blue"))
        assert ("and", "blue") not in out

    def test_drop_prepositional_phrase(self):
        out = tiny_rules().single_step(("dog", "run", "in", "the", "park"))
        assert ("dog", "run") in out

    def test_pp_chunk_includes_det_adj_run(self):
        out = tiny_rules().single_step(("man", "in", "a", "big", "red", "hat", "smile"))
        assert ("man", "smile") in out

    def test_pp_covering_whole_phrase_not_dropped(self):
        out = tiny_rules().single_step(("in", "the", "park"))
        assert () not in out
        assert all(p for p in out)

    def test_pp_chunk_stops_at_conjunction(self):
        out = tiny_rules().single_step(("look", "in", "and", "wave"))
        assert ("look", "and", "wave") in out

    def test_hypernym_substitution(self):
        out = tiny_rules().single_step(("girl", "run"))
        assert ("child", "run") in out

    def test_hypernym_substitutes_each_position(self):
        out = tiny_rules().single_step(("girl", "watch", "girl"))
        assert ("child", "watch", "girl") in out
        assert ("girl", "watch", "child") in out

    def test_noun_phrase_extraction(self):
        out = tiny_rules().single_step(("a", "dog", "in", "the", "park"))
        assert ("a", "dog") in out
        assert ("the", "park") in out

    def test_whole_phrase_chunk_not_reemitted(self):
        out = tiny_rules().single_step(("a", "dog"))
        assert ("a", "dog") not in out

    def test_chunk_without_content_not_emitted(self):
        out = tiny_rules().single_step(("the", "and", "red"))
        assert ("the",) not in out
        assert ("red",) not in out
        assert out == {("and", "red")}

    def test_conjunction_splits_chunks(self):
        out = tiny_rules().single_step(("dog", "and", "cat"))
        assert ("dog",) in out
        assert ("cat",) in out

    def test_results_never_longer(self):
        phrase = ("two", "young", "girl", "in", "a", "red", "dress", "dance")
        for p in tiny_rules().single_step(phrase):
            assert 0 < len(p) <= len(phrase)

    def test_no_self_loop(self):
        phrase = ("girl", "run")
        assert phrase not in tiny_rules().single_step(phrase)


class TestLexiconValidation:
    def test_cycle_rejected(self):
        with pytest.raises(LexiconCycleError):
            tiny_rules(hypernyms={"a": ("b",), "b": ("a",)})

    def test_self_loop_rejected(self):
        with pytest.raises(LexiconCycleError):
            tiny_rules(hypernyms={"dog": ("dog",)})

    def test_diamond_accepted(self):
        tiny_rules(hypernyms={"a": ("b", "c"), "b": ("d",), "c": ("d",)})

    def test_default_lexicons_load(self):
        rules = ReductionRuleSet.default()
        assert "the" in rules.determiners
        assert "in" in rules.prepositions
        assert rules.hypernyms["girl"] == ("child",)


class TestApplyReductions:
    def test_fixpoint_caption_closure_is_singleton(self):
        sent = normalize("Children sleep soundly.")
        rules = tiny_rules(hypernyms={})
        assert apply_reductions(sent, rules) == {tuple(sent.lemmas)}

    def test_closure_includes_start(self):
        sent = normalize("A girl runs.")
        assert tuple(sent.lemmas) in apply_reductions(sent, tiny_rules())

    def test_hand_enumerated_closure(self):
        sent = normalize("A girl runs.")
        got = apply_reductions(sent, tiny_rules())
        assert got == {
            ("a", "girl", "run"),
            ("girl", "run"),
            ("a", "child", "run"),
            ("child", "run"),
            ("a", "person", "run"),
            ("person", "run"),
        }

    def test_pp_drop_lineage(self):
        sent = normalize("a man in a red hat runs")
        got = apply_reductions(sent, ReductionRuleSet.default())
        assert ("a", "man", "run") in got
        assert ("man", "run") in got

    def test_hypernym_lineage(self):
        sent = normalize("girl in a blue sweater painting")
        got = apply_reductions(sent, ReductionRuleSet.default())
        assert ("child", "painting") in got

    def test_matches_breadth_first_oracle(self):
        rules = tiny_rules()
        for raw in [
            "Two young girls in red dresses dance on a stage.",
            "A man with a dog runs in the park.",
            "The small boy smiles.",
        ]:
            sent = normalize(raw)
            assert apply_reductions(sent, rules) == closure_of(sent.lemmas, rules)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(
            st.sampled_from(
                "a the two red big girl boy dog park run smile in on and".split()
            ),
            min_size=1,
            max_size=6,
        )
    )
    def test_closure_phrases_nonempty_and_never_longer(self, tokens):
        rules = tiny_rules()
        sent = normalize(" ".join(tokens))
        for phrase in apply_reductions(sent, rules):
            assert 0 < len(phrase) <= len(sent.lemmas)


def build_fixture_graph():
    captions = [
        ("g1", normalize("A girl runs.")),
        ("g1", normalize("A young girl is running.")),
        ("g2", normalize("A boy runs.")),
    ]
    return build_graph(captions, tiny_rules()), captions


class TestBuildGraph:
    def test_single_fixpoint_caption(self):
        graph = build_graph(
            [("g1", normalize("Children sleep soundly."))], tiny_rules(hypernyms={})
        )
        assert len(graph) == 1
        assert graph.edges == []
        only = next(iter(graph.nodes.values()))
        assert only.support == {"g1"}
        assert only.caption_count == 1

    def test_node_set_is_union_of_closures(self):
        graph, captions = build_fixture_graph()
        rules = tiny_rules()
        expected = set()
        for _, sent in captions:
            expected |= closure_of(sent.lemmas, rules)
        assert {n.phrase for n in graph.nodes.values()} == expected

    def test_shared_ancestor_supports_both_groups(self):
        graph, _ = build_fixture_graph()
        nid = graph.node_id_for_phrase(("child", "run"))
        assert nid is not None
        node = graph.nodes[nid]
        assert node.support == {"g1", "g2"}
        # Reached by the girl-run and boy-run captions. The young-girl caption
        # keeps its copula token, so its reductions never hit this phrase.
        assert node.caption_count == 2

    def test_entry_node_counts_own_caption(self):
        graph, _ = build_fixture_graph()
        nid = graph.node_for_caption("A girl runs.")
        assert graph.phrase(nid) == ("a", "girl", "run")
        assert graph.nodes[nid].support == {"g1"}

    def test_caption_index_covers_all_captions(self):
        graph, captions = build_fixture_graph()
        assert set(graph.caption_index) == {sent.raw for _, sent in captions}

    def test_every_edge_derivable_by_one_step(self):
        graph, _ = build_fixture_graph()
        rules = tiny_rules()
        for parent, child in graph.edges:
            assert graph.phrase(parent) in rules.single_step(graph.phrase(child))

    def test_acyclic(self):
        graph, _ = build_fixture_graph()
        for nid in graph.nodes:
            assert nid not in graph.ancestors(nid)

    def test_node_ids_independent_of_caption_order(self):
        captions = [
            ("g1", normalize("A girl runs.")),
            ("g1", normalize("A young girl is running.")),
            ("g2", normalize("A boy runs.")),
        ]
        g1 = build_graph(captions, tiny_rules())
        g2 = build_graph(list(reversed(captions)), tiny_rules())
        assert {n.id: n.phrase for n in g1.nodes.values()} == {
            n.id: n.phrase for n in g2.nodes.values()
        }
        assert g1.edges == g2.edges


def brute_force_ancestors(graph, nid):
    out = set()
    stack = [nid]
    while stack:
        cur = stack.pop()
        for parent in graph.parents(cur):
            if parent not in out:
                out.add(parent)
                stack.append(parent)
    return out


class TestAncestors:
    def test_memoized_equals_brute_force(self):
        graph, _ = build_fixture_graph()
        for nid in graph.nodes:
            assert graph.ancestors(nid) == brute_force_ancestors(graph, nid)

    def test_never_contains_self(self):
        graph, _ = build_fixture_graph()
        for nid in graph.nodes:
            assert nid not in graph.ancestors(nid)

    def test_transitive_reduction_preserves_reachability(self):
        captions = [
            ("g1", normalize("A girl runs.")),
            ("g1", normalize("A young girl is running.")),
            ("g2", normalize("A boy runs in the park.")),
        ]
        rules = tiny_rules()
        graph = build_graph(captions, rules)
        # Raw reachability: closure of single-step over each node's phrase.
        for nid, node in graph.nodes.items():
            raw = closure_of(node.phrase, rules) - {node.phrase}
            via_edges = {graph.phrase(a) for a in graph.ancestors(nid)}
            assert via_edges == raw

    def test_no_redundant_edges(self):
        graph, _ = build_fixture_graph()
        for parent, child in graph.edges:
            others = set(graph.parents(child)) - {parent}
            assert not any(parent in graph.ancestors(mid) for mid in others)


class TestSimplifyHypothesis:
    def test_premise_ancestors_excluded(self):
        graph, _ = build_fixture_graph()
        got = simplify_hypothesis("A girl runs.", ["A boy runs."], graph)
        # Shared generalizations (child run / person run lineages) are excluded;
        # girl-specific ones survive.
        assert ("girl", "run") in got
        assert ("child", "run") not in got
        assert ("person", "run") not in got
        assert all("boy" not in p for p in got)

    def test_source_itself_never_returned(self):
        graph, _ = build_fixture_graph()
        got = simplify_hypothesis("A girl runs.", [], graph)
        assert ("a", "girl", "run") not in got

    def test_no_premises_returns_all_ancestors(self):
        graph, _ = build_fixture_graph()
        got = simplify_hypothesis("A girl runs.", [], graph)
        nid = graph.node_for_caption("A girl runs.")
        assert set(got) == {graph.phrase(a) for a in graph.ancestors(nid)}

    def test_full_exclusion_yields_empty(self):
        graph, _ = build_fixture_graph()
        got = simplify_hypothesis(
            "A girl runs.", ["A girl runs.", "A boy runs."], graph
        )
        # The identical premise removes every shared ancestor.
        assert got == []

    def test_candidates_not_ancestors_of_any_premise(self):
        graph, _ = build_fixture_graph()
        premises = ["A boy runs.", "A young girl is running."]
        got = simplify_hypothesis("A girl runs.", premises, graph)
        for premise in premises:
            pid = graph.node_for_caption(premise)
            ancestor_phrases = {graph.phrase(a) for a in graph.ancestors(pid)}
            assert not set(got) & ancestor_phrases

    def test_accepts_sentence_objects(self):
        graph, _ = build_fixture_graph()
        got = simplify_hypothesis(
            normalize("A girl runs."), [normalize("A boy runs.")], graph
        )
        assert got == simplify_hypothesis("A girl runs.", ["A boy runs."], graph)

    def test_unknown_caption_raises(self):
        graph, _ = build_fixture_graph()
        with pytest.raises(UnknownCaptionError):
            simplify_hypothesis("Never indexed.", [], graph)
        with pytest.raises(UnknownCaptionError):
            simplify_hypothesis("A girl runs.", ["Never indexed."], graph)

    def test_sorted_and_duplicate_free(self):
        graph, _ = build_fixture_graph()
        got = simplify_hypothesis("A young girl is running.", ["A boy runs."], graph)
        assert got == sorted(set(got))


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        graph, _ = build_fixture_graph()
        path = tmp_path / "fixture.graph"
        graph.save(path)
        loaded = PhraseGraph.load(path)
        assert {n.id: n for n in loaded.nodes.values()} == {
            n.id: n for n in graph.nodes.values()
        }
        assert loaded.edges == graph.edges
        assert loaded.caption_index == graph.caption_index

    def test_saved_bytes_deterministic(self, tmp_path):
        g1, _ = build_fixture_graph()
        g2, _ = build_fixture_graph()
        p1, p2 = tmp_path / "a.graph", tmp_path / "b.graph"
        g1.save(p1)
        g2.save(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.graph"
        path.write_text("something-else\t1\n")
        with pytest.raises(ValueError, match="bad header"):
            PhraseGraph.load(path)

    def test_unknown_version_rejected(self, tmp_path):
        path = tmp_path / "bad.graph"
        path.write_text("mpe-graph\t99\n")
        with pytest.raises(ValueError, match="version"):
            PhraseGraph.load(path)

    def test_dangling_edge_rejected(self, tmp_path):
        path = tmp_path / "bad.graph"
        path.write_text(
            "mpe-graph\t1\nnode\t0\tdog run\tg1\t1\nedge\t5\t0\n"
        )
        with pytest.raises(ValueError, match="unknown node"):
            PhraseGraph.load(path)

    def test_cyclic_file_rejected(self, tmp_path):
        path = tmp_path / "bad.graph"
        path.write_text(
            "mpe-graph\t1\n"
            "node\t0\tdog run\tg1\t1\n"
            "node\t1\tanimal run\tg1\t1\n"
            "edge\t1\t0\nedge\t0\t1\n"
        )
        with pytest.raises(ValueError, match="cycle"):
            PhraseGraph.load(path)


class TestPhraseNodeValidation:
    def test_empty_phrase_rejected(self):
        with pytest.raises(ValueError, match="empty phrase"):
            PhraseNode(id=0, phrase=(), support=frozenset({"g"}), caption_count=1)

    def test_empty_support_rejected(self):
        with pytest.raises(ValueError, match="empty support"):
            PhraseNode(id=0, phrase=("dog",), support=frozenset(), caption_count=1)

    def test_count_below_group_count_rejected(self):
        with pytest.raises(ValueError, match="caption_count"):
            PhraseNode(
                id=0, phrase=("dog",), support=frozenset({"a", "b"}), caption_count=1
            )
