"""Entailment classifiers over the autodiff core.

Three architectures share one recipe: a premise LSTM whose final cell state
seeds a hypothesis LSTM, and a small feedforward head over the resulting
sentence vectors producing three logits (entailment, neutral, contradiction).

- ConditionalLstmModel reads the premise text as one sequence.
- AttentionModel adds word-by-word attention over premise positions with a
  recurrently updated attention memory.
- SumOfExpertsModel applies a shared conditional core to each premise
  separately and sums the per-premise logits in a canonical order, which
  makes the output bitwise invariant under premise reordering.

All weights are float64 tensors named for checkpointing.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .autodiff import (
    Tensor,
    add,
    concat,
    dropout,
    flatten,
    load_checkpoint,
    lookup,
    matmul,
    mul,
    save_checkpoint,
    sigmoid,
    softmax,
    tanh,
    transpose,
)

UNK_TOKEN = "<unk>"
SEPARATOR = "<sep>"

INIT_SCALE = 0.1
FORGET_BIAS = 1.0


def concat_premises(
    premises: Sequence[Sequence[str]], separator: str = SEPARATOR
) -> list[str]:
    """Join premise token sequences in order, one separator between each."""
    if not premises:
        raise ValueError("need at least one premise")
    joined: list[str] = []
    for i, premise in enumerate(premises):
        if i:
            joined.append(separator)
        joined.extend(premise)
    return joined


class EmbeddingTable:
    """Token embeddings: a vocabulary matrix plus always-trainable rows for
    the unknown token and the premise separator."""

    def __init__(
        self,
        vocab: Mapping[str, int],
        main: Tensor,
        special: Tensor,
        trainable: bool,
    ):
        if main.values.ndim != 2:
            raise ValueError(f"embedding matrix must be 2-d, got {main.shape}")
        rows, dim = main.values.shape
        if special.values.shape != (2, dim):
            raise ValueError(
                f"special rows must have shape (2, {dim}), got {special.values.shape}"
            )
        if len(vocab) != rows or sorted(vocab.values()) != list(range(rows)):
            raise ValueError("vocabulary must map tokens onto rows 0..V-1 exactly")
        if UNK_TOKEN in vocab or SEPARATOR in vocab:
            raise ValueError("reserved tokens cannot appear in the vocabulary")
        self.vocab = dict(vocab)
        self.main = main
        self.special = special
        self.trainable = trainable

    @property
    def dim(self) -> int:
        return self.main.values.shape[1]

    @classmethod
    def random(
        cls,
        tokens: Sequence[str],
        dim: int,
        rng: np.random.Generator,
        trainable: bool = True,
    ) -> "EmbeddingTable":
        ordered = sorted({t for t in tokens if t not in (UNK_TOKEN, SEPARATOR)})
        vocab = {token: i for i, token in enumerate(ordered)}
        main = Tensor(
            rng.normal(scale=INIT_SCALE, size=(len(ordered), dim)),
            watched=trainable,
            name="embeddings.main",
        )
        special = Tensor(
            rng.normal(scale=INIT_SCALE, size=(2, dim)),
            watched=True,
            name="embeddings.special",
        )
        return cls(vocab, main, special, trainable)

    @classmethod
    def from_vectors(
        cls,
        vectors: Mapping[str, Sequence[float]],
        rng: np.random.Generator,
        trainable: bool = False,
    ) -> "EmbeddingTable":
        ordered = sorted(t for t in vectors if t not in (UNK_TOKEN, SEPARATOR))
        if not ordered:
            raise ValueError("no vectors supplied")
        dim = len(vectors[ordered[0]])
        matrix = np.empty((len(ordered), dim))
        for i, token in enumerate(ordered):
            row = np.asarray(vectors[token], dtype=np.float64)
            if row.shape != (dim,):
                raise ValueError(
                    f"vector for {token!r} has length {row.shape[0]}, expected {dim}"
                )
            matrix[i] = row
        vocab = {token: i for i, token in enumerate(ordered)}
        main = Tensor(matrix, watched=trainable, name="embeddings.main")
        special = Tensor(
            rng.normal(scale=INIT_SCALE, size=(2, dim)),
            watched=True,
            name="embeddings.special",
        )
        return cls(vocab, main, special, trainable)

    def embed(self, tokens: Sequence[str]) -> list[Tensor]:
        """One (1, dim) row per token; unknown words share the UNK row."""
        if not tokens:
            raise ValueError("cannot embed an empty token sequence")
        rows = []
        for token in tokens:
            if token == SEPARATOR:
                rows.append(lookup(self.special, [1]))
            elif token in self.vocab:
                rows.append(lookup(self.main, [self.vocab[token]]))
            else:
                rows.append(lookup(self.special, [0]))
        return rows

    def params(self) -> list[Tensor]:
        return [self.main, self.special] if self.trainable else [self.special]

    def all_tensors(self) -> dict[str, Tensor]:
        return {self.main.name: self.main, self.special.name: self.special}


def load_pretrained_vectors(path: str | Path) -> dict[str, list[float]]:
    """Parse a text file of `token v1 .. vd` lines into a vector table."""
    path = Path(path)
    vectors: dict[str, list[float]] = {}
    dim: int | None = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                raise ValueError(f"{path}:{lineno}: malformed vector line")
            token = parts[0]
            try:
                values = [float(v) for v in parts[1:]]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric component") from None
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise ValueError(
                    f"{path}:{lineno}: expected {dim} components, got {len(values)}"
                )
            if token in vectors:
                raise ValueError(f"{path}:{lineno}: duplicate token {token!r}")
            vectors[token] = values
    if not vectors:
        raise ValueError(f"{path}: no vectors found")
    return vectors


class LstmCell:
    """One LSTM layer's weights: input/forget/output gates and candidate."""

    GATES = ("input", "forget", "output", "candidate")

    def __init__(
        self,
        tensors: dict[str, Tensor],
        input_dim: int,
        state_dim: int,
        prefix: str,
    ):
        self.tensors = tensors
        self.input_dim = input_dim
        self.state_dim = state_dim
        self.prefix = prefix

    @classmethod
    def random(
        cls, input_dim: int, state_dim: int, rng: np.random.Generator, prefix: str
    ) -> "LstmCell":
        tensors: dict[str, Tensor] = {}
        for gate in cls.GATES:
            for suffix, shape in (
                ("Wx", (input_dim, state_dim)),
                ("Wh", (state_dim, state_dim)),
            ):
                name = f"{prefix}.{gate}.{suffix}"
                tensors[name] = Tensor(
                    rng.normal(scale=INIT_SCALE, size=shape), watched=True, name=name
                )
            bias = np.zeros(state_dim)
            if gate == "forget":
                bias += FORGET_BIAS
            name = f"{prefix}.{gate}.b"
            tensors[name] = Tensor(bias, watched=True, name=name)
        return cls(tensors, input_dim, state_dim, prefix)

    def _gate(self, gate: str, x: Tensor, h: Tensor) -> Tensor:
        wx = self.tensors[f"{self.prefix}.{gate}.Wx"]
        wh = self.tensors[f"{self.prefix}.{gate}.Wh"]
        b = self.tensors[f"{self.prefix}.{gate}.b"]
        return add(add(matmul(x, wx), matmul(h, wh)), b)

    def step(self, x: Tensor, h_prev: Tensor, c_prev: Tensor) -> tuple[Tensor, Tensor]:
        i = sigmoid(self._gate("input", x, h_prev))
        f = sigmoid(self._gate("forget", x, h_prev))
        o = sigmoid(self._gate("output", x, h_prev))
        g = tanh(self._gate("candidate", x, h_prev))
        c = add(mul(f, c_prev), mul(i, g))
        h = mul(o, tanh(c))
        return h, c

    def params(self) -> list[Tensor]:
        return [self.tensors[name] for name in sorted(self.tensors)]


def _zero_state(state_dim: int) -> Tensor:
    return Tensor(np.zeros((1, state_dim)))


class ConditionalCore:
    """Premise LSTM feeding its final cell state into a hypothesis LSTM.

    The hypothesis LSTM starts from a zero hidden state; only the cell state
    carries over.
    """

    def __init__(self, premise_cell: LstmCell, hypothesis_cell: LstmCell):
        self.premise_cell = premise_cell
        self.hypothesis_cell = hypothesis_cell
        self.state_dim = premise_cell.state_dim

    @classmethod
    def random(
        cls, input_dim: int, state_dim: int, rng: np.random.Generator
    ) -> "ConditionalCore":
        return cls(
            LstmCell.random(input_dim, state_dim, rng, "premise_lstm"),
            LstmCell.random(input_dim, state_dim, rng, "hypothesis_lstm"),
        )

    def run(
        self, premise_rows: Sequence[Tensor], hypothesis_rows: Sequence[Tensor]
    ) -> tuple[list[Tensor], Tensor, Tensor]:
        """Returns (premise hidden rows, final premise hidden, final
        hypothesis hidden)."""
        if not premise_rows or not hypothesis_rows:
            raise ValueError("premise and hypothesis sequences must be non-empty")
        h = _zero_state(self.state_dim)
        c = _zero_state(self.state_dim)
        premise_states = []
        for x in premise_rows:
            h, c = self.premise_cell.step(x, h, c)
            premise_states.append(h)
        premise_final = h
        h = _zero_state(self.state_dim)
        for x in hypothesis_rows:
            h, c = self.hypothesis_cell.step(x, h, c)
        return premise_states, premise_final, h

    def params(self) -> list[Tensor]:
        return self.premise_cell.params() + self.hypothesis_cell.params()

    def all_tensors(self) -> dict[str, Tensor]:
        return {
            t.name: t
            for t in self.premise_cell.params() + self.hypothesis_cell.params()
        }


def _affine(name: str, rows: int, cols: int, rng: np.random.Generator):
    w = Tensor(
        rng.normal(scale=INIT_SCALE, size=(rows, cols)), watched=True, name=f"{name}.W"
    )
    b = Tensor(np.zeros(cols), watched=True, name=f"{name}.b")
    return w, b


class _ModelBase:
    architecture = ""

    def params(self) -> list[Tensor]:
        raise NotImplementedError

    def all_tensors(self) -> dict[str, Tensor]:
        raise NotImplementedError

    def _meta(self) -> dict:
        return {
            "architecture": self.architecture,
            "dim": self.embeddings.dim,
            "state_dim": self.state_dim,
            "keep_prob": self.keep_prob,
            "trainable_embeddings": self.embeddings.trainable,
            "vocab": sorted(self.embeddings.vocab, key=self.embeddings.vocab.get),
        }

    def save(self, path: str | Path) -> None:
        save_checkpoint(path, self.all_tensors(), self._meta())

    @classmethod
    def _restore(cls, tensors: dict[str, np.ndarray], meta: dict) -> "_ModelBase":
        if meta.get("architecture") != cls.architecture:
            raise ValueError(
                f"checkpoint holds {meta.get('architecture')!r}, "
                f"expected {cls.architecture!r}"
            )
        rng = np.random.default_rng(0)
        model = cls.init(
            vocab_tokens=meta["vocab"],
            dim=meta["dim"],
            state_dim=meta["state_dim"],
            rng=rng,
            keep_prob=meta["keep_prob"],
            trainable_embeddings=meta["trainable_embeddings"],
        )
        own = model.all_tensors()
        if set(own) != set(tensors):
            missing = sorted(set(own) ^ set(tensors))
            raise ValueError(f"checkpoint parameter names do not match: {missing}")
        for name, values in tensors.items():
            if own[name].values.shape != values.shape:
                raise ValueError(
                    f"checkpoint tensor {name} has shape {values.shape}, "
                    f"expected {own[name].values.shape}"
                )
            own[name].values = values.copy()
        return model

    @classmethod
    def load(cls, path: str | Path) -> "_ModelBase":
        tensors, meta = load_checkpoint(path)
        return cls._restore(tensors, meta)


class ConditionalLstmModel(_ModelBase):
    """Premise-conditioned LSTM pair with a tanh hidden layer head.

    Multi-premise items are read as one separator-joined sequence.
    """

    architecture = "conditional-lstm"

    def __init__(
        self,
        embeddings: EmbeddingTable,
        core: ConditionalCore,
        hidden_w: Tensor,
        hidden_b: Tensor,
        out_w: Tensor,
        out_b: Tensor,
        keep_prob: float,
    ):
        self.embeddings = embeddings
        self.core = core
        self.hidden_w = hidden_w
        self.hidden_b = hidden_b
        self.out_w = out_w
        self.out_b = out_b
        self.keep_prob = keep_prob
        self.state_dim = core.state_dim

    @classmethod
    def init(
        cls,
        vocab_tokens: Sequence[str],
        dim: int,
        state_dim: int,
        rng: np.random.Generator,
        keep_prob: float = 1.0,
        trainable_embeddings: bool = True,
        embeddings: EmbeddingTable | None = None,
    ) -> "ConditionalLstmModel":
        emb = embeddings or EmbeddingTable.random(
            vocab_tokens, dim, rng, trainable_embeddings
        )
        core = ConditionalCore.random(emb.dim, state_dim, rng)
        hidden_w, hidden_b = _affine("hidden", 2 * state_dim, state_dim, rng)
        out_w, out_b = _affine("output", state_dim, 3, rng)
        return cls(emb, core, hidden_w, hidden_b, out_w, out_b, keep_prob)

    def forward(
        self,
        premise: Sequence[str],
        hypothesis: Sequence[str],
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        if train and rng is None:
            raise ValueError("training mode needs a dropout rng")
        _, premise_vec, hypothesis_vec = self.core.run(
            self.embeddings.embed(premise), self.embeddings.embed(hypothesis)
        )
        pair = concat([premise_vec, hypothesis_vec], axis=1)
        pair = dropout(pair, self.keep_prob, rng, train=train)
        hidden = tanh(add(matmul(pair, self.hidden_w), self.hidden_b))
        return flatten(add(matmul(hidden, self.out_w), self.out_b))

    def params(self) -> list[Tensor]:
        return (
            self.embeddings.params()
            + self.core.params()
            + [self.hidden_w, self.hidden_b, self.out_w, self.out_b]
        )

    def all_tensors(self) -> dict[str, Tensor]:
        tensors = dict(self.embeddings.all_tensors())
        tensors.update(self.core.all_tensors())
        for t in (self.hidden_w, self.hidden_b, self.out_w, self.out_b):
            tensors[t.name] = t
        return tensors


class AttentionModel(_ModelBase):
    """Word-by-word attention over premise positions.

    Each hypothesis step scores every premise hidden state, mixes them by
    softmax weight, and folds the mixture into a recurrent attention memory;
    the final memory and hypothesis vector form the pair representation.
    """

    architecture = "attention"

    ATTN_NAMES = ("Wy", "Wh", "Wr", "Wt", "Wp", "Wx")

    def __init__(
        self,
        embeddings: EmbeddingTable,
        core: ConditionalCore,
        attn: dict[str, Tensor],
        score_w: Tensor,
        out_w: Tensor,
        out_b: Tensor,
        keep_prob: float,
    ):
        self.embeddings = embeddings
        self.core = core
        self.attn = attn
        self.score_w = score_w
        self.out_w = out_w
        self.out_b = out_b
        self.keep_prob = keep_prob
        self.state_dim = core.state_dim

    @classmethod
    def init(
        cls,
        vocab_tokens: Sequence[str],
        dim: int,
        state_dim: int,
        rng: np.random.Generator,
        keep_prob: float = 1.0,
        trainable_embeddings: bool = True,
        embeddings: EmbeddingTable | None = None,
    ) -> "AttentionModel":
        emb = embeddings or EmbeddingTable.random(
            vocab_tokens, dim, rng, trainable_embeddings
        )
        core = ConditionalCore.random(emb.dim, state_dim, rng)
        attn = {}
        for short in cls.ATTN_NAMES:
            name = f"attention.{short}"
            attn[short] = Tensor(
                rng.normal(scale=INIT_SCALE, size=(state_dim, state_dim)),
                watched=True,
                name=name,
            )
        score_w = Tensor(
            rng.normal(scale=INIT_SCALE, size=(state_dim, 1)),
            watched=True,
            name="attention.score",
        )
        out_w, out_b = _affine("output", state_dim, 3, rng)
        return cls(emb, core, attn, score_w, out_w, out_b, keep_prob)

    def forward(
        self,
        premise: Sequence[str],
        hypothesis: Sequence[str],
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> tuple[Tensor, np.ndarray]:
        if train and rng is None:
            raise ValueError("training mode needs a dropout rng")
        premise_rows = self.embeddings.embed(premise)
        hypothesis_rows = self.embeddings.embed(hypothesis)
        if not premise_rows or not hypothesis_rows:
            raise ValueError("premise and hypothesis sequences must be non-empty")

        h = _zero_state(self.state_dim)
        c = _zero_state(self.state_dim)
        premise_states = []
        for x in premise_rows:
            h, c = self.core.premise_cell.step(x, h, c)
            premise_states.append(h)
        memory = concat(premise_states, axis=0)  # (premise_len, k)
        projected = matmul(memory, self.attn["Wy"])

        h = _zero_state(self.state_dim)
        attention_state = _zero_state(self.state_dim)
        weights_rows = []
        for x in hypothesis_rows:
            h, c = self.core.hypothesis_cell.step(x, h, c)
            query = add(
                matmul(h, self.attn["Wh"]), matmul(attention_state, self.attn["Wr"])
            )
            scored = tanh(add(projected, query))
            weights = softmax(matmul(scored, self.score_w), axis=0)
            weights_rows.append(weights.values[:, 0].copy())
            mixed = matmul(transpose(weights), memory)
            attention_state = add(
                mixed, tanh(matmul(attention_state, self.attn["Wt"]))
            )
        pair = tanh(
            add(
                matmul(attention_state, self.attn["Wp"]),
                matmul(h, self.attn["Wx"]),
            )
        )
        pair = dropout(pair, self.keep_prob, rng, train=train)
        logits = flatten(add(matmul(pair, self.out_w), self.out_b))
        return logits, np.stack(weights_rows)

    def params(self) -> list[Tensor]:
        return (
            self.embeddings.params()
            + self.core.params()
            + [self.attn[s] for s in self.ATTN_NAMES]
            + [self.score_w, self.out_w, self.out_b]
        )

    def all_tensors(self) -> dict[str, Tensor]:
        tensors = dict(self.embeddings.all_tensors())
        tensors.update(self.core.all_tensors())
        for t in [self.attn[s] for s in self.ATTN_NAMES] + [
            self.score_w,
            self.out_w,
            self.out_b,
        ]:
            tensors[t.name] = t
        return tensors


class SumOfExpertsModel(_ModelBase):
    """One shared conditional core judged against each premise separately.

    Per-premise logits are produced by a shared affine head and summed in a
    canonical value-sorted tree, so any ordering of the same four premises
    yields bitwise-identical totals.
    """

    architecture = "sum-of-experts"

    def __init__(
        self,
        embeddings: EmbeddingTable,
        core: ConditionalCore,
        expert_w: Tensor,
        expert_b: Tensor,
        keep_prob: float,
    ):
        self.embeddings = embeddings
        self.core = core
        self.expert_w = expert_w
        self.expert_b = expert_b
        self.keep_prob = keep_prob
        self.state_dim = core.state_dim

    @classmethod
    def init(
        cls,
        vocab_tokens: Sequence[str],
        dim: int,
        state_dim: int,
        rng: np.random.Generator,
        keep_prob: float = 1.0,
        trainable_embeddings: bool = True,
        embeddings: EmbeddingTable | None = None,
    ) -> "SumOfExpertsModel":
        emb = embeddings or EmbeddingTable.random(
            vocab_tokens, dim, rng, trainable_embeddings
        )
        core = ConditionalCore.random(emb.dim, state_dim, rng)
        expert_w, expert_b = _affine("experts", 2 * state_dim, 3, rng)
        return cls(emb, core, expert_w, expert_b, keep_prob)

    def _expert(
        self,
        premise: Sequence[str],
        hypothesis_rows: Sequence[Tensor],
        train: bool,
        rng: np.random.Generator | None,
    ) -> Tensor:
        _, premise_vec, hypothesis_vec = self.core.run(
            self.embeddings.embed(premise), hypothesis_rows
        )
        pair = concat([premise_vec, hypothesis_vec], axis=1)
        pair = dropout(pair, self.keep_prob, rng, train=train)
        return flatten(add(matmul(pair, self.expert_w), self.expert_b))

    def forward(
        self,
        premises: Sequence[Sequence[str]],
        hypothesis: Sequence[str],
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> tuple[Tensor, list[Tensor]]:
        if len(premises) not in (1, 4):
            raise ValueError(f"need 1 or 4 premises, got {len(premises)}")
        if train and rng is None:
            raise ValueError("training mode needs a dropout rng")
        hypothesis_rows = self.embeddings.embed(hypothesis)
        experts = [
            self._expert(premise, hypothesis_rows, train, rng)
            for premise in premises
        ]
        if len(experts) == 1:
            return experts[0], experts
        ranked = sorted(experts, key=lambda t: tuple(t.values.tolist()))
        total = add(add(ranked[0], ranked[1]), add(ranked[2], ranked[3]))
        return total, experts

    def params(self) -> list[Tensor]:
        return (
            self.embeddings.params() + self.core.params() + [self.expert_w, self.expert_b]
        )

    def all_tensors(self) -> dict[str, Tensor]:
        tensors = dict(self.embeddings.all_tensors())
        tensors.update(self.core.all_tensors())
        tensors[self.expert_w.name] = self.expert_w
        tensors[self.expert_b.name] = self.expert_b
        return tensors


ARCHITECTURES = {
    cls.architecture: cls
    for cls in (ConditionalLstmModel, AttentionModel, SumOfExpertsModel)
}


def load_model(path: str | Path):
    """Load any checkpoint, dispatching on its architecture field."""
    tensors, meta = load_checkpoint(path)
    arch = meta.get("architecture")
    if arch not in ARCHITECTURES:
        raise ValueError(f"unknown architecture in checkpoint: {arch!r}")
    return ARCHITECTURES[arch]._restore(tensors, meta)
