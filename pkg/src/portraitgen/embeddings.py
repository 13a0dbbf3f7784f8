"""Skip-gram embeddings over attribute co-occurrence bags.

Each (type, value) pair is one vocabulary token.  The attribute values
annotated on one portrait form a bag; every ordered pair of distinct
co-occurring tokens is a (center, context) training example, trained with
negative sampling.  The finished table concatenates per-type vectors into
the fixed-width conditioning vector consumed by the generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import archive
from .schema import AttributeSchema


@dataclass
class EmbeddingTable:
    """One learned vector per schema (type, value) pair.

    ``context_vectors`` exist only during training and are dropped before
    the table is written to disk.
    """

    dim: int
    vectors: dict[tuple[str, str], np.ndarray]
    context_vectors: dict[tuple[str, str], np.ndarray] | None = None
    epoch_losses: list[float] = field(default_factory=list)

    def vector(self, type_name: str, value: str) -> np.ndarray:
        try:
            return self.vectors[(type_name, value)]
        except KeyError:
            raise KeyError(
                f"embedding table has no vector for ({type_name!r}, {value!r})"
            ) from None

    def covers(self, schema: AttributeSchema) -> bool:
        return all(pair in self.vectors for pair in schema.pairs())

    def cosine(self, a: tuple[str, str], b: tuple[str, str]) -> float:
        va = self.vector(*a).astype(np.float64)
        vb = self.vector(*b).astype(np.float64)
        denom = np.linalg.norm(va) * np.linalg.norm(vb)
        if denom == 0.0:
            return 0.0
        return float(va @ vb / denom)

    def as_matrix(self, schema: AttributeSchema) -> np.ndarray:
        """Stack vectors in canonical slot order: shape (K, dim)."""
        return np.stack([self.vectors[p] for p in schema.pairs()]).astype(np.float32)


def validate_corpus(
    bags: Sequence[Mapping[str, str]], schema: AttributeSchema
) -> None:
    if not bags:
        raise ValueError("attribute bag corpus is empty")
    for i, bag in enumerate(bags):
        if not bag:
            raise ValueError(f"bag {i} has no assignments")
        schema.validate_assignments(bag)


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def train_embeddings(
    bags: Sequence[Mapping[str, str]],
    schema: AttributeSchema,
    dim: int = 16,
    epochs: int = 20,
    negatives: int = 5,
    learning_rate: float = 0.05,
    seed: int = 0,
) -> EmbeddingTable:
    """Train skip-gram-with-negative-sampling embeddings on attribute bags.

    Deterministic under a fixed seed.  Center vectors start uniform in
    [-0.5/dim, +0.5/dim]; context vectors start at zero.  Negatives are
    drawn from the unigram distribution raised to 3/4.
    """
    if dim < 1:
        raise ValueError(f"embedding dim must be >= 1, got {dim}")
    validate_corpus(bags, schema)

    pairs_vocab = schema.pairs()
    token_ids = {pair: i for i, pair in enumerate(pairs_vocab)}
    vocab_size = len(pairs_vocab)

    rng = np.random.default_rng(seed)
    center = (rng.random((vocab_size, dim)) - 0.5) / dim
    context = np.zeros((vocab_size, dim), dtype=np.float64)

    # (center, context) examples: every ordered pair of distinct tokens per bag
    examples: list[tuple[int, int]] = []
    counts = np.zeros(vocab_size, dtype=np.float64)
    for bag in bags:
        tokens = [token_ids[(t, v)] for t, v in bag.items()]
        for tok in tokens:
            counts[tok] += 1.0
        for a in tokens:
            for b in tokens:
                if a != b:
                    examples.append((a, b))

    noise = counts ** 0.75
    if noise.sum() == 0.0:
        noise = np.ones(vocab_size)
    noise = noise / noise.sum()

    epoch_losses: list[float] = []
    for _ in range(epochs):
        if examples:
            order = rng.permutation(len(examples))
        else:
            order = np.empty(0, dtype=np.int64)
        total_loss = 0.0
        for idx in order:
            center_tok, target_tok = examples[idx]
            negative_toks = []
            while len(negative_toks) < negatives:
                cand = int(rng.choice(vocab_size, p=noise))
                if cand != target_tok:
                    negative_toks.append(cand)
            w = center[center_tok]
            grad_center = np.zeros(dim)
            score = float(w @ context[target_tok])
            sig = _sigmoid(score)
            total_loss += -math.log(max(sig, 1e-12))
            g = sig - 1.0
            grad_center += g * context[target_tok]
            context[target_tok] -= learning_rate * g * w
            for neg in negative_toks:
                score = float(w @ context[neg])
                sig = _sigmoid(score)
                total_loss += -math.log(max(1.0 - sig, 1e-12))
                g = sig
                grad_center += g * context[neg]
                context[neg] -= learning_rate * g * w
            center[center_tok] -= learning_rate * grad_center
        epoch_losses.append(total_loss / len(examples) if examples else 0.0)

    vectors = {
        pair: center[i].astype(np.float32) for pair, i in token_ids.items()
    }
    context_vecs = {
        pair: context[i].astype(np.float32) for pair, i in token_ids.items()
    }
    return EmbeddingTable(
        dim=dim,
        vectors=vectors,
        context_vectors=context_vecs,
        epoch_losses=epoch_losses,
    )


def embed_set(
    attrs: Mapping[str, str],
    table: EmbeddingTable,
    schema: AttributeSchema,
) -> np.ndarray:
    """Concatenate per-type vectors into a fixed-width conditioning vector.

    Blocks follow canonical type order over ALL schema types; unspecified
    types contribute a zero block, so the output length is always
    ``len(schema.types) * table.dim``.
    """
    schema.validate_assignments(attrs)
    blocks = []
    for spec in schema.types:
        if spec.name in attrs:
            blocks.append(table.vector(spec.name, attrs[spec.name]))
        else:
            blocks.append(np.zeros(table.dim, dtype=np.float32))
    return np.concatenate(blocks).astype(np.float32)


def save_embeddings(table: EmbeddingTable, path: str) -> None:
    records = [(t, v, vec) for (t, v), vec in table.vectors.items()]
    archive.write_embedding_records(path, table.dim, records)


def load_embeddings(path: str) -> EmbeddingTable:
    dim, records = archive.read_embedding_records(path)
    vectors = {(t, v): vec for t, v, vec in records}
    return EmbeddingTable(dim=dim, vectors=vectors)
