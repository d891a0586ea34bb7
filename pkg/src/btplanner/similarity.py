"""Directional embedding-based node similarity between behavior trees.

Each node is rendered as a sentence, embedded, and scored by its best cosine
match among the other tree's node sentences; the mean of those maxima is the
tree-level score. Swapping source and target can change the value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bt import BehaviorTree, extract_node_sentences
from .providers import EmbeddingProvider, EmbeddingVector


class ZeroVector(Exception):
    pass


class DimensionMismatch(Exception):
    pass


@dataclass(frozen=True)
class PerNodeMatch:
    source_sentence: str
    best_target_sentence: str
    max_cosine: float


@dataclass(frozen=True)
class SimilarityResult:
    source_id: str
    target_id: str
    per_node: tuple[PerNodeMatch, ...]
    mean_max: float


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    if u.dim != v.dim:
        raise DimensionMismatch(f"dims {u.dim} vs {v.dim}")
    a, b = np.asarray(u.values), np.asarray(v.values)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ZeroVector("cosine undefined for zero vector")
    return float(np.dot(a, b) / (na * nb))


def semantic_similarity(
    source: BehaviorTree,
    target: BehaviorTree,
    embedder: EmbeddingProvider,
) -> SimilarityResult:
    """Mean of per-source-node maximum cosine similarity against all target
    node sentences. One embed call covers both sentence lists."""
    src_sentences = extract_node_sentences(source)
    tgt_sentences = extract_node_sentences(target)
    vectors = embedder.embed_texts(src_sentences + tgt_sentences)
    src_vecs = np.array([v.values for v in vectors[: len(src_sentences)]])
    tgt_vecs = np.array([v.values for v in vectors[len(src_sentences):]])

    src_norms = np.linalg.norm(src_vecs, axis=1, keepdims=True)
    tgt_norms = np.linalg.norm(tgt_vecs, axis=1, keepdims=True)
    src_norms[src_norms == 0] = 1.0
    tgt_norms[tgt_norms == 0] = 1.0
    sims = (src_vecs / src_norms) @ (tgt_vecs / tgt_norms).T

    per_node = []
    for i, sentence in enumerate(src_sentences):
        j = int(np.argmax(sims[i]))
        per_node.append(PerNodeMatch(sentence, tgt_sentences[j], float(sims[i, j])))
    mean_max = float(np.mean([m.max_cosine for m in per_node]))
    return SimilarityResult(
        source_id=source.tree_id,
        target_id=target.tree_id,
        per_node=tuple(per_node),
        mean_max=mean_max,
    )
