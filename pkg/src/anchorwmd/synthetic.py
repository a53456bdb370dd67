"""Planted two-class corpora with known discriminative vocabulary.

Each class owns a set of exclusive words whose vectors are drawn from a
class-specific Gaussian cluster; a pool of common words sits between the
clusters and appears in documents of both classes. The planted exclusive
words are the ground truth for keyword-extraction checks, and the cluster
separation makes the intended classification behaviour unambiguous.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .data import Corpus, Document, WordVectorTable

__all__ = ["SyntheticData", "planted_two_cluster_data"]


@dataclass
class SyntheticData:
    train: Corpus
    test: Corpus
    vectors: WordVectorTable
    planted: dict[str, list[str]]  # class name -> its exclusive words


def planted_two_cluster_data(
    seed: int = 0,
    dim: int = 10,
    exclusive_per_class: int = 10,
    common_words: int = 20,
    train_docs_per_class: int = 40,
    test_docs_per_class: int = 20,
    tokens_per_doc: int = 30,
    separation: float = 5.0,
    noise: float = 1.0,
) -> SyntheticData:
    """Build train and test corpora plus a matching word-vector table.

    Class centers sit ``separation * noise`` apart along the first axis and
    the common-word cluster halfway between them; every word vector gets
    independent Gaussian noise of scale ``noise``. Each document token is a
    fair coin flip between the class's exclusive pool and the common pool.
    """
    rng = np.random.default_rng(seed)
    class_names = ["north", "south"]
    # zero-centered constellation: the two class clusters sit symmetrically
    # about the origin and the common-word cluster at their midpoint
    half = 0.5 * separation * noise
    centers = {
        "north": np.concatenate([[-half], np.zeros(dim - 1)]),
        "south": np.concatenate([[+half], np.zeros(dim - 1)]),
    }
    common_center = (centers["north"] + centers["south"]) / 2.0

    vectors: dict[str, np.ndarray] = {}
    planted: dict[str, list[str]] = {}
    for name in class_names:
        words = [f"{name}{i:02d}" for i in range(exclusive_per_class)]
        planted[name] = words
        for word in words:
            vectors[word] = centers[name] + noise * rng.standard_normal(dim)
    common = [f"common{i:02d}" for i in range(common_words)]
    for word in common:
        # common words are non-discriminative by construction: a compact
        # cloud at the midpoint with no component along the axis separating
        # the class clusters
        vec = common_center + 0.3 * noise * rng.standard_normal(dim)
        vec[0] = common_center[0]
        vectors[word] = vec

    def sample_docs(tag: str, per_class: int) -> list[Document]:
        docs = []
        for label, name in enumerate(class_names):
            own = planted[name]
            for i in range(per_class):
                counts: Counter = Counter()
                for _ in range(tokens_per_doc):
                    if rng.random() < 0.5:
                        counts[own[rng.integers(len(own))]] += 1
                    else:
                        counts[common[rng.integers(len(common))]] += 1
                docs.append(
                    Document(doc_id=f"{name}-{tag}-{i:03d}", label=label, counts=dict(counts))
                )
        return docs

    train = Corpus(documents=sample_docs("train", train_docs_per_class), class_names=class_names)
    test = Corpus(documents=sample_docs("test", test_docs_per_class), class_names=class_names)
    return SyntheticData(
        train=train, test=test, vectors=WordVectorTable.from_dict(vectors), planted=planted
    )
