"""Word-level interpretation of a trained model.

A word matters for a class when its transformed vector sits close to that
class's anchor and far from every other anchor. The importance of a word for
class y aggregates that margin: the sum of its minimum squared distances to
the other anchors minus (Y - 1) times its distance to the class-y anchor,
so the per-word importances over all classes always sum to zero. The same
squared Euclidean metric as the transport ground cost is used throughout.
"""

from __future__ import annotations

import logging
import warnings
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .data import Corpus
from .model import AnchorModel
from .ot import ground_cost_matrix

__all__ = [
    "ImportanceTable",
    "word_anchor_distance",
    "importance",
    "compute_importance_table",
    "top_k_words",
    "tfidf_top_words",
    "pca_2d",
    "export_projection",
]

logger = logging.getLogger(__name__)


def word_anchor_distance(word_vector, anchor) -> float:
    """Minimum squared Euclidean distance from a word to an anchor's columns."""
    z = np.asarray(word_vector, dtype=float).reshape(-1, 1)
    cost = ground_cost_matrix(z, np.asarray(anchor, dtype=float))
    return float(cost.min())


def importance(word_vector, anchors, class_id: int) -> float:
    """Importance of one transformed word for one class.

    ``sum_{k != y} D(z, anchor_k) - (Y - 1) * D(z, anchor_y)`` where D is
    :func:`word_anchor_distance`. Positive values mark words that sit closer
    to the class's anchor than to the rest.
    """
    anchors = np.asarray(anchors, dtype=float)
    num_classes = anchors.shape[0]
    if not (0 <= class_id < num_classes):
        raise ValueError(f"class id {class_id} out of range for {num_classes} classes")
    dists = np.array([word_anchor_distance(word_vector, anchors[k]) for k in range(num_classes)])
    return float(dists.sum() - num_classes * dists[class_id])


@dataclass
class ImportanceTable:
    """Per-word, per-class importances and minimum anchor distances.

    ``min_distances`` and ``importances`` have shape (V, Y) aligned with
    ``words`` and ``class_names``. Rows satisfy the zero-sum identity:
    each word's importances over the classes sum to zero.
    """

    words: list[str]
    class_names: list[str]
    min_distances: np.ndarray
    importances: np.ndarray

    def write_tsv(self, path: str) -> None:
        num_classes = len(self.class_names)
        with open(path, "w", encoding="utf-8") as fh:
            header = ["word", "class", "importance"] + [f"D_{k}" for k in range(num_classes)]
            fh.write("\t".join(header) + "\n")
            for i, word in enumerate(self.words):
                for y in range(num_classes):
                    row = [word, self.class_names[y], repr(float(self.importances[i, y]))]
                    row += [repr(float(d)) for d in self.min_distances[i]]
                    fh.write("\t".join(row) + "\n")


def compute_importance_table(
    model: AnchorModel, words: list[str], word_vectors: np.ndarray
) -> ImportanceTable:
    """Score every word against every class anchor.

    ``word_vectors`` is a (V, d) matrix of raw (untransformed) vectors
    aligned with ``words``; they are pushed through the model transform
    before scoring.
    """
    vectors = np.asarray(word_vectors, dtype=float)
    if vectors.ndim != 2 or vectors.shape[0] != len(words):
        raise ValueError("word_vectors must be (len(words), d)")
    transformed = (model.transform @ vectors.T)  # (d, V)
    num_classes = model.num_classes
    min_dists = np.empty((len(words), num_classes))
    for k in range(num_classes):
        cost = ground_cost_matrix(transformed, model.anchors[k])
        min_dists[:, k] = cost.min(axis=1)
    totals = min_dists.sum(axis=1, keepdims=True)
    importances = totals - num_classes * min_dists
    return ImportanceTable(
        words=list(words),
        class_names=list(model.class_names),
        min_distances=min_dists,
        importances=importances,
    )


def top_k_words(table: ImportanceTable, class_id: int, k: int) -> list[tuple[str, float]]:
    """The k most important words for a class, ties broken alphabetically."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if not (0 <= class_id < len(table.class_names)):
        raise ValueError(f"class id {class_id} out of range")
    if k > len(table.words):
        warnings.warn(
            f"requested top-{k} but the vocabulary has {len(table.words)} words; returning all",
            stacklevel=2,
        )
        k = len(table.words)
    scored = sorted(
        zip(table.words, table.importances[:, class_id]),
        key=lambda pair: (-pair[1], pair[0]),
    )
    return [(word, float(score)) for word, score in scored[:k]]


def tfidf_top_words(corpus: Corpus, class_id: int, k: int) -> list[tuple[str, float]]:
    """Class-level TF-IDF ranking, treating each class as one big document.

    TF is the term's count inside the class divided by the class token
    total; IDF is ``ln(Y / (1 + number of classes containing the term)) + 1``
    over the Y-class collection.
    """
    if not (0 <= class_id < corpus.num_classes):
        raise ValueError(f"class id {class_id} out of range")
    class_counts: list[Counter] = [Counter() for _ in range(corpus.num_classes)]
    for doc in corpus.documents:
        class_counts[doc.label].update(doc.counts)
    own = class_counts[class_id]
    if not own:
        raise ValueError(f"class {corpus.class_names[class_id]!r} has no documents")
    doc_freq = Counter()
    for counts in class_counts:
        doc_freq.update(set(counts))
    total = sum(own.values())
    num_classes = corpus.num_classes
    scored = []
    for term, count in own.items():
        tf = count / total
        idf = np.log(num_classes / (1 + doc_freq[term])) + 1.0
        scored.append((term, float(tf * idf)))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[: min(k, len(scored))]


def pca_2d(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project rows onto their top two principal components.

    Returns (projections (N, 2), components (2, d)). If the centered data
    has rank below two the missing coordinate is zero-padded with a warning.
    Component signs are fixed so the dominant loading is positive.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-D array of row vectors")
    centered = pts - pts.mean(axis=0, keepdims=True)
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    cutoff = singular[0] * 1e-12 if singular.size else 0.0
    rank = int(np.sum(singular > cutoff))
    components = np.zeros((2, pts.shape[1]))
    take = min(2, rank, vt.shape[0])
    components[:take] = vt[:take]
    if take < 2:
        warnings.warn(
            f"projection input has rank {take}; padding with a zero coordinate",
            stacklevel=2,
        )
    for row in range(take):
        lead = np.argmax(np.abs(components[row]))
        if components[row, lead] < 0:
            components[row] = -components[row]
    return centered @ components.T, components


def export_projection(
    model: AnchorModel,
    table: ImportanceTable,
    word_vectors: np.ndarray,
    top_words_per_class: int,
    path: str,
) -> int:
    """Write a 2-D map of anchors and each class's top words as TSV.

    The principal components are fitted on the union of all transformed
    vocabulary vectors and all anchor columns; rows are written for every
    anchor column and for the ``top_words_per_class`` highest-importance
    words of each class. Returns the number of rows written.
    """
    vectors = np.asarray(word_vectors, dtype=float)
    transformed = (model.transform @ vectors.T).T  # (V, d)
    anchor_cols = np.concatenate([model.anchors[k].T for k in range(model.num_classes)])
    projections, _ = pca_2d(np.concatenate([transformed, anchor_cols]))
    word_proj = projections[: len(table.words)]
    anchor_proj = projections[len(table.words) :]

    word_row = {word: i for i, word in enumerate(table.words)}
    p = model.num_support_points
    rows = 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("kind\tclass\tlabel\tpc1\tpc2\timportance\n")
        for k, class_name in enumerate(model.class_names):
            anchor_importances = np.array(
                [importance(model.anchors[k][:, j], model.anchors, k) for j in range(p)]
            )
            for j in range(p):
                x, y = anchor_proj[k * p + j]
                fh.write(
                    f"anchor\t{class_name}\tanchor{j:02d}\t{x!r}\t{y!r}\t"
                    f"{float(anchor_importances[j])!r}\n"
                )
                rows += 1
            for word, score in top_k_words(table, k, top_words_per_class):
                x, y = word_proj[word_row[word]]
                fh.write(f"word\t{class_name}\t{word}\t{x!r}\t{y!r}\t{score!r}\n")
                rows += 1
    logger.info("wrote %d projection rows to %s", rows, path)
    return rows
