"""Learnable embedding objects: a linear word transform and per-class anchors.

A document is an empirical measure over embedded word vectors; each class is
represented by an anchor, a point cloud of ``p`` support columns carrying a
uniform measure. The transform is a dense square matrix applied column-wise
to word vectors.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .ot import (
    SinkhornConfig,
    SinkhornResult,
    ground_cost_matrix,
    sinkhorn,
    validate_histogram,
)

__all__ = [
    "DocumentMeasure",
    "AnchorModel",
    "embed_document",
    "doc_anchor_distance",
    "init_anchors",
    "save_checkpoint",
    "load_checkpoint",
]


@dataclass(frozen=True)
class DocumentMeasure:
    """A document as an empirical measure over word vectors.

    ``support`` holds one embedded word vector per column, ``weights`` is the
    normalized word histogram aligned with those columns, and ``word_ids``
    are the vocabulary indices of the words. Instances are value objects:
    the arrays are frozen after construction.
    """

    word_ids: np.ndarray
    support: np.ndarray
    weights: np.ndarray
    label: int | None = None

    def __post_init__(self):
        ids = np.array(self.word_ids, dtype=int)
        support = np.array(self.support, dtype=float)
        weights = validate_histogram(self.weights)
        if support.ndim != 2:
            raise ValueError(f"support must be (d, n), got shape {support.shape}")
        if not (support.shape[1] == weights.size == ids.size):
            raise ValueError(
                f"misaligned document: {support.shape[1]} support columns, "
                f"{weights.size} weights, {ids.size} word ids"
            )
        if not np.all(np.isfinite(support)):
            raise ValueError("support contains non-finite entries")
        for arr in (ids, support, weights):
            arr.setflags(write=False)
        object.__setattr__(self, "word_ids", ids)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return self.support.shape[0]

    @property
    def size(self) -> int:
        return self.support.shape[1]


@dataclass
class AnchorModel:
    """The trained model: transform matrix plus one anchor per class.

    ``transform`` is (d, d); ``anchors`` is (num_classes, d, p) with one
    uniform-measure point cloud per class.
    """

    transform: np.ndarray
    anchors: np.ndarray
    class_names: list[str]
    vocab_hash: str = ""

    def __post_init__(self):
        self.transform = np.asarray(self.transform, dtype=float)
        self.anchors = np.asarray(self.anchors, dtype=float)
        if self.transform.ndim != 2 or self.transform.shape[0] != self.transform.shape[1]:
            raise ValueError(f"transform must be square, got shape {self.transform.shape}")
        if self.anchors.ndim != 3:
            raise ValueError(f"anchors must be (num_classes, d, p), got shape {self.anchors.shape}")
        if self.anchors.shape[1] != self.transform.shape[0]:
            raise ValueError(
                f"anchor dimension {self.anchors.shape[1]} does not match "
                f"transform dimension {self.transform.shape[0]}"
            )
        if len(self.class_names) != self.anchors.shape[0]:
            raise ValueError("one class name per anchor required")
        if not (np.all(np.isfinite(self.transform)) and np.all(np.isfinite(self.anchors))):
            raise ValueError("model parameters must be finite")

    @property
    def dim(self) -> int:
        return self.transform.shape[0]

    @property
    def num_classes(self) -> int:
        return self.anchors.shape[0]

    @property
    def num_support_points(self) -> int:
        return self.anchors.shape[2]


def embed_document(doc: DocumentMeasure, transform: np.ndarray) -> DocumentMeasure:
    """Apply the linear transform column-wise to a document's word vectors."""
    a = np.asarray(transform, dtype=float)
    if a.ndim != 2 or a.shape[1] != doc.dim:
        raise ValueError(
            f"transform shape {a.shape} does not match document dimension {doc.dim}"
        )
    return DocumentMeasure(
        word_ids=doc.word_ids,
        support=a @ doc.support,
        weights=doc.weights,
        label=doc.label,
    )


def doc_anchor_distance(
    doc: DocumentMeasure, anchor: np.ndarray, config: SinkhornConfig | None = None
) -> SinkhornResult:
    """Entropic transport from an embedded document to one anchor.

    The anchor is a (d, p) point cloud carrying the uniform measure 1/p on
    its columns.
    """
    anchor = np.asarray(anchor, dtype=float)
    if anchor.ndim != 2:
        raise ValueError(f"anchor must be (d, p), got shape {anchor.shape}")
    cost = ground_cost_matrix(doc.support, anchor)
    target = np.full(anchor.shape[1], 1.0 / anchor.shape[1])
    return sinkhorn(cost, doc.weights, target, config)


def _kmeans_centroids(points: np.ndarray, k: int, rng: np.random.Generator, max_iters: int = 50) -> np.ndarray:
    """Lloyd's algorithm over row vectors, seeded and deterministic.

    Initial centroids are distinct data rows drawn without replacement; if
    fewer than ``k`` distinct rows exist, centroids are duplicated with a
    small seeded jitter. Empty clusters restart at the point currently
    farthest from its centroid.
    """
    distinct = np.unique(points, axis=0)
    if distinct.shape[0] < k:
        reps = -(-k // distinct.shape[0])  # ceil
        base = np.tile(distinct, (reps, 1))[:k]
        return base + 1e-4 * rng.standard_normal(base.shape)

    start = rng.choice(distinct.shape[0], size=k, replace=False)
    centroids = distinct[start].copy()
    sq_pts = np.einsum("nd,nd->n", points, points)
    for _ in range(max_iters):
        sq_cent = np.einsum("kd,kd->k", centroids, centroids)
        dist2 = sq_pts[:, None] + sq_cent[None, :] - 2.0 * (points @ centroids.T)
        assign = dist2.argmin(axis=1)
        new_centroids = np.empty_like(centroids)
        own_dist = dist2[np.arange(points.shape[0]), assign]
        for j in range(k):
            members = points[assign == j]
            if members.shape[0]:
                new_centroids[j] = members.mean(axis=0)
            else:
                new_centroids[j] = points[own_dist.argmax()]
        if np.array_equal(new_centroids, centroids):
            break
        centroids = new_centroids
    return centroids


def init_anchors(
    corpus: list[DocumentMeasure], num_classes: int, p: int, seed: int
) -> np.ndarray:
    """Cluster each class's word vectors into ``p`` anchor support points.

    Runs seeded k-means per class over the multiset of support columns of
    that class's documents and returns a (num_classes, d, p) array of
    centroid columns.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    if not corpus:
        raise ValueError("corpus is empty")
    dim = corpus[0].dim
    anchors = np.empty((num_classes, dim, p))
    for label in range(num_classes):
        columns = [doc.support for doc in corpus if doc.label == label]
        if not columns:
            raise ValueError(f"class {label} has no documents")
        points = np.concatenate(columns, axis=1).T  # rows = word vectors
        rng = np.random.default_rng([seed, label])
        anchors[label] = _kmeans_centroids(points, p, rng).T
    return anchors


def save_checkpoint(model: AnchorModel, path: str) -> None:
    """Write the model as a single JSON document, atomically."""
    payload = {
        "dim": model.dim,
        "num_classes": model.num_classes,
        "p": model.num_support_points,
        "transform": model.transform.tolist(),
        "anchors": model.anchors.tolist(),
        "class_names": list(model.class_names),
        "vocab_hash": model.vocab_hash,
    }
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".checkpoint-", suffix=".json")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def load_checkpoint(path: str) -> AnchorModel:
    """Read a model checkpoint written by :func:`save_checkpoint`."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    model = AnchorModel(
        transform=np.asarray(payload["transform"], dtype=float),
        anchors=np.asarray(payload["anchors"], dtype=float),
        class_names=list(payload["class_names"]),
        vocab_hash=payload.get("vocab_hash", ""),
    )
    expected = (payload["num_classes"], payload["dim"], payload["p"])
    if model.anchors.shape != expected:
        raise ValueError(
            f"checkpoint anchors shape {model.anchors.shape} does not match header {expected}"
        )
    return model
