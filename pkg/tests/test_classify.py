import numpy as np
import pytest

from anchorwmd.classify import (
    anchor_nn_classify,
    error_rate,
    knn_predict_corpus,
    wmd_knn_classify,
    write_predictions,
)
from anchorwmd.model import AnchorModel, DocumentMeasure
from anchorwmd.ot import SinkhornConfig


def make_doc(support, weights, label=None):
    support = np.asarray(support, dtype=float)
    return DocumentMeasure(np.arange(support.shape[1]), support, weights, label=label)


def two_anchor_model(rng=None, far=6.0):
    anchors = np.stack(
        [
            np.array([[-far, -far], [0.0, 1.0]]),
            np.array([[far, far], [0.0, 1.0]]),
        ]
    )
    return AnchorModel(np.eye(2), anchors, ["left", "right"])


class TestAnchorNN:
    def test_coincident_support_wins(self):
        model = two_anchor_model()
        doc = make_doc(model.anchors[1], [0.5, 0.5])
        pred = anchor_nn_classify(doc, model)
        assert pred.predicted_class == 1
        assert pred.anchor_distances[1] == pytest.approx(0.0, abs=1e-6)
        assert pred.anchor_distances[0] > pred.anchor_distances[1]

    def test_tie_breaks_to_first_index(self):
        anchors = np.stack([np.ones((2, 2)), np.ones((2, 2))])
        model = AnchorModel(np.eye(2), anchors, ["a", "b"])
        doc = make_doc(np.zeros((2, 1)), [1.0])
        assert anchor_nn_classify(doc, model).predicted_class == 0

    def test_invariant_to_word_duplication(self, rng):
        # duplicating an atom and renormalizing leaves the measure unchanged;
        # epsilon is held absolute so both representations solve the same problem
        model = two_anchor_model()
        support = rng.standard_normal((2, 3))
        cfg = SinkhornConfig(epsilon=2.0, relative=False, max_iters=2000, tolerance=1e-10)
        base = anchor_nn_classify(make_doc(support, [0.5, 0.25, 0.25]), model, cfg)
        doubled = np.concatenate([support, support[:, :1]], axis=1)
        dup = anchor_nn_classify(make_doc(doubled, [0.25, 0.25, 0.25, 0.25]), model, cfg)
        assert dup.predicted_class == base.predicted_class
        assert dup.anchor_distances == pytest.approx(base.anchor_distances, abs=1e-6)

    def test_class_permutation_permutes_distances(self, rng):
        model = two_anchor_model()
        flipped = AnchorModel(model.transform, model.anchors[::-1].copy(), ["right", "left"])
        doc = make_doc(rng.standard_normal((2, 3)), np.full(3, 1 / 3))
        cfg = SinkhornConfig(max_iters=2000, tolerance=1e-10)
        pred = anchor_nn_classify(doc, model, cfg)
        pred_flipped = anchor_nn_classify(doc, flipped, cfg)
        assert pred_flipped.anchor_distances == pytest.approx(
            pred.anchor_distances[::-1], abs=1e-9
        )
        assert pred_flipped.predicted_class == 1 - pred.predicted_class


class TestWmdKnn:
    def test_k1_returns_identical_doc_label(self, rng):
        train = [
            make_doc(rng.standard_normal((2, 3)), np.full(3, 1 / 3), label=0),
            make_doc(rng.standard_normal((2, 2)), [0.5, 0.5], label=1),
        ]
        test = make_doc(train[1].support, train[1].weights)
        assert wmd_knn_classify(test, train, k=1) == 1

    def test_k_equals_corpus_size_single_class(self, rng):
        train = [
            make_doc(rng.standard_normal((2, 2)), [0.5, 0.5], label=3) for _ in range(4)
        ]
        test = make_doc(rng.standard_normal((2, 2)), [0.5, 0.5])
        assert wmd_knn_classify(test, train, k=4) == 3

    def test_three_doc_hand_case(self):
        # single-word docs: WMD is the squared point distance
        train = [
            make_doc([[0.0]], [1.0], label=0),
            make_doc([[1.0]], [1.0], label=1),
            make_doc([[5.0]], [1.0], label=2),
        ]
        test = make_doc([[1.2]], [1.0])
        assert wmd_knn_classify(test, train, k=1) == 1

    def test_vote_tie_breaks_by_mean_distance(self):
        train = [
            make_doc([[0.0]], [1.0], label=0),
            make_doc([[2.0]], [1.0], label=0),
            make_doc([[0.9]], [1.0], label=1),
            make_doc([[1.4]], [1.0], label=1),
        ]
        # test at 1.0: neighbours 0.9 (1), 1.4 (1), 0.0 (0), 2.0 (0) -> 2-2 tie,
        # class 1 mean (0.01+0.16)/2 beats class 0 mean (1+1)/2
        assert wmd_knn_classify(make_doc([[1.0]], [1.0]), train, k=4) == 1

    def test_self_classification_has_zero_error(self, rng):
        train = [
            make_doc(rng.standard_normal((2, 3)) + offset, np.full(3, 1 / 3), label=label)
            for label, offset in ((0, -3.0), (1, 3.0))
            for _ in range(3)
        ]
        sweep = knn_predict_corpus(train, train, ks=[1])
        assert error_rate(sweep[1], [doc.label for doc in train]) == 0.0

    def test_sweep_matches_single_calls(self, rng):
        train = [
            make_doc(rng.standard_normal((2, 2)), [0.5, 0.5], label=i % 2) for i in range(6)
        ]
        test = [make_doc(rng.standard_normal((2, 2)), [0.5, 0.5]) for _ in range(3)]
        sweep = knn_predict_corpus(test, train, ks=[1, 3], threads=2)
        for i, doc in enumerate(test):
            assert sweep[1][i] == wmd_knn_classify(doc, train, k=1)
            assert sweep[3][i] == wmd_knn_classify(doc, train, k=3)

    def test_invalid_k_rejected(self, rng):
        train = [make_doc(rng.standard_normal((2, 2)), [0.5, 0.5], label=0)]
        with pytest.raises(ValueError):
            wmd_knn_classify(train[0], train, k=0)


class TestErrorRate:
    def test_all_correct(self):
        assert error_rate([1, 0, 2], [1, 0, 2]) == 0.0

    def test_all_wrong(self):
        assert error_rate([1, 1], [0, 0]) == 1.0

    def test_one_of_four(self):
        assert error_rate([0, 0, 0, 1], [0, 0, 0, 0]) == 0.25

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            error_rate([0], [0, 1])


class TestPredictionsFile:
    def test_csv_format(self, tmp_path, rng):
        model = two_anchor_model()
        docs = [make_doc(rng.standard_normal((2, 2)), [0.5, 0.5], label=i % 2) for i in range(3)]
        preds = [anchor_nn_classify(d, model) for d in docs]
        path = tmp_path / "predictions.csv"
        write_predictions(str(path), [f"doc{i}" for i in range(3)], [d.label for d in docs], preds)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "doc_id,true_label,predicted_label,dist_class_0,dist_class_1"
        assert len(lines) == 4
        cells = lines[1].split(",")
        assert cells[0] == "doc0"
        assert float(cells[3]) == pytest.approx(preds[0].anchor_distances[0])
