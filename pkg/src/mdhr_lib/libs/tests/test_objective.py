"""tests for the losses, class weights and F1 bookkeeping"""
import os
import shutil
import tempfile
import unittest
from collections import OrderedDict

import numpy as np

from mdhr_lib.helpers.errors import DimensionError, DomainError
from mdhr_lib.libs import objective
from mdhr_lib.libs.tensor import Tensor, ops, backward


class TestAuLoss(unittest.TestCase):

    def test_single_au_values(self):
        P = Tensor([[0.5]])
        on = objective.au_loss(P, [[1]], [1.0]).item()
        off = objective.au_loss(P, [[0]], [1.0]).item()
        assert(abs(on - 0.693147) < 1e-5)
        assert(abs(off - 0.346574) < 1e-5)

    def test_confident_predictions_stay_finite(self):
        assert(abs(objective.au_loss(Tensor([[1.0]]), [[1]], [1.0]).item()) < 1e-6)
        wrong = objective.au_loss(Tensor([[0.0]]), [[1]], [1.0]).item()
        assert(np.isfinite(wrong))
        assert(abs(wrong - (-np.log(1e-7))) < 1e-6)

    def test_class_weights_scale_terms(self):
        P = Tensor([[0.5, 0.5]])
        loss = objective.au_loss(P, [[1, 1]], [2.0, 0.0]).item()
        assert(abs(loss - 2 * np.log(2)) < 1e-9)

    def test_mask_drops_frames(self):
        P = Tensor([[[0.5], [0.9]]])
        Y = np.array([[[1], [0]]])
        masked = objective.au_loss(P, Y, [1.0], mask=np.array([[True, False]])).item()
        assert(abs(masked - np.log(2)) < 1e-9)
        with self.assertRaises(DomainError):
            objective.au_loss(P, Y, [1.0], mask=np.array([[False, False]]))

    def test_gradient_flows(self):
        P = Tensor([[0.3, 0.8]], requires_grad=True)
        backward(objective.au_loss(P, [[1, 0]], [1.0, 1.0]))
        assert(P.grad[0, 0] < 0 and P.grad[0, 1] > 0)

    def test_shape_checks(self):
        with self.assertRaises(DimensionError):
            objective.au_loss(Tensor([[0.5, 0.5]]), [[1]], [1.0])
        with self.assertRaises(DimensionError):
            objective.au_loss(Tensor([[0.5, 0.5]]), [[1, 0]], [1.0])


class TestSubLoss(unittest.TestCase):

    def test_uniform_distribution(self):
        dist = ops.softmax(Tensor(np.zeros((2, 3, 16))), axis=-1)
        loss = objective.sub_loss(OrderedDict([("up", dist)]), {"up": np.zeros((2, 3), dtype=int)}).item()
        assert(abs(loss - np.log(16)) < 1e-9)

    def test_regions_add_up(self):
        up = Tensor([[0.5, 0.5]])
        low = Tensor([[0.25, 0.75]])
        targets = {"up": np.array([0]), "low": np.array([1])}
        loss = objective.sub_loss(OrderedDict([("up", up), ("low", low)]), targets).item()
        assert(abs(loss - (np.log(2) - np.log(0.75))) < 1e-9)

    def test_total(self):
        l_au, l_sub = Tensor(1.0), Tensor(10.0)
        assert(objective.total_loss(l_au, l_sub, 0.01).item() == 1.1)
        assert(objective.total_loss(l_au, l_sub, 0.0) is l_au)
        assert(objective.total_loss(l_au, None, 0.5) is l_au)
        with self.assertRaises(DomainError):
            objective.total_loss(l_au, l_sub, -0.1)


class TestClassWeights(unittest.TestCase):

    def test_example(self):
        assert(np.allclose(objective.class_weights([25, 75], 100), [1.5, 0.5]))

    def test_from_labels(self):
        labels = np.array([[1, 1], [0, 1], [0, 1], [0, 0]])
        assert(np.allclose(objective.class_weights_from_labels(labels), [1.5, 0.5]))

    def test_presets_average_one(self):
        au_ids = list(objective.BP4D_LABEL_COUNTS)
        weights = objective.class_weights_from_counts(objective.BP4D_LABEL_COUNTS, au_ids)
        assert(abs(weights.mean() - 1.0) < 1e-12)
        # rarest AU gets the largest weight
        assert(au_ids[int(np.argmax(weights))] == 24)

    def test_degenerate_columns(self):
        with self.assertRaises(DomainError):
            objective.class_weights([0, 5], 10)
        with self.assertRaises(DomainError):
            objective.class_weights([10, 5], 10)
        with self.assertRaises(DomainError):
            objective.class_weights_from_counts(objective.DISFA_LABEL_COUNTS, [1, 7])


class TestF1(unittest.TestCase):

    def test_example(self):
        report = objective.f1_scores(np.array([[1.0], [1.0], [1.0], [0.0]]), np.array([[1], [1], [0], [1]]))
        assert(np.allclose(report.f1, [2.0 / 3]))
        assert(np.allclose(report.precision, [2.0 / 3]))

    def test_threshold_is_inclusive(self):
        counts = objective.ConfusionCounts.from_predictions(np.array([[0.5]]), np.array([[1]]))
        assert(counts.tp[0] == 1)

    def test_no_positives_scores_zero(self):
        report = objective.f1_scores(np.zeros((4, 2)), np.zeros((4, 2), dtype=int))
        assert(np.array_equal(report.f1, [0.0, 0.0]))
        assert(report.macro_f1 == 0.0)

    def test_counts_add_over_shards(self):
        rng = np.random.default_rng(4)
        P = rng.random((10, 3))
        Y = rng.random((10, 3)) < 0.5
        whole = objective.ConfusionCounts.from_predictions(P, Y)
        parts = objective.ConfusionCounts.from_predictions(P[:4], Y[:4]) + \
            objective.ConfusionCounts.from_predictions(P[4:], Y[4:])
        assert(whole == parts)
        assert(np.allclose(whole.report().f1, parts.report().f1))

    def test_mask(self):
        P = np.array([[[1.0], [1.0]]])
        Y = np.array([[[1], [0]]])
        counts = objective.ConfusionCounts.from_predictions(P, Y, mask=np.array([[True, False]]))
        assert(counts.fp[0] == 0 and counts.tp[0] == 1)


class TestMetricsFile(unittest.TestCase):

    def setUp(self):
        self.dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.dir)

    def test_rows_per_au(self):
        path = os.path.join(self.dir, "metrics.csv")
        report = objective.f1_scores(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([[1, 0], [0, 0]]))
        objective.write_metrics(path, 10, [1, 2], report)
        objective.write_metrics(path, 20, [1, 2], report)
        rows = objective.read_metrics(path)
        assert(len(rows) == 4)
        assert(list(rows[0]) == list(objective.metrics_columns))
        assert(rows[2]["epoch"] == "20" and rows[3]["au_id"] == "2")
        assert(float(rows[0]["f1"]) == 1.0)
        assert(float(rows[0]["macro_f1"]) == 0.5)


if __name__ == "__main__":
    unittest.main()
