"""
Tests for FM, pseudo-FM, PSNR, DRD and their supporting constructs.
"""

import math
import unittest

import numpy as np
from hypothesis import given, settings as hypothesis_settings
from hypothesis.extra.numpy import arrays

from core.errors import DegenerateInputError, ShapeError, UndefinedMetricError
from core.imagecore import BinaryImage
from core.metrics import ConfusionCounts, Undefined, confusion_counts, distance_transform, drd, \
    drd_weight_matrix, f_measure, interior_distance, is_defined, nubn, pfm_weight_maps, \
    pseudo_f_measure, psnr, score_pair, stroke_width


def binary(rows):
    return BinaryImage(np.array(rows, dtype=bool))


def drd_fixture():
    """16x16 ground truth with four non-uniform blocks and one isolated flip."""
    gt = np.zeros((16, 16), dtype=bool)
    gt[0, 0] = gt[0, 15] = gt[15, 0] = gt[15, 15] = True
    pred = gt.copy()
    pred[4, 4] = True
    return BinaryImage(pred), BinaryImage(gt)


class TestConfusionAndFMeasure(unittest.TestCase):
    """Test confusion counts and the F-measure."""

    def test_counts(self):
        counts = confusion_counts(binary([[1, 1], [0, 0]]), binary([[1, 0], [1, 0]]))
        self.assertEqual(counts, ConfusionCounts(tp=1, fp=1, fn=1, tn=1))
        self.assertEqual(counts.total, 4)

    def test_f_measure_values(self):
        fm, recall, precision = f_measure(ConfusionCounts(tp=8, fp=2, fn=2, tn=88))
        self.assertAlmostEqual(recall, 0.8)
        self.assertAlmostEqual(precision, 0.8)
        self.assertAlmostEqual(fm, 0.8)

    def test_f_measure_zero_overlap(self):
        self.assertEqual(f_measure(ConfusionCounts(tp=0, fp=3, fn=3, tn=0)).fm, 0.0)

    def test_f_measure_degenerate(self):
        """Test that empty GT or empty prediction is degenerate."""
        with self.assertRaises(DegenerateInputError):
            f_measure(ConfusionCounts(tp=0, fp=3, fn=0, tn=1))
        with self.assertRaises(DegenerateInputError):
            f_measure(ConfusionCounts(tp=0, fp=0, fn=3, tn=1))

    def test_removing_false_positive_never_lowers_fm(self):
        """Test every FP-to-TN flip on random 8x8 pairs."""
        rng = np.random.default_rng(8)
        for case in range(50):
            gt = rng.random((8, 8)) < 0.4
            pred = rng.random((8, 8)) < 0.5
            gt[0, 0] = pred[0, 0] = True
            before = f_measure(confusion_counts(BinaryImage(pred), BinaryImage(gt))).fm
            for row, col in zip(*np.nonzero(pred & ~gt)):
                cleaned = pred.copy()
                cleaned[row, col] = False
                after = f_measure(confusion_counts(BinaryImage(cleaned), BinaryImage(gt))).fm
                self.assertGreaterEqual(after, before, msg=f"case {case} at {(row, col)}")

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            confusion_counts(binary([[1, 0]]), binary([[1], [0]]))


class TestPsnr(unittest.TestCase):

    def test_identical_images_are_infinite(self):
        image = binary([[1, 0], [0, 1]])
        self.assertEqual(psnr(image, image), math.inf)

    def test_one_flip_in_four(self):
        self.assertAlmostEqual(psnr(binary([[1, 0], [0, 0]]), binary([[0, 0], [0, 0]])), 10 * math.log10(4))

    def test_one_mismatch_in_hundred(self):
        gt = np.zeros((10, 10), dtype=bool)
        pred = gt.copy()
        pred[4, 7] = True
        self.assertAlmostEqual(psnr(BinaryImage(pred), BinaryImage(gt)), 20.0, places=12)

    def test_decreases_with_each_mismatch(self):
        rng = np.random.default_rng(3)
        gt = rng.random((16, 16)) < 0.3
        pred = gt.copy()
        previous = math.inf
        for index in rng.permutation(gt.size)[:40]:
            row, col = divmod(int(index), 16)
            pred[row, col] = not gt[row, col]
            current = psnr(BinaryImage(pred), BinaryImage(gt))
            self.assertLess(current, previous)
            previous = current

    def test_all_flipped_is_zero(self):
        self.assertAlmostEqual(psnr(binary([[1, 1]]), binary([[0, 0]])), 0.0)


class TestDrd(unittest.TestCase):
    """Test NUBN, the weight matrix and DRD."""

    def test_weight_matrix(self):
        weights = drd_weight_matrix().weights
        raw = drd_weight_matrix(normalized=False).weights

        self.assertEqual(weights.shape, (5, 5))
        self.assertEqual(weights[2, 2], 0.0)
        self.assertAlmostEqual(weights.sum(), 1.0, places=12)
        self.assertAlmostEqual(raw[0, 0], 1 / math.sqrt(8))
        self.assertAlmostEqual(raw[2, 3], 1.0)

    def test_weight_matrix_symmetry(self):
        weights = drd_weight_matrix().weights
        for variant in (np.fliplr(weights), np.flipud(weights), weights.T,
                        np.rot90(weights, 1), np.rot90(weights, 2), np.rot90(weights, 3)):
            np.testing.assert_allclose(variant, weights, rtol=0, atol=1e-15)

    def test_additive_over_disjoint_flips(self):
        rng = np.random.default_rng(21)
        for case in range(30):
            gt = rng.random((32, 32)) < 0.3
            gt[0, 0], gt[0, 1] = True, False
            order = rng.permutation(gt.size)
            first = np.zeros(gt.size, dtype=bool)
            second = np.zeros(gt.size, dtype=bool)
            first[order[:20]] = True
            second[order[20:45]] = True
            first, second = first.reshape(gt.shape), second.reshape(gt.shape)

            gt_image = BinaryImage(gt)
            both = drd(BinaryImage(gt ^ (first | second)), gt_image)
            separate = drd(BinaryImage(gt ^ first), gt_image) + drd(BinaryImage(gt ^ second), gt_image)
            self.assertAlmostEqual(both, separate, delta=1e-12, msg=f"case {case}")

    def test_nubn_counts_partial_edge_blocks(self):
        gt = np.zeros((10, 10), dtype=bool)
        gt[9, 9] = True
        self.assertEqual(nubn(BinaryImage(gt)), 1)

    def test_nubn_uniform_images(self):
        self.assertEqual(nubn(BinaryImage(np.ones((16, 16)))), 0)
        self.assertEqual(nubn(BinaryImage(np.zeros((16, 16)))), 0)

    def test_hand_case(self):
        """Test one isolated flip over four non-uniform blocks."""
        pred, gt = drd_fixture()
        self.assertEqual(nubn(gt), 4)
        self.assertAlmostEqual(drd(pred, gt), 0.25, places=12)

    def test_identical_is_zero(self):
        _, gt = drd_fixture()
        self.assertEqual(drd(gt, gt), 0.0)

    def test_border_neighbours_contribute_nothing(self):
        """Test that a flip next to the border only counts in-image neighbours."""
        _, gt = drd_fixture()
        pred = gt.labels.copy()
        pred[0, 1] = True
        weights = drd_weight_matrix().weights
        # In-image window is rows 0..2, cols 0..3; every GT pixel there but (0, 0) is background
        expected = (weights[2:, 1:].sum() - weights[2, 1]) / 4
        self.assertAlmostEqual(drd(BinaryImage(pred), gt), expected, places=12)

    def test_undefined_without_mixed_blocks(self):
        with self.assertRaises(UndefinedMetricError):
            drd(BinaryImage(np.ones((8, 8))), BinaryImage(np.zeros((8, 8))))


class TestDistanceAndStrokeWidth(unittest.TestCase):
    """Test distance transforms and the stroke-width estimate."""

    def test_single_pixel_distances(self):
        gt = np.zeros((5, 5), dtype=bool)
        gt[0, 0] = True
        distances = distance_transform(BinaryImage(gt)).distances

        self.assertEqual(distances[0, 0], 0.0)
        self.assertEqual(distances[3, 4], 5.0)
        self.assertAlmostEqual(distances[1, 1], math.sqrt(2))

    def test_all_foreground_is_zero(self):
        self.assertTrue((distance_transform(BinaryImage(np.ones((4, 4)))).distances == 0).all())

    def test_no_foreground_is_degenerate(self):
        with self.assertRaises(DegenerateInputError):
            distance_transform(BinaryImage(np.zeros((4, 4))))

    def test_interior_distance_treats_outside_as_background(self):
        gt = BinaryImage(np.ones((3, 3)))
        interior = interior_distance(gt)
        self.assertEqual(interior[1, 1], 2.0)
        self.assertEqual(interior[0, 0], 1.0)

    def test_stroke_width_of_bar(self):
        """Test a three-pixel-thick bar."""
        gt = np.zeros((9, 20), dtype=bool)
        gt[3:6, 2:18] = True
        self.assertEqual(stroke_width(BinaryImage(gt)), 4)

    def test_stroke_width_of_one_pixel_line(self):
        gt = np.zeros((5, 14), dtype=bool)
        gt[2, 2:12] = True
        self.assertEqual(stroke_width(BinaryImage(gt)), 2)

    def test_stroke_width_of_single_pixel(self):
        gt = np.zeros((5, 5), dtype=bool)
        gt[2, 2] = True
        self.assertEqual(stroke_width(BinaryImage(gt)), 2)


class TestPseudoFMeasure(unittest.TestCase):
    """Test pFM weight maps and the pseudo F-measure."""

    def setUp(self):
        gt = np.zeros((12, 24), dtype=bool)
        gt[4:7, 3:20] = True
        self.gt = BinaryImage(gt)

    def test_weight_map_ranges(self):
        maps = pfm_weight_maps(self.gt)

        self.assertTrue((maps.recall_weights[self.gt.labels] == 1.0).all())
        self.assertTrue((maps.recall_weights >= 0).all() and (maps.recall_weights <= 1).all())
        self.assertTrue((maps.precision_weights >= 1).all() and (maps.precision_weights <= 2).all())
        self.assertTrue((maps.precision_weights[~self.gt.labels] == 1.0).all())

    def test_identity(self):
        self.assertEqual(pseudo_f_measure(self.gt, self.gt).pfm, 1.0)

    def test_pseudo_recall_is_capped(self):
        """Test that extra ink next to the strokes cannot push pseudo-recall above 1."""
        thicker = self.gt.labels.copy()
        thicker[7, 3:20] = True
        result = pseudo_f_measure(BinaryImage(thicker), self.gt)

        self.assertEqual(result.p_recall, 1.0)
        self.assertLess(result.p_precision, 1.0)

    def test_partial_prediction(self):
        half = self.gt.labels.copy()
        half[:, 11:] = False
        result = pseudo_f_measure(BinaryImage(half), self.gt)

        self.assertLess(result.p_recall, 1.0)
        self.assertEqual(result.p_precision, 1.0)

    def test_single_pixel_with_one_extra_neighbour(self):
        """Test the 3x3 hand computation: p-recall 1, p-precision 2/3, pfm 0.8."""
        gt = np.zeros((3, 3), dtype=bool)
        gt[1, 1] = True
        pred = gt.copy()
        pred[1, 2] = True
        result = pseudo_f_measure(BinaryImage(pred), BinaryImage(gt))

        self.assertEqual(pfm_weight_maps(BinaryImage(gt)).stroke_width, 2)
        self.assertEqual(result.p_recall, 1.0)
        self.assertAlmostEqual(result.p_precision, 2 / 3)
        self.assertAlmostEqual(result.pfm, 0.8)

    def test_empty_prediction_is_degenerate(self):
        with self.assertRaises(DegenerateInputError):
            pseudo_f_measure(BinaryImage(np.zeros(self.gt.shape)), self.gt)


class TestScorePair(unittest.TestCase):
    """Test that degenerate sub-metrics become Undefined markers."""

    def test_empty_prediction(self):
        _, gt = drd_fixture()
        scores = score_pair(BinaryImage(np.zeros(gt.shape)), gt)

        self.assertIsInstance(scores.fm, Undefined)
        self.assertIsInstance(scores.pfm, Undefined)
        self.assertTrue(is_defined(scores.drd))
        self.assertTrue(is_defined(scores.psnr))
        self.assertEqual(set(scores.undefined_reasons()), {"fm", "pfm", "recall", "precision", "p_recall",
                                                           "p_precision"})

    def test_empty_ground_truth(self):
        empty = BinaryImage(np.zeros((8, 8)))
        scores = score_pair(empty, empty)

        self.assertIsInstance(scores.fm, Undefined)
        self.assertIsInstance(scores.drd, Undefined)
        self.assertEqual(scores.psnr, math.inf)
        self.assertFalse(is_defined(scores.psnr))

    @hypothesis_settings(max_examples=40, deadline=None)
    @given(arrays(bool, (16, 16)), arrays(bool, (16, 16)))
    def test_bounded_scores(self, pred, gt):
        """Test that defined scores stay in range for arbitrary pairs."""
        scores = score_pair(BinaryImage(pred), BinaryImage(gt))
        for value in (scores.fm, scores.pfm, scores.recall, scores.precision, scores.p_precision):
            if is_defined(value):
                self.assertGreaterEqual(value, 0.0)
                self.assertLessEqual(value, 1.0 + 1e-12)
        if is_defined(scores.drd):
            self.assertGreaterEqual(scores.drd, 0.0)


if __name__ == "__main__":
    unittest.main()
