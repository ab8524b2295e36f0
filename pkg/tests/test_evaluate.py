import numpy as np
import pytest

from dogblob import (
    Blob,
    BlobSet,
    DetectionParams,
    add_noise,
    box_iou,
    match_voc,
    parity,
    render_scene,
)
from dogblob.evaluate import write_parity_csv, write_report_json
from dogblob.synth import GroundTruthCircle


def preds_from(circles, responses=None):
    responses = responses or [1.0 - 0.01 * i for i in range(len(circles))]
    blobs = tuple(
        Blob(x=int(round(x)), y=int(round(y)), sigma=r / np.sqrt(2), radius=r, response=resp)
        for (x, y, r), resp in zip(circles, responses)
    )
    return BlobSet(blobs=blobs, source_shape=(200, 200), params=DetectionParams())


def truths_from(circles):
    return [GroundTruthCircle(x=x, y=y, r=r) for x, y, r in circles]


def pixel_count_iou_oracle(x1, y1, r1, x2, y2, r2):
    """Count integer grid points inside each inclusive box directly."""
    def pixels(x, y, r):
        xs = range(int(np.ceil(x - r)), int(np.floor(x + r)) + 1)
        ys = range(int(np.ceil(y - r)), int(np.floor(y + r)) + 1)
        return {(a, b) for a in xs for b in ys}

    p1, p2 = pixels(x1, y1, r1), pixels(x2, y2, r2)
    return len(p1 & p2) / len(p1 | p2)


class TestBoxIou:
    def test_matches_pixel_counting_on_integer_boxes(self):
        cases = [
            (10, 10, 5, 12, 10, 5),
            (10, 10, 5, 10, 10, 5),
            (0, 0, 3, 10, 10, 3),
            (20, 20, 7, 25, 23, 4),
            (5, 5, 2, 6, 5, 2),
        ]
        for x1, y1, r1, x2, y2, r2 in cases:
            assert box_iou(x1, y1, r1, x2, y2, r2) == pytest.approx(
                pixel_count_iou_oracle(x1, y1, r1, x2, y2, r2), abs=1e-12
            )

    def test_example_offset_pair_is_tp_at_half(self):
        iou = box_iou(10, 10, 5, 12, 10, 5)
        assert iou >= 0.5


class TestMatchVoc:
    def test_exact_match_gives_perfect_scores(self):
        circles = [(20, 20, 5), (60, 40, 8), (100, 90, 4)]
        report = match_voc(preds_from(circles), truths_from(circles))
        assert report.tp == 3 and report.fp == 0 and report.fn == 0
        assert report.precision == 1.0 and report.recall == 1.0

    def test_empty_predictions_vacuous_precision(self):
        report = match_voc(preds_from([]), truths_from([(20, 20, 5)]))
        assert report.precision == 1.0
        assert report.recall == 0.0
        assert report.fn == 1

    def test_empty_truths_vacuous_recall(self):
        report = match_voc(preds_from([(20, 20, 5)]), [])
        assert report.recall == 1.0
        assert report.precision == 0.0

    def test_each_truth_matched_at_most_once(self):
        # two predictions on one truth: one TP, one FP
        report = match_voc(
            preds_from([(20, 20, 5), (21, 20, 5)]), truths_from([(20, 20, 5)])
        )
        assert report.tp == 1 and report.fp == 1 and report.fn == 0

    def test_strongest_prediction_claims_the_truth(self):
        preds = preds_from([(21, 20, 5), (20, 20, 5)], responses=[0.5, 0.9])
        report = match_voc(preds, truths_from([(20, 20, 5)]))
        assert report.tp == 1
        matched_pred = report.matches[0][0]
        assert preds.blobs[matched_pred].response == 0.9

    def test_lowering_threshold_never_decreases_tp(self):
        rng = np.random.default_rng(61)
        circles = [(float(rng.uniform(20, 180)), float(rng.uniform(20, 180)), float(rng.uniform(3, 9))) for _ in range(12)]
        jittered = [(x + rng.uniform(-3, 3), y + rng.uniform(-3, 3), r * rng.uniform(0.7, 1.3)) for x, y, r in circles]
        preds = preds_from(jittered)
        truths = truths_from(circles)
        last_tp = None
        for thr in (0.9, 0.7, 0.5, 0.3, 0.1):
            tp = match_voc(preds, truths, thr).tp
            if last_tp is not None:
                assert tp >= last_tp
            last_tp = tp

    def test_tp_bounded_by_smaller_side(self):
        report = match_voc(
            preds_from([(20, 20, 5), (60, 60, 5)]), truths_from([(20, 20, 5)])
        )
        assert report.tp <= 1

    def test_iou_threshold_validation(self):
        with pytest.raises(ValueError):
            match_voc(preds_from([]), [], iou_threshold=0.0)

    def test_report_json(self, tmp_path):
        report = match_voc(preds_from([(20, 20, 5)]), truths_from([(20, 20, 5)]))
        p = tmp_path / "report.json"
        write_report_json(p, report)
        import json

        doc = json.loads(p.read_text())
        assert doc["tp"] == 1 and doc["precision"] == 1.0


@pytest.fixture(scope="module")
def scenes():
    return [
        add_noise(render_scene(192, 192, 8, (4.0, 10.0), seed=seed), seed=seed + 100)
        for seed in range(3)
    ]


class TestParity:
    def test_identical_params_zero_differences(self, scenes):
        params = DetectionParams(min_sigma=2.5, max_sigma=8.0, n_bin=8)
        stats = parity(
            [s.image for s in scenes],
            params,
            params,
            [s.truths for s in scenes],
        )
        assert np.all(stats.dp == 0.0)
        assert np.all(stats.dr == 0.0)
        assert stats.mean_dp == 0.0 and stats.std_dr == 0.0

    def test_backend_parity_tight(self, scenes):
        base = dict(min_sigma=2.5, max_sigma=8.0, n_bin=8)
        stats = parity(
            [s.image for s in scenes],
            DetectionParams(**base, backend="direct"),
            DetectionParams(**base, backend="fft"),
            [s.truths for s in scenes],
        )
        assert np.abs(stats.dp).mean() <= 1e-2
        assert np.abs(stats.dr).mean() <= 1e-2

    def test_mismatched_ladders_rejected(self, scenes):
        with pytest.raises(ValueError, match="ladder"):
            parity(
                [s.image for s in scenes],
                DetectionParams(min_sigma=1, max_sigma=8, n_bin=8),
                DetectionParams(min_sigma=2, max_sigma=8, n_bin=8),
                [s.truths for s in scenes],
            )

    def test_parity_csv(self, scenes, tmp_path):
        params = DetectionParams(min_sigma=2.5, max_sigma=8.0, n_bin=8)
        stats = parity(
            [s.image for s in scenes], params, params, [s.truths for s in scenes]
        )
        p = tmp_path / "parity.csv"
        write_parity_csv(p, stats)
        lines = p.read_text().splitlines()
        assert lines[0] == "image,precision_a,recall_a,precision_b,recall_b,dp,dr"
        assert len([l for l in lines if not l.startswith("#")]) == 4
        assert lines[-2].startswith("# mean_dp=")
