import json
import pathlib

import pytest

import protoeval

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def fixture(name):
    return (FIXTURES / name).read_text()


def test_iou():
    assert protoeval.iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0
    assert protoeval.iou((0, 0, 10, 10), (10, 0, 20, 10)) == 0.0
    assert protoeval.iou((0, 0, 10, 10), (5, 0, 15, 10)) == pytest.approx(1 / 3)


def test_evaluate_fixture():
    results = protoeval.evaluate(fixture("synthetic/manifest.json"), fixture("synthetic/detections.json"))
    assert [r["iou_threshold"] for r in results] == [0.5, 0.75]
    assert results[0]["map"] == pytest.approx(5 / 6)
    assert results[1]["map"] == pytest.approx(0.625)
    mdf = results[1]["per_class"][0]
    assert (mdf["class"], mdf["n_tp"], mdf["n_fp"]) == ("mdf", 1, 2)


def test_image_metrics():
    m = protoeval.image_metrics(72, 4, 168, 3)
    assert f"{m['precision']:.3f}" == "0.947"
    assert f"{m['accuracy']:.3f}" == "0.972"
    assert protoeval.image_metrics(0, 0, 0, 0)["precision"] is None


def test_training_arithmetic():
    assert protoeval.steps_per_epoch(1243, 64) == 20
    assert protoeval.epochs_from_steps(400000, 863) == 463
    assert protoeval.steps_from_epochs(11000, 14) == 154000
    with pytest.raises(protoeval.ValidationError):
        protoeval.steps_per_epoch(10, 0)


def test_split_and_accounting():
    manifest = fixture("synthetic/manifest.json")
    assert protoeval.canonicalize_manifest(protoeval.canonicalize_manifest(manifest)) == \
        protoeval.canonicalize_manifest(manifest)
    split = protoeval.generate_split(manifest, (0.34, 0.33, 0.33), seed=5)
    assert sorted(split) == ["img1", "img2", "img3"]
    acc = protoeval.accounting(manifest, split)
    assert acc["total"] == {"images": 3, "objects": 3, "positives": 2, "negatives": 1}
    assert protoeval.split_sizes(1624, (0.765, 0.083, 0.152)) == [1242, 135, 247]


def test_normalized_labels():
    text = protoeval.normalized_to_manifest("a.jpg", "0 0.5 0.5 0.5 0.5\n", 200, 100, ["mcu"])
    summary = protoeval.manifest_summary(text)
    assert summary["images"][0]["objects"] == [(0, (50.0, 25.0, 150.0, 75.0))]


def test_errors_and_cli():
    with pytest.raises(protoeval.ParseError):
        protoeval.canonicalize_manifest('{"class_names": [], "images": [], "extra": 1}')
    code, out, _ = protoeval.run_cli(["ledger"])
    assert code == 0
    assert out.startswith("model,steps,epochs")
    assert protoeval.run_cli(["split"])[0] == 64
    assert json.loads(protoeval.canonicalize_manifest(fixture("synthetic/manifest.json")))["class_names"] == ["mdf", "plywood"]
