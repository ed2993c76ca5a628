import json

import numpy as np
import pytest
from PIL import Image

from hsims import io as hio
from hsims.cli import EXIT_INPUT, EXIT_OK, EXIT_USAGE, main
from hsims.core import HyperCube
from hsims.preprocess import fit_mnf, inverse_mnf, apply_mnf, normalize_cube

SPEC = {
    "height": 12,
    "width": 12,
    "seed": 1,
    "clusters": [
        {"mean": [0.0, 0.0, 0.0], "covariance": [[0.25, 0, 0], [0, 0.0009, 0], [0, 0, 0.0009]],
         "region": [0, 0, 12, 6]},
        {"mean": [0.5, 0.5, 0.3], "covariance": [[0.0009, 0, 0], [0, 0.25, 0], [0, 0, 0.0009]],
         "region": [0, 6, 12, 12]},
    ],
}


@pytest.fixture
def synth_files(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(SPEC))
    assert main(["synth", str(spec), str(tmp_path / "s")]) == EXIT_OK
    return tmp_path / "s_cube.json", tmp_path / "s_gt.json"


def test_synth_writes_cube_and_gt(synth_files):
    cube_h, gt_h = synth_files
    assert hio.load_cube(cube_h).shape == (12, 12, 3)
    assert hio.load_ground_truth(gt_h).labels.max() == 2


def test_synth_refuses_overwrite(synth_files, tmp_path, capsys):
    spec = tmp_path / "spec.json"
    assert main(["synth", str(spec), str(tmp_path / "s")]) == EXIT_USAGE
    assert "--force" in capsys.readouterr().err
    assert main(["synth", str(spec), str(tmp_path / "s"), "--force"]) == EXIT_OK


def test_synth_missing_field(tmp_path, capsys):
    doc = json.loads(json.dumps(SPEC))
    del doc["clusters"][1]["covariance"]
    spec = tmp_path / "bad.json"
    spec.write_text(json.dumps(doc))
    assert main(["synth", str(spec), str(tmp_path / "s")]) == EXIT_INPUT
    assert "clusters[1].covariance" in capsys.readouterr().err


def test_mnf_full_and_reduced(synth_files, tmp_path):
    cube_h, _ = synth_files
    out = tmp_path / "m.json"
    assert main(["mnf", str(cube_h), str(out), "--kept", "2"]) == EXIT_OK
    assert hio.load_cube(out).bands == 2
    assert main(["mnf", str(cube_h), str(out), "--kept", "4"]) == EXIT_USAGE


def test_mnf_full_basis_is_lossless(synth_files, tmp_path):
    cube_h, _ = synth_files
    out = tmp_path / "full.json"
    assert main(["mnf", str(cube_h), str(out), "--kept", "3"]) == EXIT_OK
    reduced = hio.load_cube(out)
    cube = normalize_cube(hio.load_cube(cube_h))
    model = fit_mnf(cube, 3)
    back = inverse_mnf(model, reduced)
    # the file stores float32 samples
    np.testing.assert_allclose(back.data, cube.data, atol=1e-5)
    np.testing.assert_allclose(apply_mnf(model, cube).data, reduced.data, atol=1e-5)


def test_segment_and_eval(synth_files, tmp_path, capsys):
    cube_h, gt_h = synth_files
    labels_h, png = tmp_path / "lab.json", tmp_path / "lab.png"
    rc = main(["segment", str(cube_h), "--k", "2", "--lambda", "1e-3", "--eps", "1e-3", "--seed", "0",
               "--out-labels", str(labels_h), "--out-png", str(png)])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "iter   1" in out
    assert Image.open(png).size == (12, 12)
    csv = tmp_path / "scores.csv"
    assert main(["eval", str(labels_h), str(gt_h), "--out-csv", str(csv), "--seed", "0"]) == EXIT_OK
    oa = float(csv.read_text().splitlines()[1].split(",")[0])
    assert oa >= 0.99
    # the same run again is bit-identical
    labels_h2 = tmp_path / "lab2.json"
    main(["segment", str(cube_h), "--k", "2", "--lambda", "1e-3", "--eps", "1e-3", "--seed", "0",
          "--out-labels", str(labels_h2)])
    np.testing.assert_array_equal(hio.load_labels(labels_h), hio.load_labels(labels_h2))


def test_segment_config_file_and_overrides(synth_files, tmp_path):
    cube_h, _ = synth_files
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"k": 2, "lambda": 0.01, "mode": "ms2", "outer_max": 3}))
    assert main(["segment", str(cube_h), "--config", str(cfg)]) == EXIT_OK
    assert main(["segment", str(cube_h), "--config", str(cfg), "--mode", "robust"]) == EXIT_USAGE
    cfg.write_text("{broken")
    assert main(["segment", str(cube_h), "--config", str(cfg)]) == EXIT_USAGE


@pytest.mark.parametrize("extra", [
    ["--k", "2", "--lambda", "0", "--eps", "0.1"],
    ["--k", "2", "--eps", "0.1"],
    ["--k", "1", "--lambda", "0.1", "--eps", "0.1"],
    ["--k", "2", "--lambda", "0.1"],
])
def test_segment_rejects_bad_hyperparameters(synth_files, extra):
    cube_h, _ = synth_files
    assert main(["segment", str(cube_h)] + extra) == EXIT_USAGE


def test_segment_missing_input(tmp_path, capsys):
    rc = main(["segment", str(tmp_path / "nope.json"), "--k", "2", "--lambda", "0.1", "--eps", "0.1"])
    assert rc == EXIT_INPUT
    assert capsys.readouterr().err.startswith("error[input]")


def test_eval_identity_and_permutation(tmp_path, capsys):
    gt = np.array([[1, 1, 2], [2, 3, 3]], dtype=np.uint16)
    hio.save_ground_truth(hio.GroundTruth(gt), tmp_path / "gt.json")
    hio.save_labels(gt, tmp_path / "same.json")
    hio.save_labels((4 - gt).astype(np.uint16), tmp_path / "perm.json")
    assert main(["eval", str(tmp_path / "same.json"), str(tmp_path / "gt.json")]) == EXIT_OK
    first = capsys.readouterr().out
    assert "OA     1.000000" in first
    assert main(["eval", str(tmp_path / "perm.json"), str(tmp_path / "gt.json")]) == EXIT_OK
    second = capsys.readouterr().out
    assert first.splitlines()[:3] == second.splitlines()[:3]


def test_eval_size_mismatch(tmp_path):
    hio.save_ground_truth(hio.GroundTruth(np.ones((2, 2), dtype=np.uint16)), tmp_path / "gt.json")
    hio.save_labels(np.ones((2, 3), dtype=np.uint16), tmp_path / "l.json")
    assert main(["eval", str(tmp_path / "l.json"), str(tmp_path / "gt.json")]) == EXIT_INPUT


def test_threads_env(synth_files, tmp_path, monkeypatch):
    cube_h, _ = synth_files
    monkeypatch.setenv("HSIMS_THREADS", "x")
    assert main(["mnf", str(cube_h), str(tmp_path / "o.json"), "--kept", "1"]) == EXIT_USAGE
    monkeypatch.setenv("HSIMS_THREADS", "1")
    assert main(["mnf", str(cube_h), str(tmp_path / "o.json"), "--kept", "1"]) == EXIT_OK


def test_degenerate_cube_is_numeric_error(tmp_path):
    hio.save_cube(HyperCube(np.ones((3, 3, 2))), tmp_path / "c.json")
    assert main(["mnf", str(tmp_path / "c.json"), str(tmp_path / "o.json"), "--kept", "1"]) == 4
