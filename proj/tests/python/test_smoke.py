import json
import pathlib

import numpy as np
import pytest

import probekit

FIXTURES = pathlib.Path(__file__).resolve().parents[2] / "fixtures"


def read_fixture(name):
    return (FIXTURES / name).read_text(encoding="utf-8")


def test_version():
    assert probekit.__version__


def test_roundtrip_is_stable():
    text = read_fixture("hi_sample.ssf")
    once = probekit.roundtrip_ssf(text)
    assert probekit.roundtrip_ssf(once) == once


def test_validate_reports_errors():
    text = read_fixture("hi_sample.ssf")
    assert probekit.validate_ssf(text) == {"sentences": 12, "errors": []}
    broken = text.replace("\t))", "", 1)
    report = probekit.validate_ssf(broken)
    assert report["sentences"] == 11
    assert len(report["errors"]) == 1
    with pytest.raises(probekit.SsfError):
        probekit.roundtrip_ssf(broken)


def test_dataset_matches_sidecar():
    sidecar = json.loads(read_fixture("expected_labels.json"))
    entry = next(s for s in sidecar["sets"] if s["files"] == ["hi_sample.ssf"])
    got = probekit.build_dataset(
        read_fixture("hi_sample.ssf"),
        language=entry["language"],
        seed=sidecar["seed"],
        source_path="hi_sample.ssf",
    )
    for task, expected in entry["labels"].items():
        assert {ex["example_id"]: ex["label_name"] for ex in got[task]} == expected


def test_perturb_keeps_verbs():
    tokens = [("laDakA", "NN"), ("Gara", "NN"), ("gayA", "VM"), (".", "SYM")]
    out, status = probekit.perturb(tokens, "KeepV")
    assert status == "ok"
    assert out == [("gayA", "VM")]
    assert len(probekit.perturbation_names()) == 13
    with pytest.raises(ValueError):
        probekit.perturb(tokens, "NoSuchKind")


def test_embeddings_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.standard_normal((3, 2, 4)).astype(np.float32)
    path = tmp_path / "emb.prbemb"
    probekit.write_embeddings(str(path), ["a", "b", "c"], data, "toy", "ab" * 32)
    back = probekit.read_embeddings(str(path))
    assert back["ids"] == ["a", "b", "c"]
    assert back["model_name"] == "toy"
    assert back["dataset_digest"] == "ab" * 32
    np.testing.assert_array_equal(back["data"], data)

    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(probekit.EmbeddingError):
        probekit.read_embeddings(str(path))


def test_objective_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((30, 5))
    y = list(rng.integers(0, 3, size=30))
    w = rng.standard_normal((3, 5))
    b = rng.standard_normal(3)
    f, gw, gb = probekit.probe_objective(x, y, w, b, 2.0)
    h = 1e-5
    for i in range(3):
        for j in range(5):
            wp, wm = w.copy(), w.copy()
            wp[i, j] += h
            wm[i, j] -= h
            fd = (probekit.probe_objective(x, y, wp, b, 2.0)[0]
                  - probekit.probe_objective(x, y, wm, b, 2.0)[0]) / (2 * h)
            assert fd == pytest.approx(gw[i, j], rel=1e-5, abs=1e-6)
    assert gb.sum() == pytest.approx(0.0, abs=1e-9)


def test_train_separates_blobs():
    rng = np.random.default_rng(2)
    x = np.vstack([rng.normal(-3, 1, (40, 2)), rng.normal(3, 1, (40, 2))])
    y = [0] * 40 + [1] * 40
    result = probekit.train(x, y, 2)
    assert result["termination"] == "converged"
    pred = np.argmax(x @ result["weights"].T + result["bias"], axis=1)
    assert (pred == np.array(y)).mean() == 1.0
    trace = result["objective_trace"]
    assert all(a >= b for a, b in zip(trace, trace[1:]))


def test_folds_partition():
    y = [0] * 7 + [1] * 13
    folds = probekit.stratified_kfold(y, 5, 0)
    tests = sorted(i for _, test in folds for i in test)
    assert tests == list(range(20))


def test_robustness_helpers():
    assert probekit.robustness_score(0.8, 0.4) == 0.5
    flat = probekit.most_affected_layers([(0, 0.8, 0.8), (1, 0.8, 0.8), (2, 0.8, 0.8)])
    assert flat["equal"] and flat["most_affected"] == []
    dip = probekit.most_affected_layers([(0, 0.8, 0.8), (1, 0.8, 0.4), (2, 0.8, 0.7)])
    assert dip["most_affected"] == [1]
