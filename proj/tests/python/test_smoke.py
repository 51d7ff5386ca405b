import json

import numpy as np

import survsel


def test_toy_dataset_shapes():
    data, truth = survsel.generate_toy(
        records=200, relevant=2, noise=3, events=2, censoring_rate=0.2, seed=7, grid_bins=12
    )
    assert len(data) == 200
    assert data.x.shape == (200, 5)
    assert data.num_events == 2
    assert len(truth["relevant"]) == 2
    assert set(truth["relevant"]) <= set(range(5))
    assert data.times.min() >= 0.0
    assert data.times.max() < 12.0
    assert set(np.unique(data.events)) <= {0, 1, 2}
    assert data.feature_names[: 2] == ["Signal1", "Signal2"]


def test_horizon_labels_are_strict_at_the_boundary():
    ds = survsel.Dataset(
        x=np.zeros((3, 1)),
        times=np.array([2.0, 5.0, 2.0]),
        events=np.array([1, 1, 0], dtype=np.int32),
        num_events=1,
    )
    out = survsel.time_fixed_labels(ds, event=1, horizon=5.0)
    assert out["labels"].tolist() == [1, 0, 0]
    assert out["positives"] == 1
    assert out["negatives"] == 2


def test_ranking_recovers_the_signal_features():
    data, truth = survsel.generate_toy(
        records=800, relevant=2, noise=6, events=1, censoring_rate=0.2, seed=11, grid_bins=121
    )
    normalized, _ = survsel.normalize(data)
    ranking = survsel.rank_features(
        normalized, event=1, method="anova", horizons=[12.0, 36.0, 60.0], seed=3
    )
    assert len(ranking["scores"]) == 8
    top2 = {row["feature"] for row in ranking["scores"][:2]}
    assert top2 == set(truth["relevant"])


def test_c_index_matches_hand_counts():
    times = np.array([1.0, 2.0, 3.0])
    events = np.array([1, 1, 1], dtype=np.int32)
    perfect = survsel.c_index(np.array([0.9, 0.5, 0.1]), times, events, event=1, horizon=10.0)
    assert perfect["defined"]
    assert perfect["comparable_pairs"] == 3
    assert perfect["value"] == 1.0
    tied = survsel.c_index(np.array([0.5, 0.5, 0.5]), times, events, event=1, horizon=10.0)
    assert tied["value"] == 0.5


def test_synthetic_augmentation_appends_binary_columns():
    data, _ = survsel.generate_toy(records=60, relevant=2, noise=0, seed=1, grid_bins=12)
    augmented = survsel.augment_synthetic(data, count=4, seed=9)
    assert augmented.x.shape == (60, 6)
    assert augmented.feature_names[2:] == ["Synth1", "Synth2", "Synth3", "Synth4"]
    assert set(np.unique(augmented.x[:, 2:])) <= {0.0, 1.0}


def test_experiment_roundtrip(tmp_path):
    out = tmp_path / "run"
    manifest = {
        "output_dir": str(out),
        "seed": 20260816,
        "variant": "plain",
        "horizons": [3.0, 6.0, 9.0],
        "folds": 5,
        "data": {
            "toy": {
                "records": 150,
                "relevant": 2,
                "noise": 1,
                "events": 1,
                "censoring_rate": 0.2,
                "seed": 5,
                "grid_bins": 12,
            }
        },
        "hyperparams": {
            "beta": 1.0,
            "sigma": 1.0,
            "shared_layers": 1,
            "shared_width": 8,
            "cause_layers": 1,
            "cause_width": 8,
            "selection_size": 2,
            "gamma": 1e-4,
        },
        "train": {"learning_rate": 1e-2, "batch_size": 32, "max_epochs": 5, "patience": 5},
    }
    result = survsel.run_experiment(json.dumps(manifest))
    assert result["num_events"] == 1
    assert len(result["folds"]) == 5
    assert result["best_hyperparams"]["shared_width"] == 8
    assert len(result["summary"]) == 3
    for name in [
        "results_grid.csv",
        "results_summary.csv",
        "best_hyperparams.json",
        "run_metadata.json",
        "fold0_model.json",
    ]:
        assert (out / name).exists(), name

    model = survsel.load_model(str(out / "fold0_model.json"))
    assert model.num_events == 1
    assert model.num_bins == 12
    assert model.variant == "plain"
    assert model.input_dim == 3

    data, _ = survsel.generate_toy(
        records=150, relevant=2, noise=1, events=1, censoring_rate=0.2, seed=5, grid_bins=12
    )
    prob = model.predict(data.x)
    assert prob.shape == (150, 1, 12)
    assert (prob >= 0.0).all()
    np.testing.assert_allclose(prob.sum(axis=(1, 2)), 1.0, atol=1e-9)

    grid = model.evaluate(data, horizons=[3.0, 6.0, 9.0])
    assert grid["defined_cells"] >= 1
    assert len(grid["cells"]) == 3
    for cell in grid["cells"]:
        if cell["defined"]:
            assert 0.0 <= cell["value"] <= 1.0

    report = model.importance(data, horizons=[6.0], permutations=2, seed=1)
    assert report["importance"].shape == (1, 3)
    assert report["permutations"] == 2
