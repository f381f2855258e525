import math

import numpy as np
import pytest

import neurphy


def test_pendulum_step_hand_value():
    theta, omega = neurphy.pendulum_step(-math.pi, 4.0)
    assert theta == pytest.approx(-math.pi + 0.4, abs=1e-12)
    assert omega == pytest.approx(3.8, abs=1e-12)


def test_orbit_params():
    p = neurphy.orbit_params(2.0, 0.0, 0.7)
    assert p["e"] == pytest.approx(0.02, rel=1e-12)
    assert p["h"] == pytest.approx(1.4, rel=1e-12)
    with pytest.raises(neurphy.NeurPhyError):
        neurphy.orbit_params(2.0, 0.0, 2.0)


def test_generate_and_round_trip(tmp_path):
    tasks = neurphy.generate(neurphy.configure(l_steps=2, m_steps=3))
    assert len(tasks) == 6
    obs = tasks[0].observations
    assert obs.shape == (101, 2)
    assert set(tasks[0].globals) == {"l", "m"}
    # The bob stays on its circle.
    l = tasks[0].globals["l"]
    assert np.allclose(np.hypot(obs[:, 0], obs[:, 1]), l)

    path = tmp_path / "tasks.jsonl"
    neurphy.save_tasks(path, tasks)
    assert neurphy.load_tasks(path) == tasks


def test_orbit_grid():
    tasks = neurphy.generate({"system": "orbit"})
    assert len(tasks) == 27
    assert tasks[0].state_names == ["r", "theta"]


def test_train_predict_checkpoint(tmp_path):
    cfg = neurphy.configure(
        l_steps=2, m_steps=2, epochs=2, D=2, batch_tasks=2,
        context_widths=[8], recognition_widths=[8], transition_widths=[8], decoder_widths=[8],
    )
    tasks = neurphy.generate(cfg)
    model, history = neurphy.train(tasks, cfg)
    assert len(history) == 2
    assert set(history[0]) == {"recon", "kl1", "kl2", "total"}

    pred = model.predict(tasks[0], start=30, horizon=10)
    assert pred.shape == (11, 2)
    r = model.global_representation(tasks[0], n_c=5, seed=1)
    assert len(r) == 3

    path = tmp_path / "m.nphy"
    neurphy.save_checkpoint(model, cfg, path)
    back, back_cfg = neurphy.load_checkpoint(path)
    assert back_cfg["epochs"] == "2"
    assert np.array_equal(back.predict(tasks[0], 30, 10), pred)

    with pytest.raises(neurphy.NeurPhyError):
        model.predict(tasks[0], start=95, horizon=10)


def test_r2_fit_exact_quadratic():
    xs = [[x / 10.0] for x in range(-10, 11)]
    ys = [3.0 + 2.0 * x[0] - x[0] ** 2 for x in xs]
    assert neurphy.r2_fit(xs, ys, 2) == pytest.approx(1.0, abs=1e-9)


def test_cli_usage_error():
    assert neurphy.run_cli(["eval", "--run", "/nonexistent", "--stage", "bogus"]) == 2
    assert neurphy.run_cli(["--version"]) == 0
