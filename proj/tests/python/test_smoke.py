import math

import numpy as np
import pytest

import rsit


def test_style_pool_matches_numpy():
    rng = np.random.default_rng(0)
    f = rng.normal(size=(3, 5, 4))
    s = rsit.style_pool(f)
    assert s.shape == (3, 2)
    np.testing.assert_allclose(s[:, 0], f.reshape(3, -1).mean(axis=1), atol=1e-12)
    np.testing.assert_allclose(s[:, 1], f.reshape(3, -1).std(axis=1), atol=1e-12)


def test_upper_correlation_example():
    out = rsit.upper_correlation(np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(out, [1, 2, 3, 0, 4, 6, 0, 0, 9])


def test_losses():
    assert rsit.gan_loss_generator([1.0, 1.0]) == pytest.approx(0.0)
    assert rsit.gan_loss_discriminator([1.0], [0.0]) == pytest.approx(0.0)
    a = np.zeros((3, 2, 2))
    assert rsit.cycle_loss(a + 0.5, a) == pytest.approx(0.5)
    assert rsit.style_loss(np.ones(4), np.zeros(4)) == pytest.approx(1.0)


def test_lr_schedule():
    assert rsit.lr_schedule(0) == pytest.approx(2e-4)
    assert rsit.lr_schedule(150) == pytest.approx(1e-4)
    assert rsit.lr_schedule(200) == pytest.approx(0.0)
    with pytest.raises(IndexError):
        rsit.lr_schedule(201)


def test_metrics_identity_and_shift():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(40, 4))
    assert abs(rsit.fid(a, a)) < 1e-8
    assert rsit.fid(a, a + 1.0) == pytest.approx(4.0, rel=1e-6)
    assert rsit.kid(a, a) < rsit.kid(a, a + 1.0)
    p = np.full((5, 10), 0.1)
    assert rsit.inception_score(p) == pytest.approx(1.0)


def test_synthetic_scene_and_change_detection():
    scene = rsit.generate_synthetic(size=64, seed=3)
    assert scene["summer"].shape == (3, 64, 64)
    assert scene["change_mask"].shape == (64, 64)
    assert scene["change_mask"].sum() > 0
    d = rsit.difference_image(scene["summer"], scene["summer"])
    assert d.shape == (64, 64) and np.all(d == 0)
    t1 = np.zeros((3, 48, 48))
    t2 = t1.copy()
    t2[:, 16:32, 16:32] = 1.0
    cm = rsit.pcakm(rsit.difference_image(t1, t2))
    s = rsit.score_change_map(cm, (t2[0] > 0).astype(float))
    assert s["pcc"] > 95.0
    with pytest.raises(ValueError):
        rsit.difference_image(t1, np.zeros((3, 8, 8)))


def test_trainer_step_and_checkpoint(tmp_path):
    t = rsit.trainer(scale=0.0625, blocks=2, seed=4, history_capacity=4)
    rng = np.random.default_rng(2)
    x = rng.uniform(-1, 1, size=(3, 16, 16))
    y = rng.uniform(-1, 1, size=(3, 16, 16))
    r = t.train_step([x], [y], 2e-4)
    assert set(r) == {"g_xy", "g_yx", "d_x", "d_y"}
    assert all(math.isfinite(v) for part in r.values() for v in part.values())
    path = tmp_path / "m.rsit"
    t.save(path)
    m = rsit.TranslationModel.load(path)
    np.testing.assert_array_equal(m.translate(x, "xy"), t.translate(x, "xy"))
    out = m.translate(x, "yx")
    assert out.shape == x.shape and np.all(np.abs(out) <= 1.0)
    with pytest.raises(ValueError):
        m.translate(x, "sideways")
    with pytest.raises(KeyError):
        rsit.trainer(nonsense=1)
