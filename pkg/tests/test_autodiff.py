import numpy as np
import pytest

from neurocam.graph import ModelGraph, load_checkpoint, save_checkpoint
from neurocam.layers import Fc, Identity, Relu, Sum
from neurocam.optim import Adam, AdamConfig, bce_with_logits, grad_check

from helpers import make_model, randomize


def test_identity_sum_model():
    model = ModelGraph([Identity("in", tap=True), Sum("head")])
    x = np.ones((2, 2))
    logit, taps = model.forward(x)
    assert logit == 4.0
    assert len(taps) == 1
    np.testing.assert_array_equal(taps[0], x)
    _, tap_grads = model.backward(1.0)
    np.testing.assert_array_equal(tap_grads[0], np.ones((2, 2)))


def test_single_fc_layer():
    fc = Fc("fc", 2, 1)
    fc.params["w"][:] = [[1.0, 2.0]]
    model = ModelGraph([fc])
    logit, _ = model.forward(np.array([3.0, 4.0]))
    assert logit == 11.0
    grads, _ = model.backward(1.0)
    np.testing.assert_array_equal(grads["fc.w"], [[3.0, 4.0]])
    np.testing.assert_array_equal(grads["fc.b"], [1.0])


def test_three_layer_model_matches_layer_by_layer_composition():
    rng = np.random.default_rng(7)
    l1, l2, l3 = Fc("a", 5, 4), Fc("b", 4, 3), Fc("c", 3, 1)
    model = randomize(ModelGraph([l1, Relu("r"), l2, l3]), rng)
    x = rng.standard_normal(5)
    # scripted composition, one layer at a time
    h = l1.params["w"] @ x + l1.params["b"]
    h = np.maximum(h, 0.0)
    h = l2.params["w"] @ h + l2.params["b"]
    h = l3.params["w"] @ h + l3.params["b"]
    logit, _ = model.forward(x)
    assert logit == pytest.approx(h[0], abs=0, rel=1e-15)


def test_backward_before_forward_raises():
    model = ModelGraph([Sum("head")])
    with pytest.raises(RuntimeError, match="before forward"):
        model.backward()


def test_forward_deterministic():
    rng = np.random.default_rng(3)
    model, x = make_model("se", rng)
    a = model.forward(x)[0]
    b = model.forward(x)[0]
    assert a == b  # bit identical


@pytest.mark.parametrize("kind", ["fc", "conv3d", "gpc", "se", "residual"])
def test_backward_matches_finite_differences(kind):
    rng = np.random.default_rng(11)
    model, x = make_model(kind, rng)
    assert grad_check(model, x, h=1e-3) < 1e-4


def test_grad_check_exact_for_linear_model():
    rng = np.random.default_rng(5)
    model = randomize(ModelGraph([Fc("fc", 3, 1)]), rng)
    assert grad_check(model, rng.standard_normal(3)) < 1e-10


class TestAdam:
    def test_zero_gradient_leaves_params(self):
        p = np.array([1.5, -2.0])
        opt = Adam(AdamConfig(lr=0.1))
        opt.step({"p": p}, {"p": np.zeros(2)})
        np.testing.assert_array_equal(p, [1.5, -2.0])

    def test_first_step_bias_corrected(self):
        p = np.array([0.0])
        opt = Adam(AdamConfig(lr=0.1))
        opt.step({"p": p}, {"p": np.array([1.0])})
        # mhat = 1, vhat = 1 -> step = -lr/(1+eps)
        assert p[0] == pytest.approx(-0.1, abs=1e-8)

    def test_two_steps_match_scripted_recurrence(self):
        cfg = AdamConfig(lr=0.05)
        p = np.array([0.3])
        opt = Adam(cfg)
        grads = [np.array([0.7]), np.array([-0.2])]
        # scripted oracle
        ref, m, v = 0.3, 0.0, 0.0
        for t, g in enumerate(grads, start=1):
            m = cfg.beta1 * m + (1 - cfg.beta1) * g[0]
            v = cfg.beta2 * v + (1 - cfg.beta2) * g[0] ** 2
            mhat = m / (1 - cfg.beta1 ** t)
            vhat = v / (1 - cfg.beta2 ** t)
            ref -= cfg.lr * mhat / (np.sqrt(vhat) + cfg.eps)
        for g in grads:
            opt.step({"p": p}, {"p": g})
        assert p[0] == pytest.approx(ref, abs=1e-12)


class TestBce:
    def test_z0_y1(self):
        loss, grad = bce_with_logits(0.0, 1, 1.0)
        assert loss == pytest.approx(np.log(2), abs=1e-15)
        assert grad == pytest.approx(-0.5, abs=1e-15)

    def test_z0_y0_weighted(self):
        loss, grad = bce_with_logits(0.0, 0, 2.0)
        assert loss == pytest.approx(2 * np.log(2), abs=1e-15)
        assert grad == pytest.approx(1.0, abs=1e-15)

    def test_gradient_matches_finite_difference(self):
        h = 1e-6
        loss_up, _ = bce_with_logits(3.0 + h, 1, 1.0)
        loss_dn, _ = bce_with_logits(3.0 - h, 1, 1.0)
        _, grad = bce_with_logits(3.0, 1, 1.0)
        assert grad == pytest.approx((loss_up - loss_dn) / (2 * h), rel=1e-6)

    def test_nonnegative(self):
        for z in (-5.0, -0.3, 0.0, 0.3, 5.0):
            for y in (0, 1):
                loss, _ = bce_with_logits(z, y, 1.0)
                assert loss >= 0.0


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(21)
    model, x = make_model("se", rng)
    logit_before = model.forward(x)[0]
    path = tmp_path / "model.ckpt"
    save_checkpoint(model, path, meta={"kind": "test"})
    # clobber, reload, logits must match exactly
    for arr in model.named_params().values():
        arr[...] = 0.0
    meta = load_checkpoint(model, path)
    assert meta == {"kind": "test"}
    assert model.forward(x)[0] == logit_before
