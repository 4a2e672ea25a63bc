import numpy as np
import pytest

from neurocam.layers import (EdgePool, GraphPathConv, NodePool, SqueezeExcite)
from neurocam.nets import (BcGcnSeConfig, Cnn3dConfig, build_bcgcnse,
                           build_resnet3d, conv_out_shape, stage_shapes)


class TestGpcRule:
    def test_identity_graph(self):
        gpc = GraphPathConv("g", 1, 1)
        gpc.params["theta"][:] = [[1.0]]
        eye = np.eye(6)
        gpc.base = eye
        out = gpc.forward(eye[None])
        np.testing.assert_allclose(out[0], eye, atol=1e-15)

    def test_two_path_composition(self):
        # single edge (1,2): (A@A + A@A)/2 = A^2 lights the endpoints
        a = np.zeros((3, 3))
        a[1, 2] = a[2, 1] = 1.0
        gpc = GraphPathConv("g", 1, 1)
        gpc.params["theta"][:] = [[1.0]]
        gpc.base = a
        out = gpc.forward(a[None])[0]
        assert out[1, 1] == 1.0
        assert out[2, 2] == 1.0
        assert out[1, 2] == 0.0

    def test_bias_only(self):
        gpc = GraphPathConv("g", 1, 2)
        gpc.params["b"][:] = [0.7, 0.0]
        gpc.base = np.zeros((4, 4))
        out = gpc.forward(np.zeros((1, 4, 4)))
        np.testing.assert_array_equal(out[0], np.full((4, 4), 0.7))
        np.testing.assert_array_equal(out[1], np.zeros((4, 4)))


class TestSeRule:
    def test_zero_weights_halve(self):
        se = SqueezeExcite("se", 3, 2)
        rng = np.random.default_rng(0)
        x = rng.random((3, 5, 5))
        np.testing.assert_allclose(se.forward(x), x / 2.0, atol=1e-15)

    def test_scalar_closed_form(self):
        se = SqueezeExcite("se", 1, 1)
        se.params["w1"][:] = [[2.0]]
        se.params["w2"][:] = [[3.0]]
        x = np.full((1, 2, 2), 0.5)
        # z = 0.5, h = relu(1.0) = 1, s = sigmoid(3)
        s = 1.0 / (1.0 + np.exp(-3.0))
        np.testing.assert_allclose(se.forward(x), x * s, atol=1e-15)

    def test_squeeze_linear_in_scale(self):
        se = SqueezeExcite("se", 2, 2)
        rng = np.random.default_rng(1)
        x = rng.random((2, 4, 4))
        z1 = x.reshape(2, -1).mean(axis=1)
        z2 = (3.0 * x).reshape(2, -1).mean(axis=1)
        np.testing.assert_allclose(z2, 3.0 * z1, atol=1e-15)


class TestPools:
    def test_edge_pool_constant(self):
        ep = EdgePool("ep")
        out = ep.forward(np.full((2, 5, 5), 0.3))
        np.testing.assert_allclose(out, 0.3)

    def test_edge_pool_zero_row(self):
        ep = EdgePool("ep")
        x = np.random.default_rng(2).random((1, 4, 4))
        x[0, 2, :] = 0.0
        assert ep.forward(x)[0, 2] == 0.0

    def test_edge_pool_row_means(self):
        ep = EdgePool("ep")
        x = np.random.default_rng(3).random((3, 6, 6))
        np.testing.assert_allclose(ep.forward(x), x.mean(axis=2), atol=1e-15)

    def test_node_pool(self):
        np_layer = NodePool("np")
        x = np.random.default_rng(4).random((3, 7))
        np.testing.assert_allclose(np_layer.forward(x), x.mean(axis=1),
                                   atol=1e-15)
        one_hot = np.zeros((2, 132))
        one_hot[0, 13] = 1.0
        out = np_layer.forward(one_hot)
        assert out[0] == pytest.approx(1 / 132)
        assert out[1] == 0.0


class TestBcGcnSeBuilder:
    def test_default_has_three_taps(self):
        model = build_bcgcnse(seed=0)
        taps = [l.name for l in model.tap_layers]
        assert taps == ["se1", "se2", "se3"]

    def test_layer_order(self):
        model = build_bcgcnse(seed=0)
        kinds = [l.name for l in model.layers]
        assert kinds == ["gpc1", "se1", "gpc2", "se2", "gpc3", "se3",
                         "edge_pool", "node_pool", "fc1", "fc1_relu",
                         "fc2", "fc2_relu", "fc_out"]

    def test_parameter_count_formula(self):
        cfg = BcGcnSeConfig(n_nodes=10, channels=(1, 1, 1), se_reduction=4,
                            fc_widths=(1, 1))
        model = build_bcgcnse(cfg, seed=0)
        # gpc: 3 * (1*1 theta + 1 bias); se: 3 * (1*1 + 1*1)
        # fc1: 1*1+1, fc2: 1*1+1, fc_out: 1*1+1
        assert model.param_count() == 6 + 6 + 6

    def test_same_seed_identical(self):
        a = build_bcgcnse(seed=11)
        b = build_bcgcnse(seed=11)
        for k, v in a.named_params().items():
            np.testing.assert_array_equal(v, b.named_params()[k])

    def test_different_seed_differs(self):
        a = build_bcgcnse(seed=1)
        b = build_bcgcnse(seed=2)
        assert any((v != b.named_params()[k]).any()
                   for k, v in a.named_params().items())

    def test_invalid_width(self):
        with pytest.raises(ValueError):
            build_bcgcnse(BcGcnSeConfig(channels=(0, 2, 2)))

    def test_forward_shape(self):
        cfg = BcGcnSeConfig(n_nodes=12, channels=(2, 3, 4), se_reduction=2,
                            fc_widths=(4, 2))
        model = build_bcgcnse(cfg, seed=3)
        rng = np.random.default_rng(5)
        a = np.abs(rng.standard_normal((12, 12)))
        a = (a + a.T) / 2
        np.fill_diagonal(a, 0.0)
        logit, taps = model.forward(a[None])
        assert np.isfinite(logit)
        assert [t.shape for t in taps] == [(2, 12, 12), (3, 12, 12), (4, 12, 12)]


class TestResnet3dBuilder:
    def test_default_has_four_taps(self):
        model = build_resnet3d(Cnn3dConfig(input_shape=(32, 32, 32)), seed=0)
        taps = [l.name for l in model.tap_layers]
        assert taps == ["stage1_block2", "stage2_block2",
                        "stage3_block2", "stage4_block2"]

    def test_stage_shapes_stride_chain(self):
        cfg = Cnn3dConfig(input_shape=(115, 144, 118))
        shapes = stage_shapes(cfg)
        assert shapes["stem"] == (58, 72, 59)
        assert shapes["pool"] == (29, 36, 30)
        assert shapes["stage1"] == (29, 36, 30)
        assert shapes["stage2"] == (15, 18, 15)
        assert shapes["stage3"] == (8, 9, 8)
        assert shapes["stage4"] == (4, 5, 4)

    def test_forward_tap_shapes_match_stride_arithmetic(self):
        cfg = Cnn3dConfig(input_shape=(32, 32, 32), stem_channels=2,
                          stage_channels=(2, 3, 4, 5), fc_widths=(8, 4))
        model = build_resnet3d(cfg, seed=1)
        x = np.random.default_rng(6).standard_normal((1, 32, 32, 32))
        logit, taps = model.forward(x)
        shapes = stage_shapes(cfg)
        assert np.isfinite(logit)
        for tap, stage, channels in zip(taps, ("stage1", "stage2", "stage3",
                                               "stage4"), (2, 3, 4, 5)):
            assert tap.shape == (channels,) + shapes[stage]

    def test_same_seed_identical(self):
        cfg = Cnn3dConfig(input_shape=(16, 16, 16), stem_channels=2,
                          stage_channels=(2, 2, 2, 2), fc_widths=(4, 2))
        a = build_resnet3d(cfg, seed=9)
        b = build_resnet3d(cfg, seed=9)
        for k, v in a.named_params().items():
            np.testing.assert_array_equal(v, b.named_params()[k])

    def test_wrong_stage_count(self):
        with pytest.raises(ValueError, match="4 stage"):
            build_resnet3d(Cnn3dConfig(stage_channels=(8, 16)))

    def test_conv_out_shape(self):
        assert conv_out_shape((115, 144, 118), 7, 2, 3) == (58, 72, 59)
        assert conv_out_shape((10, 10, 10), 3, 1, 1) == (10, 10, 10)

    def test_logit_finite_for_extreme_input(self):
        cfg = Cnn3dConfig(input_shape=(16, 16, 16), stem_channels=2,
                          stage_channels=(2, 2, 2, 2), fc_widths=(4, 2))
        model = build_resnet3d(cfg, seed=2)
        x = np.full((1, 16, 16, 16), 1e6)
        logit, _ = model.forward(x)
        assert np.isfinite(logit)
