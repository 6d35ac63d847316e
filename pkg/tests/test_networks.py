import json

import numpy as np
import pytest

from prunelab.circulant import build_full_map, flatten_maps, pad_kernel
from prunelab.networks import (
    Activation,
    CnnModel,
    FcnModel,
    MaskSet,
    activation,
    all_ones_masks,
    compression_ratio,
    estimate_sup_gap,
    expand_filter_mask,
    forward_cnn,
    forward_fcn,
    load_model,
    model_from_dict,
    model_to_dict,
    save_model,
)
from prunelab.sampling import SeedSpec, sample_unit_sphere

RNG = np.random.default_rng(4242)
SEED = SeedSpec(13579)

RELU = activation("relu")
IDENT = activation("identity")


def small_fcn(l=3, d=4, act=None, scale=1.0):
    act = act or RELU
    weights = tuple(scale * RNG.standard_normal((d, d)) for _ in range(l))
    return FcnModel(weights, (act,) * (l - 1))


class TestActivation:
    def test_fixes_zero(self):
        x = np.zeros(5)
        for kind in ("relu", "tanh", "identity"):
            np.testing.assert_array_equal(activation(kind).apply(x), x)

    def test_lipschitz_spot_checks(self):
        a = RNG.standard_normal(1000)
        b = RNG.standard_normal(1000)
        for kind in ("relu", "tanh", "identity"):
            f = activation(kind)
            assert np.all(np.abs(f.apply(a) - f.apply(b)) <= f.lipschitz * np.abs(a - b) + 1e-15)

    def test_rejects_unknown(self):
        with pytest.raises(ValueError):
            activation("gelu")
        with pytest.raises(ValueError):
            Activation("relu", lipschitz=0.0)


class TestFcnModel:
    def test_depth_validation(self):
        w = np.eye(2)
        with pytest.raises(ValueError):
            FcnModel((w, w), (RELU,))

    def test_chain_validation(self):
        with pytest.raises(ValueError):
            FcnModel((np.ones((3, 2)), np.ones((3, 4)), np.ones((2, 3))), (RELU, RELU))

    def test_widths(self):
        m = FcnModel((np.ones((5, 2)), np.ones((4, 5)), np.ones((3, 4))), (RELU, RELU))
        assert m.widths == (2, 5, 4, 3)
        assert m.depth == 3
        assert m.input_dim == 2


class TestForwardFcn:
    def test_identity_network(self):
        m = FcnModel((np.eye(4),) * 3, (IDENT, IDENT))
        x = RNG.standard_normal(4)
        np.testing.assert_array_equal(forward_fcn(m, x), x)

    def test_all_ones_mask_is_bitwise_identical(self):
        m = small_fcn()
        x = RNG.standard_normal(4)
        np.testing.assert_array_equal(forward_fcn(m, x), forward_fcn(m, x, all_ones_masks(m)))

    def test_zero_internal_layer_kills_output(self):
        m = small_fcn(l=4)
        masks = [np.ones_like(w) for w in m.weights]
        masks[1] = np.zeros_like(masks[1])
        # hypothetical all-zero internal mask: MaskSet forbids it only on the
        # first/last layers
        mask = MaskSet("fcn", tuple(masks))
        x = RNG.standard_normal(4)
        np.testing.assert_array_equal(forward_fcn(m, x, mask), np.zeros(4))

    def test_batch_agrees_with_single(self):
        # batched and single paths use different BLAS kernels, so agreement
        # is to rounding, not bitwise
        m = small_fcn()
        xs = RNG.standard_normal((6, 4))
        batch = forward_fcn(m, xs)
        for i in range(6):
            np.testing.assert_allclose(batch[i], forward_fcn(m, xs[i]), rtol=1e-13, atol=1e-13)

    def test_rejects_wrong_dim(self):
        with pytest.raises(ValueError):
            forward_fcn(small_fcn(), np.ones(5))


def small_cnn(d_in=2, d=3, d_out=2, p=4, q=2, l=3, act=None):
    act = act or RELU
    chans = [d_in] + [d] * (l - 1)
    tensors = tuple(RNG.standard_normal((chans[k + 1], chans[k], q, q)) for k in range(l - 1))
    dense = RNG.standard_normal((d_out, d * p * p))
    return CnnModel(tensors, dense, act, p)


class TestForwardCnn:
    def test_scalar_filter_composition(self):
        c, p = 1.5, 3
        tensors = (np.full((1, 1, 1, 1), c), np.full((1, 1, 1, 1), c))
        model = CnnModel(tensors, np.eye(p * p), IDENT, p)
        x = RNG.standard_normal(p * p)
        np.testing.assert_allclose(forward_cnn(model, x), c * c * x, atol=1e-12)

    def test_zero_conv_layer_kills_output(self):
        m = small_cnn()
        tensors = list(m.conv_tensors)
        tensors[0] = np.zeros_like(tensors[0])
        m0 = CnnModel(tuple(tensors), m.final_dense, m.act, m.p)
        x = RNG.standard_normal(m.input_dim)
        np.testing.assert_array_equal(forward_cnn(m0, x), np.zeros(2))

    def test_layerwise_matvec_oracle(self):
        # each conv layer must match the explicit circulant linear map
        m = small_cnn(d_in=3, d=3, p=6, q=3)
        x = RNG.standard_normal((3, 6, 6))
        h = x
        for f in m.conv_tensors:
            w = build_full_map(pad_kernel(f, m.p))
            want = w @ flatten_maps(h)
            from prunelab.circulant import conv2d_wrap

            got = flatten_maps(conv2d_wrap(h, f))
            np.testing.assert_allclose(got, want, atol=1e-10)
            h = m.act.apply(conv2d_wrap(h, f))

    def test_full_forward_matches_matrix_path(self):
        m = small_cnn(d_in=2, d=3, p=5, q=2, l=4)
        xs = RNG.standard_normal((4, m.input_dim))
        maps = xs.reshape(4, 2, 5, 5)
        h = maps
        for f in m.conv_tensors:
            w = build_full_map(pad_kernel(f, m.p))
            h_flat = flatten_maps(h) @ w.T
            h = m.act.apply(h_flat.reshape(4, f.shape[0], 5, 5))
        want = flatten_maps(h) @ m.final_dense.T
        np.testing.assert_allclose(forward_cnn(m, xs), want, atol=1e-10)

    def test_unpruned_output_channel_unchanged(self):
        m = small_cnn(d=3, l=3)
        masks = [np.ones(f.shape[:2]) for f in m.conv_tensors]
        masks[1][2, :] = 0.0  # kill all filters feeding output channel 2
        masks[1][0, 1] = 0.0  # and one filter of channel 0
        mask = MaskSet("cnn", tuple(masks) + (np.ones_like(m.final_dense),))
        x = RNG.standard_normal(m.input_dim)
        maps0 = forward_cnn_maps(m, x, None)
        maps1 = forward_cnn_maps(m, x, mask)
        np.testing.assert_array_equal(maps0[1], maps1[1])  # channel 1 untouched
        assert not np.array_equal(maps0[0], maps1[0])
        np.testing.assert_array_equal(maps1[2], np.zeros_like(maps1[2]))


def forward_cnn_maps(model, x, mask):
    """Feature maps after the last conv layer (pre-dense), for locality checks."""
    from prunelab.circulant import conv2d_wrap, unflatten_maps

    maps = unflatten_maps(np.asarray(x), model.channels[0], model.p)
    for k, f in enumerate(model.conv_tensors):
        if mask is not None:
            f = f * mask.masks[k][:, :, None, None]
        maps = model.act.apply(conv2d_wrap(maps, f))
    return maps


class TestMaskSet:
    def test_requires_all_ones_boundary(self):
        m = small_fcn()
        masks = [np.ones_like(w) for w in m.weights]
        masks[0][0, 0] = 0.0
        with pytest.raises(ValueError):
            MaskSet("fcn", tuple(masks))

    def test_requires_binary(self):
        m = small_fcn()
        masks = [np.ones_like(w) for w in m.weights]
        masks[1][0, 0] = 0.5
        with pytest.raises(ValueError):
            MaskSet("fcn", tuple(masks))

    def test_expand_filter_mask(self):
        fm = np.array([[1.0, 0.0], [1.0, 1.0]])
        big = expand_filter_mask(fm, 3)
        assert big.shape == (18, 18)
        assert not big[:9, 9:].any()
        assert big[9:, :9].all()


class TestCompressionRatio:
    def test_all_ones(self):
        m = small_fcn()
        assert compression_ratio(all_ones_masks(m), 2) == 1.0

    def test_all_zero_internal(self):
        m = small_fcn()
        masks = [np.ones_like(w) for w in m.weights]
        masks[1] = np.zeros_like(masks[1])
        assert compression_ratio(MaskSet("fcn", tuple(masks)), 2) == 0.0

    def test_partial(self):
        m = FcnModel(
            (np.ones((4, 4)), np.ones((4, 4)), np.ones((4, 4))), (RELU, RELU)
        )
        masks = [np.ones((4, 4)) for _ in range(3)]
        masks[1][0, :] = 0.0
        assert compression_ratio(MaskSet("fcn", tuple(masks)), 2) == 0.75

    def test_layer_out_of_range(self):
        with pytest.raises(ValueError):
            compression_ratio(all_ones_masks(small_fcn()), 4)


class TestEstimateSupGap:
    def test_identity_mask_gives_zero(self):
        m = small_fcn()
        assert estimate_sup_gap(m, all_ones_masks(m), "sphere", 32, SEED) == 0.0

    def test_fully_pruned_equals_max_target_norm(self):
        m = small_fcn(l=4)
        masks = [np.ones_like(w) for w in m.weights]
        masks[1] = np.zeros_like(masks[1])
        mask = MaskSet("fcn", tuple(masks))
        pts = sample_unit_sphere(4, 64, SEED.sub(2))
        want = float(np.linalg.norm(forward_fcn(m, pts), axis=1).max())
        got = estimate_sup_gap(m, mask, "sphere", 64, SEED.sub(2))
        assert got == pytest.approx(want, rel=1e-12)

    def test_linear_network_closed_form(self):
        # identity activations: f - F = W3 (M2 o W2 - W2) W1 x exactly
        d = 4
        weights = tuple(RNG.standard_normal((d, d)) for _ in range(3))
        m = FcnModel(weights, (IDENT, IDENT))
        masks = [np.ones((d, d)) for _ in range(3)]
        masks[1][2, 1] = 0.0
        mask = MaskSet("fcn", tuple(masks))
        delta = (masks[1] - 1.0) * weights[1]
        comp = weights[2] @ delta @ weights[0]
        pts = sample_unit_sphere(d, 100, SEED.sub(3))
        want = float(np.linalg.norm(pts @ comp.T, axis=1).max())
        got = estimate_sup_gap(m, mask, "sphere", 100, SEED.sub(3))
        assert got == pytest.approx(want, rel=1e-10)

    def test_relu_gap_is_positively_homogeneous(self):
        m = small_fcn(l=3)
        masks = [np.ones_like(w) for w in m.weights]
        masks[1][0, 0] = 0.0
        mask = MaskSet("fcn", tuple(masks))
        x = RNG.standard_normal(4)
        for lam in (0.25, 2.0, 7.5):
            g1 = np.linalg.norm(forward_fcn(m, x, mask) - forward_fcn(m, x))
            g2 = np.linalg.norm(forward_fcn(m, lam * x, mask) - forward_fcn(m, lam * x))
            assert g2 == pytest.approx(lam * g1, rel=1e-10)

    def test_nondecreasing_in_n_prefix(self):
        m = small_fcn(l=3)
        masks = [np.ones_like(w) for w in m.weights]
        masks[1][:2, :2] = 0.0
        mask = MaskSet("fcn", tuple(masks))
        gaps = [estimate_sup_gap(m, mask, "sphere", n, SEED.sub(4)) for n in (10, 50, 200)]
        assert gaps[0] <= gaps[1] <= gaps[2]

    def test_monotone_under_nested_masks_nonnegative_linear(self):
        d = 3
        weights = tuple(np.abs(RNG.standard_normal((d, d))) for _ in range(3))
        m = FcnModel(weights, (IDENT, IDENT))
        masks = [np.ones((d, d)) for _ in range(3)]
        masks[1][0, 0] = 0.0
        g1 = estimate_sup_gap(m, MaskSet("fcn", tuple(np.copy(x) for x in masks)), "cube", 64, SEED.sub(5))
        masks[1][1, 1] = 0.0
        g2 = estimate_sup_gap(m, MaskSet("fcn", tuple(masks)), "cube", 64, SEED.sub(5))
        assert g2 >= g1

    def test_rejects_bad_domain(self):
        m = small_fcn()
        with pytest.raises(ValueError):
            estimate_sup_gap(m, all_ones_masks(m), "disk", 8, SEED)


class TestModelJson:
    def test_fcn_round_trip(self, tmp_path):
        m = small_fcn(l=4)
        path = tmp_path / "model.json"
        save_model(m, path)
        back = load_model(path)
        assert back.depth == m.depth
        for a, b in zip(m.weights, back.weights):
            assert np.array_equal(a, b)
        x = RNG.standard_normal(4)
        np.testing.assert_array_equal(forward_fcn(m, x), forward_fcn(back, x))

    def test_cnn_round_trip(self, tmp_path):
        m = small_cnn()
        path = tmp_path / "model.json"
        save_model(m, path)
        back = load_model(path)
        for a, b in zip(m.conv_tensors, back.conv_tensors):
            assert np.array_equal(a, b)
        assert np.array_equal(m.final_dense, back.final_dense)
        x = RNG.standard_normal(m.input_dim)
        np.testing.assert_array_equal(forward_cnn(m, x), forward_cnn(back, x))

    def test_weights_stored_row_major_with_shape(self):
        m = FcnModel((np.array([[1.0, 2.0], [3.0, 4.0]]),) * 3, (RELU, RELU))
        doc = model_to_dict(m)
        assert doc["weights"][0]["shape"] == [2, 2]
        assert doc["weights"][0]["data"] == [1.0, 2.0, 3.0, 4.0]

    def test_version_gate(self):
        doc = model_to_dict(small_fcn())
        doc["format_version"] = 99
        with pytest.raises(ValueError):
            model_from_dict(doc)

    def test_json_serializable(self):
        json.dumps(model_to_dict(small_cnn()))
