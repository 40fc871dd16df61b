import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gesturegate.errors import ModelError, ShapeError
from gesturegate.nn.builders import build_capacitive_model, build_inertial_model
from gesturegate.nn.layers import (
    INFER,
    TRAIN,
    batchnorm_forward,
    conv1d_forward,
    dropout_forward,
    layer_forward,
    maxpool1d_backward,
    maxpool1d_forward,
    softmax,
)
from gesturegate.nn.model import cross_entropy, init_weights, loss_and_grads, model_forward, predict_proba
from gesturegate.nn.spec import (
    LayerSpec,
    ModelSpec,
    conv1d,
    count_parameters,
    dense,
    flatten,
    max_pool1d,
    relu,
    softmax as softmax_layer,
)


def naive_conv(x, kernel, bias):
    """Direct sliding dot product with 'same' zero padding (left = (k-1)//2)."""
    c, length = x.shape
    f, _, k = kernel.shape
    left = (k - 1) // 2
    out = np.zeros((f, length))
    for o in range(f):
        for t in range(length):
            acc = bias[o]
            for ci in range(c):
                for j in range(k):
                    src = t + j - left
                    if 0 <= src < length:
                        acc += kernel[o, ci, j] * x[ci, src]
            out[o, t] = acc
    return out


def test_conv_identity_kernel():
    x = np.array([[[3.0, 1.0, 4.0]]])
    y, _ = conv1d_forward(x, np.ones((1, 1, 1)), np.zeros(1))
    np.testing.assert_array_equal(y, x)


@pytest.mark.parametrize("k", [1, 3, 4, 10])
def test_conv_matches_naive_oracle(k):
    rng = np.random.default_rng(k)
    x = rng.normal(size=(2, 3, 17)).astype(np.float32)
    kernel = rng.normal(size=(5, 3, k)).astype(np.float32)
    bias = rng.normal(size=5).astype(np.float32)
    y, _ = conv1d_forward(x, kernel, bias)
    for n in range(2):
        np.testing.assert_allclose(y[n], naive_conv(x[n].astype(float), kernel, bias), atol=1e-5)


def test_conv_valid_padding_shape():
    y, _ = conv1d_forward(np.ones((1, 2, 12)), np.ones((3, 2, 4)), np.zeros(3), padding="valid")
    assert y.shape == (1, 3, 9)
    np.testing.assert_allclose(y, 8.0)


def test_conv_channel_mismatch():
    with pytest.raises(ShapeError):
        conv1d_forward(np.ones((1, 2, 10)), np.ones((3, 4, 3)), np.zeros(3))


def test_maxpool_example():
    x = np.arange(1.0, 11.0).reshape(1, 1, 10)
    y, _ = maxpool1d_forward(x, 5, 5)
    np.testing.assert_array_equal(y[0, 0], [5, 10])


def test_maxpool_floor_and_same():
    x = np.arange(1.0, 13.0).reshape(1, 1, 12)
    assert maxpool1d_forward(x, 5, 5)[0].shape[-1] == 2  # floors the remainder
    y, _ = maxpool1d_forward(x, 5, 5, "same")
    np.testing.assert_array_equal(y[0, 0], [5, 10, 12])
    y, _ = maxpool1d_forward(np.arange(4.0).reshape(1, 1, 4), 5, 5, "same")
    np.testing.assert_array_equal(y[0, 0], [3])


def test_maxpool_backward_routes_to_argmax():
    x = np.array([[[1.0, 7.0, 2.0, 3.0, 0.0, 9.0, 4.0]]])
    y, cache = maxpool1d_forward(x, 2, 2)
    dx, _ = maxpool1d_backward(np.ones_like(y), cache)
    np.testing.assert_array_equal(dx[0, 0], [0, 1, 0, 1, 0, 1, 0])


def test_maxpool_overlapping_backward_accumulates():
    x = np.array([[[0.0, 5.0, 1.0, 0.0]]])
    y, cache = maxpool1d_forward(x, 3, 1)
    np.testing.assert_array_equal(y[0, 0], [5, 5])
    dx, _ = maxpool1d_backward(np.ones_like(y), cache)
    np.testing.assert_array_equal(dx[0, 0], [0, 2, 0, 0])


def test_batchnorm_infer_formula():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(4, 3, 8))
    block = {
        "gain": np.array([1.0, 2.0, 0.5]),
        "shift": np.array([0.0, -1.0, 3.0]),
        "running_mean": np.array([0.1, -0.2, 0.3]),
        "running_var": np.array([1.0, 4.0, 0.25]),
    }
    y, _ = batchnorm_forward(x, block, INFER)
    for c in range(3):
        want = block["gain"][c] * (x[:, c] - block["running_mean"][c]) / np.sqrt(block["running_var"][c] + 1e-3)
        np.testing.assert_allclose(y[:, c], want + block["shift"][c], rtol=1e-12)


def test_batchnorm_train_uses_batch_stats_and_momentum():
    rng = np.random.default_rng(4)
    x = rng.normal(2.0, 3.0, size=(16, 2, 10))
    block = {"gain": np.ones(2), "shift": np.zeros(2), "running_mean": np.zeros(2), "running_var": np.ones(2)}
    y, (_, _, stats) = batchnorm_forward(x, block, TRAIN)
    np.testing.assert_allclose(y.mean(axis=(0, 2)), 0, atol=1e-10)
    np.testing.assert_allclose(stats["running_mean"], 0.01 * x.mean(axis=(0, 2)))
    np.testing.assert_allclose(stats["running_var"], 0.99 + 0.01 * x.var(axis=(0, 2)))


def test_dropout_infer_is_identity():
    x = np.random.default_rng(0).normal(size=(5, 7)).astype(np.float32)
    y, _ = dropout_forward(x, 0.5, INFER, None)
    assert y is x


@pytest.mark.parametrize("rate", [0.3, 0.5])
def test_dropout_train_expectation(rate):
    rng = np.random.default_rng(5)
    x = np.linspace(0.5, 2.0, 8).astype(np.float32)
    masks = np.stack([dropout_forward(x, rate, TRAIN, rng)[0] for _ in range(10_000)])
    np.testing.assert_allclose(masks.mean(axis=0), x, rtol=0.02)
    kept = masks != 0
    np.testing.assert_allclose(masks[kept] / np.broadcast_to(x, masks.shape)[kept], 1 / (1 - rate), rtol=1e-6)


@settings(max_examples=80, deadline=None)
@given(arrays(np.float64, (3, 9), elements=st.floats(-50, 50)), st.floats(-100, 100))
def test_softmax_sums_to_one_and_shift_invariant(z, c):
    p = softmax(z)
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=-1), 1.0, atol=1e-5)
    np.testing.assert_allclose(softmax(z + c), p, atol=1e-6)


def test_dense_and_relu():
    block = {"kernel": np.array([[1.0, -1.0], [2.0, 0.0]]), "bias": np.array([0.5, 0.0])}
    y, _ = layer_forward(dense(2), block, np.array([[1.0, 1.0]]))
    np.testing.assert_array_equal(y, [[3.5, -1.0]])
    y, _ = layer_forward(relu(), {}, y)
    np.testing.assert_array_equal(y, [[3.5, 0.0]])
    with pytest.raises(ShapeError):
        layer_forward(dense(2), block, np.ones((1, 3)))


def test_cross_entropy_examples():
    assert cross_entropy(np.array([0.0, 1.0, 0.0]), 1) == 0.0
    assert cross_entropy(np.full(9, 1 / 9), 4) == pytest.approx(2.19722, abs=1e-5)
    assert cross_entropy(np.full(2, 0.5), 0) == pytest.approx(0.69315, abs=1e-5)
    assert cross_entropy(np.array([1.0, 0.0]), 1) == pytest.approx(-np.log(1e-12))
    with pytest.raises(ValueError):
        cross_entropy(np.full(2, 0.5), 2)


def test_dense_alone_has_22_parameters():
    spec = ModelSpec((10, 1), (flatten(), dense(2), softmax_layer()))
    assert count_parameters(spec) == 22


def test_spec_rejects_bad_layers():
    with pytest.raises(ModelError):
        LayerSpec("Conv2D")
    with pytest.raises(ModelError):
        conv1d(0, 3)
    with pytest.raises(ModelError):
        LayerSpec("Dropout", {"rate": 1.0})
    with pytest.raises(ModelError):
        ModelSpec((1, 10), (flatten(), dense(2)))  # no softmax
    with pytest.raises(ShapeError):
        ModelSpec((1, 4), (max_pool1d(5, 5), flatten(), dense(2), softmax_layer()))


def test_spec_json_round_trip():
    spec = build_capacitive_model()
    assert ModelSpec.from_json(spec.to_json()) == spec
    assert spec.to_json() == ModelSpec.from_json(spec.to_json()).to_json()


@pytest.mark.parametrize("builder,channels,classes", [(build_inertial_model, 3, 2), (build_capacitive_model, 4, 9)])
def test_model_forward_is_distribution(builder, channels, classes):
    spec = builder()
    w = init_weights(spec, seed=1)
    x = np.random.default_rng(2).random((channels, 100))
    p = model_forward(spec, w, x)
    assert p.shape == (classes,) and p.dtype == np.float32
    assert abs(float(p.sum()) - 1) < 1e-5
    batch = np.random.default_rng(3).random((7, channels, 100))
    np.testing.assert_allclose(predict_proba(spec, w, batch, batch_size=3), model_forward(spec, w, batch), atol=1e-6)
    with pytest.raises(ShapeError):
        model_forward(spec, w, np.zeros((channels, 99)))


# Frozen outputs of the finished engine: init seed 7, input uniform from seed 11.
GOLDEN = {
    "inertial": ["0x1.e6ad420000000p-2", "0x1.0ca95e0000000p-1"],
    "capacitive": [
        "0x1.4be72c0000000p-2", "0x1.ad8bf80000000p-5", "0x1.1bc4980000000p-4",
        "0x1.be3d9e0000000p-2", "0x1.363fde0000000p-4", "0x1.307bbe0000000p-6",
        "0x1.49c7560000000p-8", "0x1.f24f9a0000000p-7", "0x1.f3a3da0000000p-9",
    ],
}


@pytest.mark.parametrize("builder,channels", [(build_inertial_model, 3), (build_capacitive_model, 4)])
def test_golden_output(builder, channels):
    spec = builder()
    x = np.random.default_rng(11).random((channels, 100)).astype(np.float32)
    p = model_forward(spec, init_weights(spec, seed=7), x)
    want = np.array([float.fromhex(h) for h in GOLDEN[spec.name]], dtype=np.float32)
    np.testing.assert_array_equal(p, want)


def test_non_finite_names_layer():
    spec = ModelSpec((1, 4), (flatten(), dense(2), softmax_layer()), "tiny")
    w = init_weights(spec)
    w.blocks[1]["kernel"][:] = np.inf
    with pytest.raises(ModelError, match=r"layer 1 \(Dense\)"):
        model_forward(spec, w, np.ones((1, 4), dtype=np.float32))


def test_output_bias_gradient_closed_form():
    # zero weights make every logit equal, so p is uniform for every sample
    spec = ModelSpec((1, 4), (flatten(), dense(3), softmax_layer()))
    w = init_weights(spec)
    w.blocks[1]["kernel"][:] = 0
    x = np.random.default_rng(0).normal(size=(6, 1, 4)).astype(np.float32)
    y = np.array([0, 1, 2, 0, 1, 2])
    _, grads, probs, _ = loss_and_grads(spec, w, x, y)
    np.testing.assert_allclose(probs, 1 / 3, atol=1e-7)
    np.testing.assert_allclose(grads[1]["bias"], (probs - np.eye(3)[y]).mean(axis=0), atol=1e-7)
    np.testing.assert_allclose(grads[1]["bias"], 0, atol=1e-7)  # symmetric batch


def test_dead_relu_gives_zero_conv_gradient():
    spec = ModelSpec((1, 8), (conv1d(2, 3), relu(), flatten(), dense(2), softmax_layer()))
    w = init_weights(spec, seed=0)
    w.blocks[0]["kernel"][:] = 0
    w.blocks[0]["bias"][:] = -1  # every pre-activation is -1
    x = np.random.default_rng(1).normal(size=(4, 1, 8)).astype(np.float32)
    _, grads, _, _ = loss_and_grads(spec, w, x, np.array([0, 1, 0, 1]))
    np.testing.assert_array_equal(grads[0]["kernel"], 0)
    np.testing.assert_array_equal(grads[0]["bias"], 0)
