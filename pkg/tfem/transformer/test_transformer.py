import numpy as np
import pytest

from tfem.errors import ArtifactIOError, ShapeError
from tfem.transformer.container import decode_params, encode_params, load_params, save_params
from tfem.transformer.engine import Activation, AttnHead, Layer, TransformerParams, layer_forward, tf_forward
from tfem.transformer.norms import param_norm, space_check


def _random_layer(rng, dim, heads, activation, hidden=5):
    return Layer(
        heads=[AttnHead(*(rng.normal(scale=0.3, size=(dim, dim)) for _ in range(3))) for _ in range(heads)],
        activation=activation,
        fc_w1=rng.normal(size=(hidden, dim)),
        fc_w2=rng.normal(scale=0.1, size=(dim, hidden)),
    )


def test_zero_layer_is_identity():
    rng = np.random.default_rng(0)
    h = rng.normal(size=(4, 6))
    zero = Layer(
        heads=[AttnHead(np.zeros((4, 4)), np.zeros((4, 4)), np.zeros((4, 4)))],
        activation=Activation.SOFTMAX,
        fc_w1=np.zeros((3, 4)),
        fc_w2=np.zeros((4, 3)),
    )
    assert np.array_equal(layer_forward(zero, h), h)
    value_free = Layer(
        heads=[AttnHead(np.zeros((4, 4)), rng.normal(size=(4, 4)), rng.normal(size=(4, 4)))],
        activation=Activation.SOFTMAX,
        fc_w1=np.zeros((0, 4)),
        fc_w2=np.zeros((4, 0)),
    )
    assert np.array_equal(layer_forward(value_free, h), h)


def test_scalar_hand_example():
    one = np.ones((1, 1))
    layer = Layer(heads=[AttnHead(one, one, one)], activation=Activation.SOFTMAX,
                  fc_w1=np.zeros((1, 1)), fc_w2=np.zeros((1, 1)))
    assert layer_forward(layer, one)[0, 0] == 2.0


def test_activation_tags():
    one = np.ones((1, 1))
    h = np.array([[1.0, -2.0]])
    for activation, expected in (
        (Activation.NONE, h + h @ (h.T @ h)),
        (Activation.RELU, h + h @ np.maximum(h.T @ h, 0.0)),
    ):
        layer = Layer(heads=[AttnHead(one, one, one)], activation=activation,
                      fc_w1=np.zeros((0, 1)), fc_w2=np.zeros((1, 0)))
        assert np.allclose(layer_forward(layer, h), expected)


def test_dimension_mismatch_reports_layer():
    rng = np.random.default_rng(1)
    params = TransformerParams(layers=[_random_layer(rng, 3, 1, Activation.SOFTMAX)],
                               readout_left=np.eye(3), readout_right=np.eye(2))
    with pytest.raises(ShapeError, match="layer 0"):
        tf_forward(params, np.zeros((4, 2)))


def test_zero_layers_select_sub_block():
    h = np.arange(12.0).reshape(3, 4)
    params = TransformerParams(layers=[], readout_left=np.eye(3)[1:], readout_right=np.eye(4)[:, :2])
    assert np.array_equal(tf_forward(params, h), h[1:, :2])


def test_softmax_attention_is_permutation_equivariant():
    rng = np.random.default_rng(4)
    layer = _random_layer(rng, 5, 2, Activation.SOFTMAX)
    h = rng.normal(size=(5, 9))
    perm = rng.permutation(9)
    assert np.allclose(layer_forward(layer, h)[:, perm], layer_forward(layer, h[:, perm]), atol=1e-12)


def test_zero_columns_leave_original_tokens_unchanged():
    rng = np.random.default_rng(8)
    h = rng.normal(size=(5, 6))
    padded = np.hstack([h, np.zeros((5, 6))])
    for activation in (Activation.RELU, Activation.NONE):
        state, padded_state = h, padded
        for index in range(3):
            layer = _random_layer(rng, 5, 2, activation)
            state, padded_state = layer_forward(layer, state), layer_forward(layer, padded_state)
            scale = max(1.0, float(np.abs(state).max()))
            assert np.allclose(padded_state[:, :6], state, rtol=1e-10, atol=1e-10 * scale), (activation, index)
            assert not padded_state[:, 6:].any()


def test_duplicated_columns_leave_softmax_layers_unchanged():
    rng = np.random.default_rng(9)
    h = rng.normal(size=(5, 7))
    for _ in range(5):
        layer = _random_layer(rng, 5, 3, Activation.SOFTMAX)
        doubled = layer_forward(layer, np.hstack([h, h]))
        single = layer_forward(layer, h)
        assert np.allclose(doubled[:, :7], single, rtol=1e-10, atol=1e-10)
        assert np.allclose(doubled[:, 7:], single, rtol=1e-10, atol=1e-10)


def test_forward_is_bitwise_reproducible():
    rng = np.random.default_rng(6)
    params = TransformerParams(
        layers=[_random_layer(rng, 4, 2, act) for act in Activation],
        readout_left=np.eye(4), readout_right=np.eye(7),
    )
    h = rng.normal(size=(4, 7))
    first, states = tf_forward(params, h, trace=True)
    assert len(states) == 4
    assert np.array_equal(first, tf_forward(params, h))


def test_param_norm_examples():
    assert param_norm(TransformerParams(readout_left=np.zeros((1, 2)), readout_right=np.zeros((3, 1)))) == 0.0
    eye = np.eye(2)
    layer = Layer(heads=[AttnHead(eye, eye, eye)], activation=Activation.SOFTMAX,
                  fc_w1=np.zeros((1, 2)), fc_w2=np.zeros((2, 1)))
    params = TransformerParams(layers=[layer], readout_left=np.zeros((1, 2)), readout_right=np.zeros((3, 1)))
    assert abs(param_norm(params) - 2.0) < 1e-10

    rng = np.random.default_rng(2)
    v, q, k = (rng.normal(size=(3, 3)) for _ in range(3))
    base = max(np.linalg.norm(q, 2), np.linalg.norm(k, 2))
    for c in (0.5, -3.0, 7.0):
        scaled = Layer(heads=[AttnHead(c * v, q, k)], activation=Activation.SOFTMAX,
                       fc_w1=np.zeros((1, 3)), fc_w2=np.zeros((3, 1)))
        p = TransformerParams(layers=[scaled], readout_left=np.zeros((1, 3)), readout_right=np.zeros((2, 1)))
        assert abs(param_norm(p) - (base + abs(c) * np.linalg.norm(v, 2))) < 1e-8


def test_param_norm_subadditive_in_values():
    rng = np.random.default_rng(3)
    q, k, v1, v2 = (rng.normal(size=(3, 3)) for _ in range(4))
    zeros = dict(fc_w1=np.zeros((1, 3)), fc_w2=np.zeros((3, 1)))
    readouts = dict(readout_left=np.eye(3), readout_right=np.eye(4))
    merged = TransformerParams(layers=[Layer([AttnHead(v1 + v2, q, k)], Activation.SOFTMAX, **zeros)], **readouts)
    split = TransformerParams(layers=[Layer([AttnHead(v1, q, k), AttnHead(v2, q, k)], Activation.SOFTMAX, **zeros)],
                              **readouts)
    assert param_norm(merged) <= param_norm(split) + 1e-10


def test_space_check():
    empty = TransformerParams(readout_left=np.zeros((1, 2)), readout_right=np.zeros((2, 1)))
    assert space_check(empty, 1e-9, 1, 1).ok
    rng = np.random.default_rng(5)
    params = TransformerParams(layers=[_random_layer(rng, 3, 3, Activation.RELU)],
                               readout_left=np.eye(3), readout_right=np.eye(2))
    verdict = space_check(params, 1e6, 2, 10)
    assert not verdict.ok and verdict.reasons == ["heads"]


def test_container_round_trip_and_errors(tmp_path):
    rng = np.random.default_rng(8)
    params = TransformerParams(
        layers=[_random_layer(rng, 4, m, act) for m, act in zip((0, 2, 1), Activation)],
        readout_left=rng.normal(size=(2, 4)), readout_right=rng.normal(size=(6, 6)),
    )
    path = save_params(str(tmp_path / "model.tfem"), params)
    back = load_params(path)
    h = rng.normal(size=(4, 6))
    assert np.array_equal(tf_forward(back, h), tf_forward(params, h))
    assert [layer.activation for layer in back.layers] == list(Activation)

    blob = encode_params(params)
    assert blob[:4] == b"TFEM"
    with pytest.raises(ArtifactIOError):
        decode_params(b"XXXX" + blob[4:])
    with pytest.raises(ArtifactIOError):
        decode_params(blob[:-8])


if __name__ == "__main__":
    pytest.main([__file__])
