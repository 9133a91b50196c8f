"""Digit heads: shapes, prediction rules, reconstruction margin, layers."""

import warnings

import numpy as np
import pytest

from hipan import (
    Ball,
    CodecParams,
    ModelConfig,
    RECONSTRUCT_MARGIN,
    activation_path,
    clamped_descent,
    code,
    describe_ball,
    encode_tree,
    new_model,
    parameter_count,
    predict_digits,
    predict_leaf,
    reconstruct_digits,
    reconstruct_leaf,
    reconstruct_matrix,
    ultrametric_distance,
    vdp_layer_apply,
)
from hipan.model import model_from_state, model_state, score_row, softmax


def _config(p, K, K_heads=None, **kw):
    return ModelConfig(CodecParams(p, K), K_heads, **kw)


def _constant_model(p=3, K=2, top=0):
    """Decisive model that always answers `top`: scores 5 at `top`, 0 elsewhere."""
    m = new_model(_config(p, K), seed=0)
    m.root.scores = np.zeros(p)
    m.root.scores[top] = 5.0
    m.dense.table = np.zeros((p, p))
    m.dense.table[:, top] = 5.0
    for head in m.deep:
        head.table = np.zeros((p, p))
        head.table[:, top] = 5.0
    return m


def test_config_validation():
    cfg = _config(3, 4)
    assert cfg.K_heads == 4
    _config(3, 4, K_heads=1)
    with pytest.raises(ValueError):
        _config(3, 4, K_heads=0)
    with pytest.raises(ValueError):
        _config(3, 4, K_heads=5)
    with pytest.raises(ValueError):
        _config(3, 4, tau=0.0)
    with pytest.warns(UserWarning):
        _config(3, 4, alpha=0.5)


def test_new_model_shapes_and_integer_init():
    m = new_model(_config(5, 6, K_heads=4), seed=3)
    assert m.root.scores.shape == (5,)
    assert m.dense.table.shape == (5, 5)
    assert len(m.deep) == 2
    assert m.deep[0].table.shape == (5, 5)
    assert m.deep[0].anchor.shape == (5,)
    for arr in (m.root.scores, m.dense.table, m.deep[1].table, m.deep[1].anchor):
        assert arr.dtype == np.float64
        assert np.all(arr == np.floor(arr))
        assert arr.min() >= 0 and arr.max() <= 4


def test_new_model_seed_determinism():
    a = new_model(_config(5, 4), seed=9)
    b = new_model(_config(5, 4), seed=9)
    c = new_model(_config(5, 4), seed=10)
    assert np.array_equal(a.root.scores, b.root.scores)
    assert np.array_equal(a.deep[0].table, b.deep[0].table)
    assert model_state(a) == model_state(b)
    assert model_state(a) != model_state(c)


def test_k_heads_one_has_only_root():
    m = new_model(_config(3, 4, K_heads=1))
    assert m.dense is None
    assert m.deep == []


def test_parameter_count():
    assert parameter_count(_config(3, 3)) == 36
    assert parameter_count(_config(2, 1)) == 2
    assert parameter_count(_config(3, 4, K_heads=1)) == 3
    assert parameter_count(_config(409, 18)) == 3_018_420


def test_weight_tying_past_last_head():
    m = new_model(_config(3, 6, K_heads=2), seed=1)
    # depths >= K_heads reuse the last head's table
    for k in (2, 3, 5):
        assert np.array_equal(score_row(m, k, 1), m.dense.table[1])
    deep = new_model(_config(3, 6, K_heads=3), seed=1)
    for k in (3, 5):
        assert np.array_equal(score_row(deep, k, 2), deep.deep[0].table[2])


def test_score_row_requires_context_past_root():
    m = new_model(_config(3, 3), seed=0)
    assert np.array_equal(score_row(m, 0, None), m.root.scores)
    with pytest.raises(ValueError):
        score_row(m, 1, None)


def test_predict_digits_constant_model():
    m = _constant_model()
    digits, confs = predict_digits(m)
    assert digits == [0, 0]
    assert confs[0] == pytest.approx(float(softmax(np.array([5.0, 0, 0]))[0]))


def test_predict_digits_context_override():
    m = _constant_model()
    m.dense.table[2] = np.array([0.0, 0.0, 5.0])
    digits, _ = predict_digits(m, context=[2, 0])
    # row choice follows the supplied context, not the chained prediction
    assert digits[1] == 2
    digits2, _ = predict_digits(m, context=code([2, 0], 3))
    assert digits2 == digits


def test_anchored_two_logit_choice():
    # anchor arbitrates between the top two columns of the row
    m = new_model(_config(5, 3), seed=0)
    m.deep[0].table[1] = np.array([0.0, 1.0, 3.0, 0.0, 4.0])
    m.deep[0].anchor[1] = 3.9
    digits, _ = predict_digits(m, context=[0, 1, 0])
    assert digits[2] == 4  # (3.9-4)^2 < (3.9-2)^2
    m.deep[0].anchor[1] = 2.5
    digits, _ = predict_digits(m, context=[0, 1, 0])
    assert digits[2] == 2  # (2.5-2)^2 < (2.5-4)^2


def test_reconstruct_accepts_within_margin():
    m = _constant_model()
    # own digit 1 scores exactly max - margin: accepted
    m.dense.table[0] = np.array([5.0, 5.0 - RECONSTRUCT_MARGIN, 0.0])
    digits, _ = reconstruct_digits(m, code([0, 1], 3))
    assert digits == [0, 1]
    # a hair below the margin: falls back to the row argmax
    m.dense.table[0, 1] -= 1e-9
    digits, _ = reconstruct_digits(m, code([0, 1], 3))
    assert digits == [0, 0]


def test_reconstruct_matrix_free_runs_on_predictions():
    m = _constant_model()
    # root rejects digit 1, so row selection at depth 1 must use digit 0
    m.dense.table[1] = np.array([0.0, 0.0, 5.0])
    pred, conf = reconstruct_matrix(m, np.array([[1, 0]]))
    assert pred[0].tolist() == [0, 0]
    assert conf.shape == (1, 2)
    with pytest.raises(ValueError):
        reconstruct_matrix(m, np.zeros((2, 3), dtype=np.int64))


def test_reconstruct_codec_mismatch():
    m = _constant_model()
    with pytest.raises(ValueError):
        reconstruct_digits(m, code([0, 0, 0], 3))


def test_constant_model_toy_accuracy(toy_tree, toy_dataset):
    # decisive all-zero answers: cat exact, dog/fern mispredicted as cat
    m = _constant_model()
    hits = 0
    root_hits = 0
    for rec in toy_dataset.records:
        digits, _ = reconstruct_digits(m, rec.code)
        hits += digits == list(rec.code.digits)
        root_hits += digits[0] == rec.code.digits[0]
    assert hits == 1
    assert root_hits == 2


def test_confidence_is_softmax_of_row():
    m = _constant_model()
    digits, confs = reconstruct_digits(m, code([0, 0], 3))
    row0 = softmax(m.root.scores)
    row1 = softmax(m.dense.table[0])
    assert confs[0] == pytest.approx(float(row0[digits[0]]))
    assert confs[1] == pytest.approx(float(row1[digits[1]]))


def test_clamped_descent(toy_tree):
    assert clamped_descent(toy_tree, [0, 0]) == toy_tree.id_of("cat")
    # digit 2 exceeds both child lists and clamps to the last child
    assert clamped_descent(toy_tree, [2, 2]) == toy_tree.id_of("fern")
    # extra digits past a leaf are ignored
    assert clamped_descent(toy_tree, [1, 0, 2, 2]) == toy_tree.id_of("fern")
    with pytest.raises(ValueError):
        clamped_descent(toy_tree, [0])


def test_predict_and_reconstruct_leaf_return_ids(toy_tree, toy_dataset):
    m = _constant_model()
    assert predict_leaf(m, toy_tree) == toy_tree.id_of("cat")
    rec = toy_dataset.records[2]
    assert reconstruct_leaf(m, toy_tree, rec.code) == toy_tree.id_of("cat")


def test_vdp_layer_apply():
    x = code([1, 0, 2], 3)
    inside = Ball(code([1, 0, 0], 3), 2)
    outside = Ball(code([2, 0, 0], 3), 2)
    out = vdp_layer_apply([(inside, 3.0), (outside, 2.0)], x, alpha=0.01)
    assert out.tolist() == [3.0, 2.0 * 0.01]
    # mapping input follows insertion order
    out2 = vdp_layer_apply({outside: 1.0, inside: -1.0}, x, alpha=0.02)
    assert out2.tolist() == [0.02, -1.0]
    assert vdp_layer_apply([], x).shape == (0,)


def test_vdp_layer_rejects_mixed_depths():
    x = code([1, 0], 3)
    with pytest.raises(ValueError, match="depths"):
        vdp_layer_apply([(Ball(x, 1), 1.0), (Ball(x, 2), 1.0)], x)


def test_vdp_layer_alpha_zero_is_exact_indicator():
    x = code([1, 0], 3)
    balls = [(Ball(code([d, 0], 3), 1), 1.0) for d in range(3)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = vdp_layer_apply(balls, x, alpha=0.0)
    assert out.tolist() == [0.0, 1.0, 0.0]


def test_vdp_layer_locality():
    # with alpha=0 and unit coefficients, inputs closer than the ball scale
    # activate identically: the layer cannot separate inside a ball
    p, K, depth = 3, 4, 2
    rng = np.random.default_rng(5)
    balls = [
        (Ball(code(rng.integers(0, p, size=K), p), depth), 1.0) for _ in range(8)
    ]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(50):
            base = rng.integers(0, p, size=K)
            near = base.copy()
            near[depth + 1 :] = rng.integers(0, p, size=K - depth - 1)
            a = code(base, p)
            b = code(near, p)
            assert ultrametric_distance(a, b) <= float(p) ** -depth
            va = vdp_layer_apply(balls, a, alpha=0.0)
            vb = vdp_layer_apply(balls, b, alpha=0.0)
            assert np.array_equal(va, vb)


def test_activation_path():
    x = code([1, 0, 2], 3)
    path = activation_path(x)
    assert [b.depth for b in path] == [1, 2, 3]
    assert all(b.center == x for b in path)


def test_describe_ball(toy_tree, toy_dataset):
    whole = describe_ball(toy_dataset, toy_tree, [])
    assert whole.member_count == 3
    assert whole.subtree_root == "root"
    animals = describe_ball(toy_dataset, toy_tree, [0])
    assert animals.members == ("cat", "dog")
    assert animals.subtree_root == "animal"
    dog = describe_ball(toy_dataset, toy_tree, [0, 1])
    assert dog.members == ("dog",)
    assert dog.subtree_root == "dog"
    empty = describe_ball(toy_dataset, toy_tree, [2])
    assert empty.member_count == 0
    assert empty.subtree_root is None
    with pytest.raises(ValueError):
        describe_ball(toy_dataset, toy_tree, [0, 0, 0])


def test_describe_ball_padded(padded_tree):
    ds = encode_tree(padded_tree)
    # zero padding past the shallow leaf still denotes that leaf
    summary = describe_ball(ds, padded_tree, [1, 0])
    assert summary.members == ("b",)
    assert summary.subtree_root == "b"


def test_model_state_round_trip():
    m = new_model(_config(3, 4, K_heads=3), seed=2)
    m.deep[0].anchor[1] = 0.1234567890123456789
    state = model_state(m)
    m2 = model_from_state(state)
    assert np.array_equal(m.root.scores, m2.root.scores)
    assert np.array_equal(m.dense.table, m2.dense.table)
    assert np.array_equal(m.deep[0].anchor, m2.deep[0].anchor)
    assert m2.config.codec == m.config.codec
    assert m2.config.K_heads == m.config.K_heads
    assert m2.init_seed == 2


def test_model_state_errors():
    m = new_model(_config(3, 2), seed=0)
    state = model_state(m)
    bad = dict(state, format="other")
    with pytest.raises(ValueError, match="format"):
        model_from_state(bad)
    broken = dict(state, tables=dict(state["tables"], root=[1.0]))
    with pytest.raises(ValueError, match="root"):
        model_from_state(broken)
