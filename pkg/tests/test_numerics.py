import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fact_dance.numerics import (
    AdamState,
    DegenerateMaskError,
    DimensionError,
    NonFiniteError,
    Tensor,
    TrainingDivergenceError,
    adam_step,
    concat,
    grad_check,
    layer_norm,
    linear_forward,
    mean_squared_error,
    multi_head_attention,
    no_grad,
    relu,
    reshape,
    scale,
    softmax_masked,
    sum_all,
    take,
    transpose,
)

finite = st.floats(-10, 10, allow_nan=False, width=64)


def param(shape, seed=0, scale_=1.0):
    return Tensor(np.random.default_rng(seed).normal(0, scale_, size=shape), requires_grad=True)


def numeric_grad(f, x, h=1e-6):
    """Central differences of scalar f() over every entry of x (in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        up = f()
        x[i] = old - h
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * h)
    return g


# ---- forward values against plain numpy -------------------------------------------------


def test_linear_forward_value_and_bias_shape_error():
    x, w, b = param((2, 3, 4)), param((4, 5), 1), param((5,), 2)
    out = linear_forward(x, w, b)
    np.testing.assert_allclose(out.data, np.einsum("abi,ij->abj", x.data, w.data) + b.data, rtol=1e-12)
    with pytest.raises(DimensionError, match=r"\(5, 3\)"):
        linear_forward(param((2, 3)), param((5, 3)))
    with pytest.raises(DimensionError):
        linear_forward(x, w, param((4,)))


def test_linear_error_names_both_shapes():
    with pytest.raises(DimensionError) as e:
        linear_forward(param((2, 7)), param((3, 5)))
    assert "(2, 7)" in str(e.value) and "(3, 5)" in str(e.value)


def test_softmax_rows_sum_to_one_and_mask_zeroes():
    s = param((3, 4))
    mask = np.triu(np.full((4, 4), -np.inf), 1)[:3]
    p = softmax_masked(s, mask).data
    np.testing.assert_allclose(p.sum(-1), 1.0, rtol=1e-12)
    assert np.all(p[mask == -np.inf] == 0.0)


def test_softmax_fully_masked_row_is_rejected():
    mask = np.zeros((2, 3))
    mask[1] = -np.inf
    with pytest.raises(DegenerateMaskError):
        softmax_masked(param((2, 3)), mask)


def test_softmax_large_scores_stay_finite():
    p = softmax_masked(Tensor(np.array([[1000.0, 1000.0, -1000.0]]))).data
    np.testing.assert_allclose(p, [[0.5, 0.5, 0.0]])


def test_layer_norm_statistics():
    x = param((5, 8), scale_=3.0)
    g = Tensor(np.ones(8))
    b = Tensor(np.zeros(8))
    y = layer_norm(x, g, b).data
    np.testing.assert_allclose(y.mean(-1), 0.0, atol=1e-12)
    np.testing.assert_allclose(y.var(-1), 1.0, rtol=1e-3)


def test_tensor_rejects_non_finite_input():
    with pytest.raises(NonFiniteError):
        Tensor(np.array([1.0, np.nan]))


def test_mse_examples():
    pred = Tensor(np.zeros((20, 219)))
    assert float(mean_squared_error(pred, np.zeros((20, 219))).data) == 0.0
    assert float(mean_squared_error(pred, np.full((20, 219), 2.0)).data) == 4.0
    with pytest.raises(DimensionError):
        mean_squared_error(pred, np.zeros((10, 219)))


def _mha_reference(x, wq, wk, wv, heads, mask):
    """Per-head loop straight from the attention definition."""
    B, L, h = x.shape
    d = h // heads
    out = np.zeros_like(x)
    for b in range(B):
        q, k, v = x[b] @ wq, x[b] @ wk, x[b] @ wv
        for i in range(heads):
            sl = slice(i * d, (i + 1) * d)
            s = q[:, sl] @ k[:, sl].T
            if mask is not None:
                s = s + mask
            s = s / np.sqrt(d)
            e = np.exp(s - s.max(-1, keepdims=True))
            out[b, :, sl] = (e / e.sum(-1, keepdims=True)) @ v[:, sl]
    return out


@pytest.mark.parametrize("causal", [False, True])
def test_fused_attention_matches_per_head_loop(causal):
    x, wq, wk, wv = param((2, 5, 8), 0), param((8, 8), 1), param((8, 8), 2), param((8, 8), 3)
    mask = np.triu(np.full((5, 5), -np.inf), 1) if causal else None
    out = multi_head_attention(x, wq, wk, wv, 2, mask).data
    np.testing.assert_allclose(out, _mha_reference(x.data, wq.data, wk.data, wv.data, 2, mask), rtol=1e-10, atol=1e-12)


# ---- gradients against central differences ------------------------------------------------


def _check(loss_fn, tensors, tol=1e-6):
    for t in tensors:
        t.grad = None
    loss_fn().backward()
    for t in tensors:
        num = numeric_grad(lambda: float(loss_fn().data), t.data)
        np.testing.assert_allclose(t.grad, num, rtol=tol, atol=tol)


def test_grad_linear_relu_layernorm_chain():
    x, w, b = param((2, 3, 4)), param((4, 6), 1), param((6,), 2)
    g, beta = param((6,), 3), param((6,), 4)
    target = np.random.default_rng(9).normal(size=(2, 3, 6))

    def loss():
        return mean_squared_error(layer_norm(relu(linear_forward(x, w, b)), g, beta), target)

    _check(loss, [x, w, b, g, beta], tol=1e-5)


@pytest.mark.parametrize("causal", [False, True])
def test_grad_fused_attention(causal):
    x, wq, wk, wv = param((2, 4, 6), 0), param((6, 6), 1), param((6, 6), 2), param((6, 6), 3)
    mask = np.triu(np.full((4, 4), -np.inf), 1) if causal else None
    target = np.random.default_rng(5).normal(size=(2, 4, 6))
    _check(lambda: mean_squared_error(multi_head_attention(x, wq, wk, wv, 3, mask), target), [x, wq, wk, wv])


def test_grad_softmax_masked():
    s = param((3, 4))
    mask = np.array([0.0, 0.0, -np.inf, 0.0])
    target = np.random.default_rng(1).random((3, 4))
    _check(lambda: mean_squared_error(softmax_masked(s, mask), target), [s])


def test_grad_shape_ops():
    a, b = param((2, 3)), param((2, 2), 1)

    def loss():
        c = concat([a, b], axis=1)  # (2, 5)
        t = transpose(reshape(c, (5, 2)), (1, 0))
        return sum_all(scale(take(t, (slice(None), slice(1, 4))) * t[:, :3], 0.5))

    _check(loss, [a, b])


def test_grad_broadcast_add_sums_over_batch():
    x, b = param((4, 3)), param((3,), 1)
    sum_all(x + b).backward()
    np.testing.assert_array_equal(b.grad, np.full(3, 4.0))


def test_shared_subexpression_accumulates():
    x = param((3,))
    y = x * x
    sum_all(y + y).backward()
    np.testing.assert_allclose(x.grad, 4 * x.data)


def test_no_grad_records_nothing():
    w = param((3, 3))
    with no_grad():
        out = linear_forward(Tensor(np.ones((2, 3))), w)
    assert not out.requires_grad and out._parents == ()


def test_grad_check_reports_small_error_for_correct_gradient():
    w = param((4, 3))
    x = np.random.default_rng(2).normal(size=(5, 4))
    errs = grad_check(lambda: mean_squared_error(linear_forward(Tensor(x), w), np.zeros((5, 3))), {"w": w})
    assert errs["w"] < 1e-6


def test_grad_check_detects_a_wrong_gradient():
    w = param((3,))

    def bad_square():
        # forward w^2, backward pretends the derivative is w
        from fact_dance.numerics.tensor import _make

        return sum_all(_make(w.data**2, (w,), lambda g: w._accumulate(g * w.data)))

    assert grad_check(bad_square, {"w": w})["w"] > 0.1


# ---- properties ------------------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (3, 5), elements=finite), st.floats(-50, 50))
def test_softmax_shift_invariance(s, c):
    a = softmax_masked(Tensor(s)).data
    b = softmax_masked(Tensor(s + c)).data
    np.testing.assert_allclose(a, b, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (4, 6), elements=finite), st.floats(0.1, 10), st.floats(-5, 5))
def test_layer_norm_affine_invariance(x, a, c):
    g, b = Tensor(np.ones(6)), Tensor(np.zeros(6))
    # eps breaks exact invariance for near-constant rows
    assume(x.var(axis=-1).min() > 1.0)
    np.testing.assert_allclose(layer_norm(Tensor(x), g, b).data, layer_norm(Tensor(a * x + c), g, b).data, atol=1e-3)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (2, 3, 4), elements=finite))
def test_linear_is_linear_in_x(x):
    w = Tensor(np.arange(12.0).reshape(4, 3) / 10)
    lhs = linear_forward(Tensor(2 * x), w).data
    np.testing.assert_allclose(lhs, 2 * linear_forward(Tensor(x), w).data, rtol=1e-12, atol=1e-12)


# ---- Adam ---------------------------------------------------------------------------------


def adam_reference(p, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = np.zeros_like(p)
    v = np.zeros_like(p)
    for t, g in enumerate(grads, 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p = p - lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
    return p


def test_adam_matches_hand_written_recurrence():
    rng = np.random.default_rng(0)
    p0 = rng.normal(size=(3, 2))
    grads = [rng.normal(size=(3, 2)) for _ in range(5)]
    w = Tensor(p0.copy(), requires_grad=True)
    state = AdamState(schedule=((0, 1e-2),))
    for g in grads:
        adam_step({"w": w}, {"w": g}, state)
    np.testing.assert_allclose(w.data, adam_reference(p0, grads, 1e-2), rtol=1e-12)
    assert state.step == 5


def test_first_adam_step_moves_each_coordinate_by_lr():
    w = Tensor(np.zeros(4), requires_grad=True)
    adam_step({"w": w}, {"w": np.array([3.0, -0.1, 1e3, -7.0])}, AdamState(schedule=((0, 1e-3),)))
    np.testing.assert_allclose(w.data, [-1e-3, 1e-3, -1e-3, 1e-3], rtol=1e-6)


def test_schedule_boundaries():
    s = AdamState()
    assert s.learning_rate(0) == 1e-4
    assert s.learning_rate(59_999) == 1e-4
    assert s.learning_rate(60_000) == 1e-5
    assert s.learning_rate(100_000) == 1e-6
    with pytest.raises(ValueError):
        AdamState(schedule=((0, 1e-4), (10, 1e-3)))


def test_non_finite_gradient_names_parameter_and_step():
    w = Tensor(np.zeros(2), requires_grad=True)
    with pytest.raises(TrainingDivergenceError, match=r"'w'.*step 7"):
        adam_step({"w": w}, {"w": np.array([np.inf, 0.0])}, AdamState(step=7))


# ---- documented examples ---------------------------------------------------------------------


def test_linear_examples():
    out = linear_forward(Tensor([1.0, 2.0]), Tensor(np.eye(2)), Tensor(np.zeros(2)))
    np.testing.assert_array_equal(out.data, [1.0, 2.0])
    out = linear_forward(Tensor([1.0, 0.0]), Tensor([[2.0], [3.0]]), Tensor([1.0]))
    np.testing.assert_array_equal(out.data, [3.0])
    with pytest.raises(DimensionError):
        linear_forward(Tensor(np.zeros((4, 3))), Tensor(np.zeros((2, 5))))


def test_softmax_examples():
    np.testing.assert_array_equal(softmax_masked(Tensor([[0.0, 0.0]]), np.zeros((1, 2))).data, [[0.5, 0.5]])
    np.testing.assert_allclose(softmax_masked(Tensor([[1.0, 0.0]]), np.zeros((1, 2))).data, [[0.7311, 0.2689]], atol=1e-4)
    np.testing.assert_array_equal(softmax_masked(Tensor([[5.0, 9.0]]), np.array([[0.0, -np.inf]])).data, [[1.0, 0.0]])


def test_adam_examples():
    w = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    s = AdamState()
    adam_step({"w": w}, {"w": np.zeros(2)}, s)
    np.testing.assert_array_equal(w.data, [1.0, -2.0])
    assert s.step == 1

    p = Tensor(np.array(0.0), requires_grad=True)
    adam_step({"p": p}, {"p": np.array(1.0)}, AdamState())
    np.testing.assert_allclose(p.data, -1e-4 / (1 + 1e-8), rtol=1e-12)

    # the 60001st update is the first at 1e-5: the first-step size equals lr
    q = Tensor(np.array(0.0), requires_grad=True)
    adam_step({"q": q}, {"q": np.array(1.0)}, AdamState(step=60_000, m={"q": np.array(0.0)}, v={"q": np.array(0.0)}))
    assert abs(float(q.data)) < 1e-4


def test_adam_is_deterministic():
    def run():
        w = Tensor(np.linspace(-1, 1, 6), requires_grad=True)
        s = AdamState()
        for k in range(3):
            adam_step({"w": w}, {"w": np.cos(np.arange(6.0) + k)}, s)
        return w.data.tobytes()

    assert run() == run()


def test_grad_check_examples():
    p = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    sum_all(p * p).backward()
    np.testing.assert_array_equal(p.grad, [2.0, 4.0])
    assert grad_check(lambda: sum_all(p * p), {"p": p})["p"] < 1e-6
    c = Tensor(np.array([3.0]), requires_grad=True)
    assert grad_check(lambda: sum_all(c * 0.0), {"c": c})["c"] == 0.0
