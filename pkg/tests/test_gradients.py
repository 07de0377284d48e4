"""Reverse-mode gradients vs. central finite differences for every operator.

Each check builds a scalar loss by projecting the operator output onto a
fixed random direction, computes the analytic gradient with backward(), and
compares against the numeric oracle from gradcheck.py.  Twenty seeded
instances per operator, relative error below 1e-4.
"""

import numpy as np
import pytest

from aftx.layers import feed_forward, layer_norm_residual, multi_head_attention
from aftx.tensor import (
    Tensor,
    add,
    backward,
    conv1d,
    dropout,
    layer_norm,
    matmul,
    mul,
    relu,
    reshape,
    softmax,
    softmax_cross_entropy,
    stack,
    tmean,
    transpose,
    tsum,
)

from gradcheck import max_rel_error, numeric_gradient, projection

TOL = 1e-4
N_INSTANCES = 20


def check_op(build_loss, arrays, seed):
    """``build_loss(*numpy_arrays) -> scalar`` checked w.r.t. each array."""
    for idx in range(len(arrays)):
        def scalar(perturbed, idx=idx):
            args = list(arrays)
            args[idx] = perturbed
            return build_loss(*args)

        tensors = [Tensor(a, requires_grad=True) for a in arrays]
        loss = build_loss(*tensors, as_tensors=True)
        backward(loss)
        numeric = numeric_gradient(scalar, arrays[idx])
        err = max_rel_error(tensors[idx].grad, numeric)
        assert err < TOL, f"seed {seed}, arg {idx}: rel err {err:.2e}"


def run_instances(make_case):
    for seed in range(N_INSTANCES):
        rng = np.random.default_rng(seed)
        make_case(rng, seed)


class TestElementwiseOps:
    def test_add_with_broadcast(self):
        def case(rng, seed):
            a, b = rng.standard_normal((4, 5)), rng.standard_normal(5)
            r = projection(rng, (4, 5))

            def loss(a_, b_, as_tensors=False):
                if as_tensors:
                    return tsum(add(a_, b_) * Tensor(r))
                return float(((a_ + b_) * r).sum())

            check_op(loss, [a, b], seed)
        run_instances(case)

    def test_mul(self):
        def case(rng, seed):
            a, b = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
            r = projection(rng, (3, 4))

            def loss(a_, b_, as_tensors=False):
                if as_tensors:
                    return tsum(mul(a_, b_) * Tensor(r))
                return float((a_ * b_ * r).sum())

            check_op(loss, [a, b], seed)
        run_instances(case)

    def test_relu(self):
        def case(rng, seed):
            # keep inputs away from the kink so the FD oracle stays clean
            x = rng.uniform(0.1, 1.0, (4, 6)) * rng.choice([-1.0, 1.0], (4, 6))
            r = projection(rng, (4, 6))

            def loss(x_, as_tensors=False):
                if as_tensors:
                    return tsum(relu(x_) * Tensor(r))
                return float((np.maximum(x_, 0.0) * r).sum())

            check_op(loss, [x], seed)
        run_instances(case)


class TestShapeOps:
    def test_matmul_2d(self):
        def case(rng, seed):
            a, b = rng.standard_normal((3, 4)), rng.standard_normal((4, 2))
            r = projection(rng, (3, 2))

            def loss(a_, b_, as_tensors=False):
                if as_tensors:
                    return tsum(matmul(a_, b_) * Tensor(r))
                return float((a_ @ b_ * r).sum())

            check_op(loss, [a, b], seed)
        run_instances(case)

    def test_matmul_batched(self):
        def case(rng, seed):
            a, b = rng.standard_normal((2, 3, 4)), rng.standard_normal((2, 4, 3))
            r = projection(rng, (2, 3, 3))

            def loss(a_, b_, as_tensors=False):
                if as_tensors:
                    return tsum(matmul(a_, b_) * Tensor(r))
                return float((np.matmul(a_, b_) * r).sum())

            check_op(loss, [a, b], seed)
        run_instances(case)

    def test_reshape_transpose_mean(self):
        def case(rng, seed):
            x = rng.standard_normal((2, 3, 4))
            r = projection(rng, (4, 6))

            def loss(x_, as_tensors=False):
                if as_tensors:
                    flat = reshape(transpose(x_, (2, 0, 1)), (4, 6))
                    return tmean(flat * Tensor(r)) + tsum(tmean(x_, axis=1))
                flat = x_.transpose(2, 0, 1).reshape(4, 6)
                return float((flat * r).mean() + x_.mean(axis=1).sum())

            check_op(loss, [x], seed)
        run_instances(case)

    def test_stack(self):
        def case(rng, seed):
            a, b, c = (rng.standard_normal(5) for _ in range(3))
            r = projection(rng, (3, 5))

            def loss(a_, b_, c_, as_tensors=False):
                if as_tensors:
                    return tsum(stack([a_, b_, c_]) * Tensor(r))
                return float((np.stack([a_, b_, c_]) * r).sum())

            check_op(loss, [a, b, c], seed)
        run_instances(case)


class TestSoftmaxFamily:
    def test_softmax(self):
        def case(rng, seed):
            x = rng.standard_normal((4, 7))
            r = projection(rng, (4, 7))

            def loss(x_, as_tensors=False):
                if as_tensors:
                    return tsum(softmax(x_) * Tensor(r))
                e = np.exp(x_ - x_.max(axis=-1, keepdims=True))
                return float((e / e.sum(axis=-1, keepdims=True) * r).sum())

            check_op(loss, [x], seed)
        run_instances(case)

    def test_softmax_cross_entropy(self):
        def case(rng, seed):
            logits = rng.standard_normal((6, 2))
            labels = rng.integers(0, 2, 6)

            def loss(z_, as_tensors=False):
                if as_tensors:
                    return softmax_cross_entropy(z_, labels)
                shifted = z_ - z_.max(axis=1, keepdims=True)
                lse = np.log(np.exp(shifted).sum(axis=1))
                return float((lse - shifted[np.arange(6), labels]).mean())

            check_op(loss, [logits], seed)
        run_instances(case)


class TestDropoutGrad:
    def test_fixed_mask_gradient(self):
        def case(rng, seed):
            x = rng.standard_normal((5, 5))
            r = projection(rng, (5, 5))
            mask_seed = 1000 + seed

            def loss(x_, as_tensors=False):
                gen = np.random.default_rng(mask_seed)
                if as_tensors:
                    return tsum(dropout(x_, 0.4, True, gen) * Tensor(r))
                keep = gen.random(x_.shape) >= 0.4
                return float((np.where(keep, x_ / 0.6, 0.0) * r).sum())

            check_op(loss, [x], seed)
        run_instances(case)


class TestConvGrad:
    def test_conv1d_all_arguments(self):
        def case(rng, seed):
            x = rng.standard_normal((2, 13))
            w = rng.standard_normal((3, 2, 3))
            b = rng.standard_normal(3)
            r = projection(rng, (3, 6))

            def loss(x_, w_, b_, as_tensors=False):
                if as_tensors:
                    return tsum(conv1d(x_, w_, b_, stride=2) * Tensor(r))
                out = np.zeros((3, 6))
                for o in range(3):
                    for j in range(6):
                        out[o, j] = (w_[o] * x_[:, 2 * j:2 * j + 3]).sum() + b_[o]
                return float((out * r).sum())

            check_op(loss, [x, w, b], seed)
        run_instances(case)


class TestNormGrad:
    def test_layer_norm_all_arguments(self):
        def case(rng, seed):
            x = rng.standard_normal((4, 6))
            gain = rng.standard_normal(6)
            bias = rng.standard_normal(6)
            r = projection(rng, (4, 6))

            def loss(x_, g_, b_, as_tensors=False):
                if as_tensors:
                    return tsum(layer_norm(x_, g_, b_) * Tensor(r))
                mu = x_.mean(axis=-1, keepdims=True)
                var = ((x_ - mu) ** 2).mean(axis=-1, keepdims=True)
                xhat = (x_ - mu) / np.sqrt(var + 1e-5)
                return float(((g_ * xhat + b_) * r).sum())

            check_op(loss, [x, gain, bias], seed)
        run_instances(case)


def _mha_numpy(x, num_heads, wq, bq, wk, bk, wv, bv, wo, bo):
    """Independent numpy attention used only as the FD forward."""
    frames, dim = x.shape
    hd = dim // num_heads
    q, k, v = x @ wq + bq, x @ wk + bk, x @ wv + bv

    def split(t):
        return t.reshape(frames, num_heads, hd).transpose(1, 0, 2)

    qh, kh, vh = split(q), split(k), split(v)
    scores = np.matmul(qh, kh.transpose(0, 2, 1)) / np.sqrt(hd)
    e = np.exp(scores - scores.max(axis=-1, keepdims=True))
    attn = e / e.sum(axis=-1, keepdims=True)
    ctx = np.matmul(attn, vh).transpose(1, 0, 2).reshape(frames, dim)
    return ctx @ wo + bo


class TestAttentionGrad:
    def test_mha_all_arguments(self):
        def case(rng, seed):
            frames, dim, heads = 3, 4, 2
            x = rng.standard_normal((frames, dim))
            mats = [rng.standard_normal((dim, dim)) * 0.5 for _ in range(4)]
            vecs = [rng.standard_normal(dim) * 0.1 for _ in range(4)]
            arrays = [x, mats[0], vecs[0], mats[1], vecs[1],
                      mats[2], vecs[2], mats[3], vecs[3]]
            r = projection(rng, (frames, dim))

            def loss(*args, as_tensors=False):
                if as_tensors:
                    return tsum(multi_head_attention(args[0], heads, *args[1:]) * Tensor(r))
                return float((_mha_numpy(args[0], heads, *args[1:]) * r).sum())

            check_op(loss, arrays, seed)
        run_instances(case)


class TestFeedForwardGrad:
    def test_ffn_all_arguments(self):
        def case(rng, seed):
            x = rng.standard_normal((3, 4))
            w1, b1 = rng.standard_normal((4, 6)), rng.standard_normal(6)
            w2, b2 = rng.standard_normal((6, 4)), rng.standard_normal(4)
            # skip instances with pre-activations near the ReLU kink
            if np.min(np.abs(x @ w1 + b1)) < 1e-3:
                return
            r = projection(rng, (3, 4))

            def loss(x_, w1_, b1_, w2_, b2_, as_tensors=False):
                if as_tensors:
                    return tsum(feed_forward(x_, w1_, b1_, w2_, b2_) * Tensor(r))
                return float(((np.maximum(x_ @ w1_ + b1_, 0.0) @ w2_ + b2_) * r).sum())

            check_op(loss, [x, w1, b1, w2, b2], seed)
        run_instances(case)


class TestResidualNormGrad:
    def test_layer_norm_residual_all_arguments(self):
        def case(rng, seed):
            x = rng.standard_normal((3, 5))
            sub = rng.standard_normal((3, 5))
            gain, bias = rng.standard_normal(5), rng.standard_normal(5)
            r = projection(rng, (3, 5))

            def loss(x_, s_, g_, b_, as_tensors=False):
                if as_tensors:
                    return tsum(layer_norm_residual(x_, s_, g_, b_) * Tensor(r))
                y = x_ + s_
                mu = y.mean(axis=-1, keepdims=True)
                var = ((y - mu) ** 2).mean(axis=-1, keepdims=True)
                return float(((g_ * (y - mu) / np.sqrt(var + 1e-5) + b_) * r).sum())

            check_op(loss, [x, sub, gain, bias], seed)
        run_instances(case)
