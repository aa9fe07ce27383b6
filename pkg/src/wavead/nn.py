"""Layer primitives with hand-derived gradients (float64 throughout).

Convolutions use stride-2 "same" padding so spatial sizes halve with
ceiling rounding; transpose convolutions are implemented as the exact
adjoint of the matching convolution, which makes decoder output shapes
line up with encoder input shapes by construction.

Array layout: activations (N, H, W, C), conv kernels (kh, kw, C_in, C_out).
"""

from __future__ import annotations

import numpy as np


def _same_pad(size: int, taps: int, stride: int) -> tuple[int, int, int]:
    out = -(-size // stride)
    total = max((out - 1) * stride + taps - size, 0)
    return out, total // 2, total - total // 2


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 2) -> np.ndarray:
    kh, kw, _, c_out = w.shape
    n, h_in, w_in, _ = x.shape
    h_out, ph_lo, ph_hi = _same_pad(h_in, kh, stride)
    w_out, pw_lo, pw_hi = _same_pad(w_in, kw, stride)
    xp = np.pad(x, ((0, 0), (ph_lo, ph_hi), (pw_lo, pw_hi), (0, 0)))
    y = np.broadcast_to(b, (n, h_out, w_out, c_out)).copy()
    for i in range(kh):
        for j in range(kw):
            xs = xp[:, i : i + stride * h_out : stride, j : j + stride * w_out : stride, :]
            y += np.einsum("nhwc,co->nhwo", xs, w[i, j], optimize=True)
    return y


def conv2d_input_grad(
    g: np.ndarray, w: np.ndarray, stride: int, in_shape: tuple[int, int]
) -> np.ndarray:
    kh, kw, c_in, _ = w.shape
    n, h_out, w_out, _ = g.shape
    h_in, w_in = in_shape
    _, ph_lo, ph_hi = _same_pad(h_in, kh, stride)
    _, pw_lo, pw_hi = _same_pad(w_in, kw, stride)
    dxp = np.zeros((n, h_in + ph_lo + ph_hi, w_in + pw_lo + pw_hi, c_in))
    for i in range(kh):
        for j in range(kw):
            dxp[:, i : i + stride * h_out : stride, j : j + stride * w_out : stride, :] += (
                np.einsum("nhwo,co->nhwc", g, w[i, j], optimize=True)
            )
    return dxp[:, ph_lo : ph_lo + h_in, pw_lo : pw_lo + w_in, :]


def conv2d_weight_grad(
    x: np.ndarray, g: np.ndarray, stride: int, kernel_shape: tuple[int, int]
) -> tuple[np.ndarray, np.ndarray]:
    kh, kw = kernel_shape
    n, h_in, w_in, c_in = x.shape
    _, h_out, w_out, c_out = g.shape
    _, ph_lo, ph_hi = _same_pad(h_in, kh, stride)
    _, pw_lo, pw_hi = _same_pad(w_in, kw, stride)
    xp = np.pad(x, ((0, 0), (ph_lo, ph_hi), (pw_lo, pw_hi), (0, 0)))
    dw = np.empty((kh, kw, c_in, c_out))
    for i in range(kh):
        for j in range(kw):
            xs = xp[:, i : i + stride * h_out : stride, j : j + stride * w_out : stride, :]
            dw[i, j] = np.einsum("nhwc,nhwo->co", xs, g, optimize=True)
    db = g.sum(axis=(0, 1, 2))
    return dw, db


def conv2d_transpose(
    x: np.ndarray,
    w: np.ndarray,
    b: np.ndarray,
    stride: int,
    out_shape: tuple[int, int],
) -> np.ndarray:
    """Adjoint of ``conv2d``: maps (N,h,w,C_out) back to (N,H,W,C_in) + bias."""
    return conv2d_input_grad(x, w, stride, out_shape) + b


def conv2d_transpose_input_grad(g: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    return conv2d(g, w, np.zeros(w.shape[-1]), stride)


def conv2d_transpose_weight_grad(
    x: np.ndarray, g: np.ndarray, stride: int, kernel_shape: tuple[int, int]
) -> tuple[np.ndarray, np.ndarray]:
    # For y = A^T x + b, dL/dw has the same structure as a conv weight grad
    # with the roles of input and output reversed.
    dw, _ = conv2d_weight_grad(g, x, stride, kernel_shape)
    db = g.sum(axis=(0, 1, 2))
    return dw, db


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_grad(g: np.ndarray, pre: np.ndarray) -> np.ndarray:
    return g * (pre > 0.0)


class Adam:
    """Adaptive-moment gradient descent over a dict of parameter arrays."""

    def __init__(
        self,
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name, g in grads.items():
            if name not in self._m:
                self._m[name] = np.zeros_like(g)
                self._v[name] = np.zeros_like(g)
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / (1.0 - self.beta1**self.t)
            v_hat = v / (1.0 - self.beta2**self.t)
            params[name] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
