"""Dense feed-forward network: parameters, init, forward/backward, grad check."""

from __future__ import annotations

import numpy as np

from .backend import kernels


class DenseNet:
    """Affine/ReLU stack with inverted dropout on hidden layers.

    `sizes` runs input -> hidden... -> output. Dropout is active only when a
    forward pass is asked to train and an rng is supplied; masks are
    prescaled so inference needs no rescaling.
    """

    def __init__(self, sizes, dropout: float = 0.0, dtype=np.float64):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if not 0.0 <= dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        self.sizes = tuple(int(s) for s in sizes)
        self.dropout = float(dropout)
        self.dtype = dtype
        self.weights = [np.zeros((a, b), dtype=dtype)
                        for a, b in zip(self.sizes[:-1], self.sizes[1:])]
        self.biases = [np.zeros(b, dtype=dtype) for b in self.sizes[1:]]

    @property
    def n_hidden(self) -> int:
        return len(self.sizes) - 2

    def init_params(self, rng: np.random.Generator, zero_output: bool = True) -> "DenseNet":
        # He init on ReLU layers; by default the linear output starts at zero
        # so the net begins as the zero predictor (targets are small
        # velocities and an O(1) initial output dominates early training).
        for l, w in enumerate(self.weights):
            fan_in = w.shape[0]
            if l < len(self.weights) - 1 or not zero_output:
                scale = np.sqrt((2.0 if l < len(self.weights) - 1 else 1.0) / fan_in)
                self.weights[l] = (rng.standard_normal(w.shape) * scale).astype(self.dtype)
            else:
                self.weights[l] = np.zeros_like(w)
            self.biases[l][:] = 0.0
        return self

    def make_masks(self, n_rows: int, rng: np.random.Generator):
        if self.dropout <= 0.0:
            return None
        keep = 1.0 - self.dropout
        return [
            (rng.random((n_rows, w)) < keep).astype(self.dtype) / keep
            for w in self.sizes[1:-1]
        ]

    def _kernels(self):
        if np.dtype(self.dtype) != np.float64:
            from . import kernels_numpy  # compiled core is float64-only

            return kernels_numpy
        return kernels()

    def forward(self, x, masks=None) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=self.dtype)
        return self._kernels().forward(self.weights, self.biases, x, masks)

    def forward_cached(self, x, masks=None):
        x = np.ascontiguousarray(x, dtype=self.dtype)
        return self._kernels().forward_cached(self.weights, self.biases, x, masks)

    def backward(self, inputs, gates, masks, grad_out):
        grad_out = np.ascontiguousarray(grad_out, dtype=self.dtype)
        return self._kernels().backward(self.weights, inputs, gates, masks, grad_out)

    # --- parameter plumbing (optimizers, checkpoints) ---

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def decay_flags(self) -> list[bool]:
        # decoupled weight decay applies to weights, never biases
        return [True, False] * len(self.weights)

    def set_parameters(self, params) -> None:
        it = iter(params)
        for l in range(len(self.weights)):
            self.weights[l] = np.array(next(it), dtype=self.dtype)
            self.biases[l] = np.array(next(it), dtype=self.dtype)

    def copy(self) -> "DenseNet":
        dup = DenseNet(self.sizes, self.dropout, self.dtype)
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup


def grad_check(net: DenseNet, x, epsilon: float = 1e-5,
               rng: np.random.Generator | None = None) -> float:
    """Max relative error of analytic vs central-difference gradients.

    Uses the loss 0.5 * sum((net(x) - y0)^2) against a fixed random target.
    Near-zero entries are compared against a floor of 1e-6 times the largest
    gradient magnitude, so roundoff on vanishing gradients does not mask a
    real error elsewhere. Dropout must be off (no masks are used here).
    """
    x = np.ascontiguousarray(x, dtype=net.dtype)
    rng = rng or np.random.default_rng(0)
    y0 = rng.standard_normal((x.shape[0], net.sizes[-1])).astype(net.dtype)

    def loss() -> float:
        d = net.forward(x) - y0
        return float(0.5 * np.sum(d * d))

    out, inputs, gates = net.forward_cached(x)
    grad_w, grad_b, _ = net.backward(inputs, gates, None, out - y0)
    analytic = []
    for gw, gb in zip(grad_w, grad_b):
        analytic += [gw, gb]
    scale = max((float(np.max(np.abs(g))) for g in analytic), default=0.0)
    floor = max(1e-6 * scale, 1e-12)

    worst = 0.0
    params = net.parameters()
    for p, g in zip(params, analytic):
        flat = p.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            hi = loss()
            flat[i] = orig - epsilon
            lo = loss()
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * epsilon)
            denom = max(abs(gflat[i]) + abs(numeric), floor)
            worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst
