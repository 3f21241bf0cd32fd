"""Pure-numpy dense-layer kernels; the reference for the compiled core.

Network shape: hidden layers are affine + ReLU (+ inverted dropout when a
mask is supplied), the output layer is affine. Dropout masks are prescaled
(0 or 1/keep) and generated by the caller so both backends see identical
randomness.
"""

from __future__ import annotations

import numpy as np


def forward(weights, biases, x, masks=None):
    """Network output for input rows `x`."""
    h = x
    last = len(weights) - 1
    for l in range(last):
        h = np.maximum(h @ weights[l] + biases[l], 0.0)
        if masks is not None:
            h = h * masks[l]
    return h @ weights[last] + biases[last]


def forward_cached(weights, biases, x, masks=None):
    """Output plus the caches backward needs: layer inputs and ReLU gates."""
    inputs = [x]
    gates = []
    h = x
    last = len(weights) - 1
    for l in range(last):
        z = h @ weights[l] + biases[l]
        gate = z > 0.0
        h = np.where(gate, z, 0.0)
        if masks is not None:
            h = h * masks[l]
        gates.append(gate)
        inputs.append(h)
    out = h @ weights[last] + biases[last]
    return out, inputs, gates


def backward(weights, inputs, gates, masks, grad_out):
    """Parameter and input gradients from the output gradient."""
    last = len(weights) - 1
    grad_w = [None] * len(weights)
    grad_b = [None] * len(weights)
    g = grad_out
    grad_w[last] = inputs[last].T @ g
    grad_b[last] = g.sum(axis=0)
    g = g @ weights[last].T
    for l in range(last - 1, -1, -1):
        if masks is not None:
            g = g * masks[l]
        g = np.where(gates[l], g, 0.0)
        grad_w[l] = inputs[l].T @ g
        grad_b[l] = g.sum(axis=0)
        g = g @ weights[l].T
    return grad_w, grad_b, g
