"""NumPy reference implementation of the dense per-sample kernels.

This is the fallback backend; the compiled extension in ``_core.pyx``
implements the same five functions with identical semantics.
"""

import numpy as np

NAME = "numpy"


def affine(W, b, x):
    """z = W @ x + b for W of shape (m, n), x of shape (n,)."""
    return W @ x + b


def affine_input_grad(W, dz):
    """dx = W.T @ dz."""
    return W.T @ dz


def weight_grad(dz, x):
    """dW = outer(dz, x)."""
    return np.outer(dz, x)


def relu(z):
    return np.maximum(z, 0.0)


def relu_grad(z, da):
    """Subgradient convention: d/dz max(0, z) = 0 at z = 0."""
    return np.where(z > 0.0, da, 0.0)
