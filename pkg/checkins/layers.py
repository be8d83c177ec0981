"""Forward and backward passes of the layers used by the unified model.

Every forward function returns (out, cache); the matching backward function
takes the upstream gradient and that cache. Shapes follow (N, F, H, W) for
feature maps and (N, D) for dense activations.
"""
import numpy as np


def conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Same-size convolution of single-plane inputs, stride 1, zero padding.

    - x: inputs of shape (N, H, W)
    - w: filters of shape (F, KH, KW) with odd KH, KW
    - b: biases of shape (F,)

    Returns out of shape (N, F, H, W).
    """
    n, height, width = x.shape
    filters, kh, kw = w.shape
    ph, pw = kh // 2, kw // 2
    padded = np.pad(x, ((0, 0), (ph, ph), (pw, pw)))
    # patches[n, h, w, k] is input pixel k of the receptive field at (h, w)
    patches = np.stack(
        [padded[:, i:i + height, j:j + width] for i in range(kh) for j in range(kw)],
        axis=-1,
    )
    out = patches @ w.reshape(filters, -1).T + b
    return out.transpose(0, 3, 1, 2), (patches, w.shape)


def conv_backward(dout: np.ndarray, cache):
    """Gradients of the filters and biases (inputs are data, not parameters)."""
    patches, w_shape = cache
    filters = w_shape[0]
    d = dout.transpose(0, 2, 3, 1).reshape(-1, filters)
    p = patches.reshape(d.shape[0], -1)
    dw = (d.T @ p).reshape(w_shape)
    db = d.sum(axis=0)
    return dw, db


def relu_forward(x: np.ndarray):
    return np.maximum(x, 0.0), x


def relu_backward(dout: np.ndarray, cache):
    return dout * (cache > 0)


def max_pool_forward(x: np.ndarray):
    """2x2 max pooling with stride 2; odd trailing rows/columns are dropped."""
    n, f, height, width = x.shape
    ph, pw = height // 2, width // 2
    cropped = x[:, :, :2 * ph, :2 * pw]
    windows = cropped.reshape(n, f, ph, 2, pw, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, f, ph, pw, 4)
    argmax = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]
    return out, (x.shape, argmax)


def max_pool_backward(dout: np.ndarray, cache):
    shape, argmax = cache
    n, f, height, width = shape
    ph, pw = argmax.shape[2], argmax.shape[3]
    windows = np.zeros((n, f, ph, pw, 4), dtype=dout.dtype)
    np.put_along_axis(windows, argmax[..., None], dout[..., None], axis=-1)
    cropped = windows.reshape(n, f, ph, pw, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, f, 2 * ph, 2 * pw)
    dx = np.zeros(shape, dtype=dout.dtype)
    dx[:, :, :2 * ph, :2 * pw] = cropped
    return dx


def affine_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    return x @ w + b, (x, w)


def affine_backward(dout: np.ndarray, cache):
    x, w = cache
    return dout @ w.T, x.T @ dout, dout.sum(axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, targets: np.ndarray):
    """Mean cross-entropy and its gradient with respect to the logits."""
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -log_probs[np.arange(n), targets].mean()
    dlogits = np.exp(log_probs)
    dlogits[np.arange(n), targets] -= 1.0
    return float(loss), dlogits / n


def pooled_shape(height: int, width: int) -> tuple[int, int]:
    return height // 2, width // 2
