"""Pure-numpy versions of the compiled kernels (same signatures and semantics)."""

import numpy as np

ACT_NONE, ACT_TANH, ACT_SOFTPLUS, ACT_RELU = 0, 1, 2, 3


def _unpack(params, dims):
    layers = []
    off = 0
    for k in range(len(dims) - 1):
        n_in, n_out = int(dims[k]), int(dims[k + 1])
        W = params[off:off + n_out * n_in].reshape(n_out, n_in)
        off += n_out * n_in
        b = params[off:off + n_out]
        off += n_out
        layers.append((W, b))
    if off != params.shape[0]:
        raise ValueError("parameter vector does not match layer dims")
    return layers


def _act(code, z):
    if code == ACT_TANH:
        return np.tanh(z)
    if code == ACT_SOFTPLUS:
        return np.logaddexp(0.0, z)
    if code == ACT_RELU:
        return np.maximum(z, 0.0)
    return z


def _act_deriv(code, z, a):
    if code == ACT_TANH:
        return 1.0 - a * a
    if code == ACT_SOFTPLUS:
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    if code == ACT_RELU:
        return (z > 0).astype(np.float64)
    return np.ones_like(z)


def _forward_cache(layers, acts, x):
    zs, as_ = [x], [x]
    a = x
    for (W, b), code in zip(layers, acts):
        z = W @ a + b
        a = _act(code, z)
        zs.append(z)
        as_.append(a)
    return zs, as_


def _resolve(scores, mode, ia, ib):
    coef = np.zeros(scores.shape[0])
    if mode == 0:
        coef[ia] = 1.0
        return coef, -1
    if mode == 1:
        coef[ia] = 1.0
        coef[ib] = -1.0
        return coef, ib
    best = -1
    for j in range(scores.shape[0]):
        if j == ia:
            continue
        if best < 0 or scores[j] > scores[best]:
            best = j
    coef[ia] = 1.0
    coef[best] = -1.0
    return coef, best


def _backward(layers, acts, zs, as_, coef):
    g = coef.copy()
    for k in range(len(layers) - 1, -1, -1):
        W, _ = layers[k]
        g = g * _act_deriv(acts[k], zs[k + 1], as_[k + 1])
        g = W.T @ g
    return g


def forward(params, dims, acts, x):
    layers = _unpack(np.asarray(params), dims)
    _, as_ = _forward_cache(layers, acts, np.asarray(x, dtype=np.float64))
    return as_[-1].copy()


def value_and_grad(params, dims, acts, x, mode, ia, ib):
    layers = _unpack(np.asarray(params), dims)
    zs, as_ = _forward_cache(layers, acts, np.asarray(x, dtype=np.float64))
    scores = as_[-1]
    coef, comp = _resolve(scores, mode, ia, ib)
    grad = _backward(layers, acts, zs, as_, coef)
    return float(coef @ scores), grad, scores.copy(), comp


def penalty_adam(params, dims, acts, x, label, c, tol, max_iters, lr, beta1,
                 beta2, eps, delta0):
    layers = _unpack(np.asarray(params), dims)
    x = np.asarray(x, dtype=np.float64)
    delta = np.array(delta0, dtype=np.float64, copy=True)
    m = np.zeros_like(delta)
    v = np.zeros_like(delta)
    b1t = b2t = 1.0
    it = 0
    while True:
        zs, as_ = _forward_cache(layers, acts, x + delta)
        coef, _ = _resolve(as_[-1], 2, label, -1)
        value = float(coef @ as_[-1])
        if not np.isfinite(value):
            raise FloatingPointError("non-finite margin during penalty descent")
        if -tol < value <= 0.0:
            return delta, True, it, value
        if it >= max_iters:
            return delta, False, it, value
        g = c * _backward(layers, acts, zs, as_, coef) if value > 0.0 else np.zeros_like(delta)
        nrm = np.sqrt(delta @ delta)
        if nrm > 0.0:
            g = g + delta / nrm
        it += 1
        b1t *= beta1
        b2t *= beta2
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        delta = delta - lr * (m / (1.0 - b1t)) / (np.sqrt(v / (1.0 - b2t)) + eps)
