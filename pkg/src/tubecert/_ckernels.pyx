# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for packed dense networks.

A packed network is three arrays: ``dims`` (layer widths, input first),
``acts`` (one activation code per layer) and ``params`` (for each layer the
row-major weight matrix followed by the bias vector).  Selector modes are
0 = single output ``a``, 1 = ``f_a - f_b``, 2 = ``f_a - max_{j != a} f_j``.
All indices are 0-based here.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport tanh, exp, log1p, fabs, sqrt, isfinite
from libc.stdlib cimport malloc, free

cnp.import_array()

DEF ACT_NONE = 0
DEF ACT_TANH = 1
DEF ACT_SOFTPLUS = 2
DEF ACT_RELU = 3


cdef struct Net:
    const double* params
    const long* dims
    const long* acts
    long n_layers
    long* w_off
    long* b_off
    long* u_off      # offsets of per-layer unit buffers (input included)
    long total_units
    long max_width


cdef int _net_init(Net* net, const double[::1] params, const long[::1] dims,
                   const long[::1] acts) except -1:
    cdef long k, off = 0, uoff = 0, L = acts.shape[0]
    net.params = &params[0]
    net.dims = &dims[0]
    net.acts = &acts[0]
    net.n_layers = L
    net.w_off = <long*> malloc(L * sizeof(long))
    net.b_off = <long*> malloc(L * sizeof(long))
    net.u_off = <long*> malloc((L + 1) * sizeof(long))
    if net.w_off == NULL or net.b_off == NULL or net.u_off == NULL:
        raise MemoryError()
    net.max_width = dims[0]
    for k in range(L):
        net.w_off[k] = off
        off += dims[k + 1] * dims[k]
        net.b_off[k] = off
        off += dims[k + 1]
        if dims[k + 1] > net.max_width:
            net.max_width = dims[k + 1]
    if off != params.shape[0]:
        _net_free(net)
        raise ValueError("parameter vector does not match layer dims")
    for k in range(L + 1):
        net.u_off[k] = uoff
        uoff += dims[k]
    net.total_units = uoff
    return 0


cdef void _net_free(Net* net) noexcept:
    free(net.w_off)
    free(net.b_off)
    free(net.u_off)
    net.w_off = NULL
    net.b_off = NULL
    net.u_off = NULL


cdef inline double _softplus(double z) noexcept nogil:
    if z > 0:
        return z + log1p(exp(-z))
    return log1p(exp(z))


cdef inline double _sigmoid(double z) noexcept nogil:
    cdef double e
    if z >= 0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


cdef void _forward(Net* net, const double* x, double* z, double* a) noexcept nogil:
    """Fill pre-activations ``z`` and activations ``a`` (layer 0 is the input)."""
    cdef long k, i, j, n_in, n_out
    cdef const double* W
    cdef const double* b
    cdef double s
    cdef double* a_in
    cdef double* a_out
    cdef double* z_out
    for i in range(net.dims[0]):
        a[i] = x[i]
        z[i] = x[i]
    for k in range(net.n_layers):
        n_in = net.dims[k]
        n_out = net.dims[k + 1]
        W = net.params + net.w_off[k]
        b = net.params + net.b_off[k]
        a_in = a + net.u_off[k]
        a_out = a + net.u_off[k + 1]
        z_out = z + net.u_off[k + 1]
        for i in range(n_out):
            s = b[i]
            for j in range(n_in):
                s += W[i * n_in + j] * a_in[j]
            z_out[i] = s
            if net.acts[k] == ACT_TANH:
                a_out[i] = tanh(s)
            elif net.acts[k] == ACT_SOFTPLUS:
                a_out[i] = _softplus(s)
            elif net.acts[k] == ACT_RELU:
                a_out[i] = s if s > 0 else 0.0
            else:
                a_out[i] = s


cdef long _resolve(const double* scores, long C, long mode, long ia, long ib,
                   double* coef) noexcept nogil:
    """Write the output weighting for the selector; return the competitor index."""
    cdef long j, best = -1
    for j in range(C):
        coef[j] = 0.0
    if mode == 0:
        coef[ia] = 1.0
        return -1
    if mode == 1:
        coef[ia] = 1.0
        coef[ib] = -1.0
        return ib
    for j in range(C):
        if j == ia:
            continue
        if best < 0 or scores[j] > scores[best]:
            best = j
    coef[ia] = 1.0
    coef[best] = -1.0
    return best


cdef void _backward(Net* net, const double* z, const double* a, const double* coef,
                    double* gbuf, double* gtmp, double* out) noexcept nogil:
    """Reverse sweep: gradient of ``coef . f(x)`` with respect to the input."""
    cdef long k, i, j, n_in, n_out, L = net.n_layers
    cdef const double* W
    cdef const double* z_out
    cdef const double* a_out
    cdef double d, s
    n_out = net.dims[L]
    for i in range(n_out):
        gbuf[i] = coef[i]
    for k in range(L - 1, -1, -1):
        n_in = net.dims[k]
        n_out = net.dims[k + 1]
        W = net.params + net.w_off[k]
        z_out = z + net.u_off[k + 1]
        a_out = a + net.u_off[k + 1]
        # through the activation
        for i in range(n_out):
            if net.acts[k] == ACT_TANH:
                d = 1.0 - a_out[i] * a_out[i]
            elif net.acts[k] == ACT_SOFTPLUS:
                d = _sigmoid(z_out[i])
            elif net.acts[k] == ACT_RELU:
                d = 1.0 if z_out[i] > 0 else 0.0
            else:
                d = 1.0
            gbuf[i] *= d
        # through the affine map
        for j in range(n_in):
            gtmp[j] = 0.0
        for i in range(n_out):
            s = gbuf[i]
            if s != 0.0:
                for j in range(n_in):
                    gtmp[j] += W[i * n_in + j] * s
        for j in range(n_in):
            gbuf[j] = gtmp[j]
    for j in range(net.dims[0]):
        out[j] = gbuf[j]


cdef inline double _dot(const double* u, const double* v, long n) noexcept nogil:
    cdef double s = 0.0
    cdef long i
    for i in range(n):
        s += u[i] * v[i]
    return s


def forward(const double[::1] params, const long[::1] dims, const long[::1] acts,
            const double[::1] x):
    """Output vector of the packed network at ``x``."""
    cdef Net net
    _net_init(&net, params, dims, acts)
    cdef long L = net.n_layers, C = dims[L]
    z = np.empty(net.total_units)
    a = np.empty(net.total_units)
    cdef double[::1] zv = z, av = a
    _forward(&net, &x[0], &zv[0], &av[0])
    out = a[net.u_off[L]:net.u_off[L] + C].copy()
    _net_free(&net)
    return out


def value_and_grad(const double[::1] params, const long[::1] dims,
                   const long[::1] acts, const double[::1] x,
                   long mode, long ia, long ib):
    """Return ``(value, grad, scores, competitor)`` for one selector."""
    cdef Net net
    _net_init(&net, params, dims, acts)
    cdef long L = net.n_layers, C = dims[L], n = dims[0], comp
    z = np.empty(net.total_units)
    a = np.empty(net.total_units)
    coef = np.empty(C)
    gbuf = np.empty(net.max_width)
    gtmp = np.empty(net.max_width)
    grad = np.empty(n)
    cdef double[::1] zv = z, av = a, cv = coef, g1 = gbuf, g2 = gtmp, gv = grad
    cdef double value
    with nogil:
        _forward(&net, &x[0], &zv[0], &av[0])
        comp = _resolve(&av[net.u_off[L]], C, mode, ia, ib, &cv[0])
        value = _dot(&cv[0], &av[net.u_off[L]], C)
        _backward(&net, &zv[0], &av[0], &cv[0], &g1[0], &g2[0], &gv[0])
    scores = a[net.u_off[L]:net.u_off[L] + C].copy()
    _net_free(&net)
    return value, grad, scores, comp


def penalty_adam(const double[::1] params, const long[::1] dims,
                 const long[::1] acts, const double[::1] x, long label,
                 double c, double tol, long max_iters, double lr, double beta1,
                 double beta2, double eps, const double[::1] delta0):
    """Adam on ``||d|| + c * max(0, L(x + d))`` with the band stop ``-tol < L <= 0``.

    Returns ``(delta, converged, iterations, margin)``.
    """
    cdef Net net
    _net_init(&net, params, dims, acts)
    cdef long L = net.n_layers, C = dims[L], n = dims[0]
    cdef long it = 0, i
    cdef int converged = 0, finite = 1
    cdef double value = 0.0, nrm, b1t = 1.0, b2t = 1.0, mh, vh, g
    z = np.empty(net.total_units)
    a = np.empty(net.total_units)
    coef = np.empty(C)
    gbuf = np.empty(net.max_width)
    gtmp = np.empty(net.max_width)
    grad = np.empty(n)
    pt = np.empty(n)
    delta = np.array(delta0, dtype=np.float64, copy=True)
    m = np.zeros(n)
    v = np.zeros(n)
    cdef double[::1] zv = z, av = a, cv = coef, g1 = gbuf, g2 = gtmp
    cdef double[::1] gv = grad, pv = pt, dv = delta, mv = m, vv = v
    with nogil:
        while True:
            for i in range(n):
                pv[i] = x[i] + dv[i]
            _forward(&net, &pv[0], &zv[0], &av[0])
            _resolve(&av[net.u_off[L]], C, 2, label, -1, &cv[0])
            value = _dot(&cv[0], &av[net.u_off[L]], C)
            if not isfinite(value):
                finite = 0
                break
            if -tol < value <= 0.0:
                converged = 1
                break
            if it >= max_iters:
                break
            if value > 0.0:
                _backward(&net, &zv[0], &av[0], &cv[0], &g1[0], &g2[0], &gv[0])
            else:
                for i in range(n):
                    gv[i] = 0.0
            nrm = sqrt(_dot(&dv[0], &dv[0], n))
            it += 1
            b1t *= beta1
            b2t *= beta2
            for i in range(n):
                g = c * gv[i] if value > 0.0 else 0.0
                if nrm > 0.0:
                    g += dv[i] / nrm
                mv[i] = beta1 * mv[i] + (1.0 - beta1) * g
                vv[i] = beta2 * vv[i] + (1.0 - beta2) * g * g
                mh = mv[i] / (1.0 - b1t)
                vh = vv[i] / (1.0 - b2t)
                dv[i] -= lr * mh / (sqrt(vh) + eps)
    _net_free(&net)
    if not finite:
        raise FloatingPointError("non-finite margin during penalty descent")
    return delta, bool(converged), it, value
