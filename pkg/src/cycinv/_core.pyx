# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled compute kernels.

Same interface as cycinv._kernels_py: elementwise kernels take flat views,
row kernels take [B, C] matrices, reductions accumulate in double. Kept in
lockstep with the fallback so the two backends agree to rounding error.
"""

import numpy as np

from libc.math cimport cos, exp, expf, fabs, fabsf, log, logf, sin, sqrt, sqrtf, tanh, tanhf

ctypedef fused real:
    float
    double


cdef inline object _empty1(Py_ssize_t n, bint single):
    return np.empty(n, dtype=np.float32 if single else np.float64)


cdef inline object _empty2(Py_ssize_t b, Py_ssize_t c, bint single):
    return np.empty((b, c), dtype=np.float32 if single else np.float64)


def leaky_relu_fwd(real[::1] x, double slope):
    cdef Py_ssize_t i, n = x.shape[0]
    out_arr = _empty1(n, real is float)
    cdef real[::1] out = out_arr
    cdef real s = <real> slope
    for i in range(n):
        out[i] = x[i] if x[i] > 0 else x[i] * s
    return out_arr


def leaky_relu_bwd(real[::1] x, real[::1] g, double slope):
    cdef Py_ssize_t i, n = x.shape[0]
    out_arr = _empty1(n, real is float)
    cdef real[::1] out = out_arr
    cdef real s = <real> slope
    for i in range(n):
        out[i] = g[i] if x[i] > 0 else g[i] * s
    return out_arr


def sigmoid_fwd(x):
    # NumPy's SIMD exp beats a scalar-libm loop by ~5x on float32
    return 1.0 / (1.0 + np.exp(-x))


def sigmoid_bwd(real[::1] y, real[::1] g):
    cdef Py_ssize_t i, n = y.shape[0]
    out_arr = _empty1(n, real is float)
    cdef real[::1] out = out_arr
    for i in range(n):
        out[i] = g[i] * y[i] * (<real> 1.0 - y[i])
    return out_arr


def tanh_fwd(x):
    # scalar tanhf is dramatically slower than NumPy's vectorized tanh
    return np.tanh(x)


def tanh_bwd(real[::1] y, real[::1] g):
    cdef Py_ssize_t i, n = y.shape[0]
    out_arr = _empty1(n, real is float)
    cdef real[::1] out = out_arr
    for i in range(n):
        out[i] = g[i] * (<real> 1.0 - y[i] * y[i])
    return out_arr


def exp_fwd(x):
    return np.exp(x)


def exp_bwd(real[::1] y, real[::1] g):
    cdef Py_ssize_t i, n = y.shape[0]
    out_arr = _empty1(n, real is float)
    cdef real[::1] out = out_arr
    for i in range(n):
        out[i] = g[i] * y[i]
    return out_arr


def log_fwd(real[::1] x):
    cdef Py_ssize_t i, n = x.shape[0]
    out_arr = _empty1(n, real is float)
    cdef real[::1] out = out_arr
    for i in range(n):
        if real is float:
            out[i] = logf(x[i])
        else:
            out[i] = log(x[i])
    return out_arr


def log_bwd(real[::1] x, real[::1] g):
    cdef Py_ssize_t i, n = x.shape[0]
    out_arr = _empty1(n, real is float)
    cdef real[::1] out = out_arr
    for i in range(n):
        out[i] = g[i] / x[i]
    return out_arr


def softmax_ce_fwd(real[:, ::1] logits, long long[::1] targets):
    cdef Py_ssize_t i, j, b = logits.shape[0], c = logits.shape[1]
    probs_arr = _empty2(b, c, real is float)
    cdef real[:, ::1] probs = probs_arr
    cdef real m, e
    cdef double z, loss = 0.0
    for i in range(b):
        m = logits[i, 0]
        for j in range(1, c):
            if logits[i, j] > m:
                m = logits[i, j]
        z = 0.0
        for j in range(c):
            if real is float:
                e = expf(logits[i, j] - m)
            else:
                e = exp(logits[i, j] - m)
            probs[i, j] = e
            z += e
        for j in range(c):
            probs[i, j] = <real> (probs[i, j] / z)
        loss -= log(<double> probs[i, targets[i]])
    return loss / b, probs_arr


def softmax_ce_bwd(real[:, ::1] probs, long long[::1] targets, double gscale):
    cdef Py_ssize_t i, j, b = probs.shape[0], c = probs.shape[1]
    out_arr = _empty2(b, c, real is float)
    cdef real[:, ::1] out = out_arr
    cdef real k = <real> (gscale / b)
    for i in range(b):
        for j in range(c):
            out[i, j] = probs[i, j] * k
        out[i, targets[i]] -= k
    return out_arr


def logsoftmax_pick_fwd(real[:, ::1] logits, long long[::1] targets):
    cdef Py_ssize_t i, j, b = logits.shape[0], c = logits.shape[1]
    probs_arr = _empty2(b, c, real is float)
    vals_arr = _empty1(b, real is float)
    cdef real[:, ::1] probs = probs_arr
    cdef real[::1] vals = vals_arr
    cdef real m, e
    cdef double z
    for i in range(b):
        m = logits[i, 0]
        for j in range(1, c):
            if logits[i, j] > m:
                m = logits[i, j]
        z = 0.0
        for j in range(c):
            if real is float:
                e = expf(logits[i, j] - m)
            else:
                e = exp(logits[i, j] - m)
            probs[i, j] = e
            z += e
        for j in range(c):
            probs[i, j] = <real> (probs[i, j] / z)
        vals[i] = <real> ((logits[i, targets[i]] - m) - log(z))
    return vals_arr, probs_arr


def logsoftmax_pick_bwd(real[:, ::1] probs, long long[::1] targets, real[::1] g):
    cdef Py_ssize_t i, j, b = probs.shape[0], c = probs.shape[1]
    out_arr = _empty2(b, c, real is float)
    cdef real[:, ::1] out = out_arr
    for i in range(b):
        for j in range(c):
            out[i, j] = -probs[i, j] * g[i]
        out[i, targets[i]] += g[i]
    return out_arr


def mse_fwd(real[:, ::1] a, real[:, ::1] b):
    cdef Py_ssize_t i, j, rows = a.shape[0], cols = a.shape[1]
    cdef double d, acc = 0.0
    for i in range(rows):
        for j in range(cols):
            d = <double> (a[i, j] - b[i, j])
            acc += d * d
    return acc / rows


def mse_bwd(real[:, ::1] a, real[:, ::1] b, double gscale):
    cdef Py_ssize_t i, j, rows = a.shape[0], cols = a.shape[1]
    out_arr = _empty2(rows, cols, real is float)
    cdef real[:, ::1] out = out_arr
    cdef real k = <real> (2.0 * gscale / rows)
    for i in range(rows):
        for j in range(cols):
            out[i, j] = (a[i, j] - b[i, j]) * k
    return out_arr


def l1_fwd(real[:, ::1] a, real[:, ::1] b):
    cdef Py_ssize_t i, j, rows = a.shape[0], cols = a.shape[1]
    cdef double acc = 0.0
    for i in range(rows):
        for j in range(cols):
            acc += fabs(<double> (a[i, j] - b[i, j]))
    return acc / rows


def l1_bwd(real[:, ::1] a, real[:, ::1] b, double gscale):
    cdef Py_ssize_t i, j, rows = a.shape[0], cols = a.shape[1]
    out_arr = _empty2(rows, cols, real is float)
    cdef real[:, ::1] out = out_arr
    cdef real k = <real> (gscale / rows)
    for i in range(rows):
        for j in range(cols):
            if a[i, j] > b[i, j]:
                out[i, j] = k
            elif a[i, j] < b[i, j]:
                out[i, j] = -k
            else:
                out[i, j] = <real> 0.0
    return out_arr


def kl_gauss_fwd(real[:, ::1] mu, real[:, ::1] logvar):
    cdef Py_ssize_t i, j, rows = mu.shape[0], cols = mu.shape[1]
    cdef double m, lv, acc = 0.0
    for i in range(rows):
        for j in range(cols):
            m = <double> mu[i, j]
            lv = <double> logvar[i, j]
            acc += m * m + exp(lv) - lv - 1.0
    return 0.5 * acc / rows


def kl_gauss_bwd(real[:, ::1] mu, real[:, ::1] logvar, double gscale):
    cdef Py_ssize_t i, j, rows = mu.shape[0], cols = mu.shape[1]
    dmu_arr = _empty2(rows, cols, real is float)
    dlv_arr = _empty2(rows, cols, real is float)
    cdef real[:, ::1] dmu = dmu_arr
    cdef real[:, ::1] dlv = dlv_arr
    cdef real k = <real> (gscale / rows)
    cdef real half_k = <real> (0.5 * (gscale / rows))
    for i in range(rows):
        for j in range(cols):
            dmu[i, j] = mu[i, j] * k
            if real is float:
                dlv[i, j] = (expf(logvar[i, j]) - <real> 1.0) * half_k
            else:
                dlv[i, j] = (exp(logvar[i, j]) - <real> 1.0) * half_k
    return dmu_arr, dlv_arr


def adam_update(real[::1] p, real[::1] g, real[::1] m, real[::1] v,
                long t, double lr, double beta1, double beta2, double eps):
    cdef Py_ssize_t i, n = p.shape[0]
    cdef real b1 = <real> beta1, b2 = <real> beta2
    cdef real ob1 = <real> (1.0 - beta1), ob2 = <real> (1.0 - beta2)
    cdef real c1 = <real> (1.0 / (1.0 - beta1 ** t))
    cdef real c2 = <real> (1.0 / (1.0 - beta2 ** t))
    cdef real lrr = <real> lr, epsr = <real> eps
    for i in range(n):
        m[i] = b1 * m[i] + ob1 * g[i]
        v[i] = b2 * v[i] + ob2 * (g[i] * g[i])
        if real is float:
            p[i] -= lrr * (m[i] * c1) / (sqrtf(v[i] * c2) + epsr)
        else:
            p[i] -= lrr * (m[i] * c1) / (sqrt(v[i] * c2) + epsr)


def rasterize(long shape_class, double cx, double cy, double scale,
              double rotation, double brightness, int side):
    """Render one shape on a 2x2-supersampled grid; returns float32 [side, side].

    Matches the fallback implementation operation-for-operation in float64,
    so both backends produce identical pixels.
    """
    cdef Py_ssize_t i, j, n = 2 * side
    img_arr = np.zeros((side, side), dtype=np.float64)
    cdef double[:, ::1] acc = img_arr
    cdef double c = cos(rotation), s = sin(rotation)
    cdef double pos, dx, dy, rx, ry, r2 = scale * scale, third = scale / 3.0
    cdef double vx0, vy0, vx1, vy1, vx2, vy2
    cdef double e0x, e0y, e1x, e1y, e2x, e2y
    cdef double c0, c1, c2
    cdef bint inside, p_all, n_all
    cdef double deg2rad = np.pi / 180.0

    if shape_class == 2:
        vx0 = scale * cos(90.0 * deg2rad)
        vy0 = scale * sin(90.0 * deg2rad)
        vx1 = scale * cos(210.0 * deg2rad)
        vy1 = scale * sin(210.0 * deg2rad)
        vx2 = scale * cos(330.0 * deg2rad)
        vy2 = scale * sin(330.0 * deg2rad)
        e0x = vx1 - vx0
        e0y = vy1 - vy0
        e1x = vx2 - vx1
        e1y = vy2 - vy1
        e2x = vx0 - vx2
        e2y = vy0 - vy2
    elif shape_class not in (0, 1, 3):
        raise ValueError(f"unknown shape class {shape_class}")

    for i in range(n):
        dy = (<double> i + 0.5) / n - cy
        for j in range(n):
            dx = (<double> j + 0.5) / n - cx
            if shape_class == 1:
                inside = dx * dx + dy * dy <= r2
            else:
                rx = c * dx + s * dy
                ry = -s * dx + c * dy
                if shape_class == 0:
                    inside = fabs(rx) <= scale and fabs(ry) <= scale
                elif shape_class == 2:
                    c0 = e0x * (ry - vy0) - e0y * (rx - vx0)
                    c1 = e1x * (ry - vy1) - e1y * (rx - vx1)
                    c2 = e2x * (ry - vy2) - e2y * (rx - vx2)
                    p_all = c0 >= 0 and c1 >= 0 and c2 >= 0
                    n_all = c0 <= 0 and c1 <= 0 and c2 <= 0
                    inside = p_all or n_all
                else:
                    inside = (fabs(rx) <= scale and fabs(ry) <= third) or \
                             (fabs(rx) <= third and fabs(ry) <= scale)
            if inside:
                acc[i >> 1, j >> 1] += 1.0
    out_arr = np.empty((side, side), dtype=np.float32)
    cdef float[:, ::1] out = out_arr
    for i in range(side):
        for j in range(side):
            out[i, j] = <float> ((acc[i, j] / 4.0) * brightness)
    return out_arr
