"""JIT-compiled per-frame kernels for the quantized network.

Every layer output passes through :func:`q16`. Products of 8-bit weights and
16-bit activations are exact in float64, so matrix products give the same
result whatever BLAS does with the summation order.
"""

import math

import numpy as np
from numba import njit

_S = 32768.0
_HI = 1.0 - 1.0 / _S


@njit(cache=True, inline="always")
def q16(v):
    y = v * _S
    a = abs(y)
    f = math.floor(a)
    if a - f >= 0.5:
        f += 1.0
    f = math.copysign(f, y) / _S
    if f < -1.0:
        return -1.0
    if f > _HI:
        return _HI
    return f


@njit(cache=True, inline="always")
def tanh(v):
    # ~3x faster than libm tanh here; absolute error ~1e-16, far below the 2**-16 grid
    if v > 20.0:
        return 1.0
    if v < -20.0:
        return -1.0
    e = math.expm1(2.0 * v)
    return e / (e + 2.0)


@njit(cache=True, inline="always")
def sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v))


@njit(cache=True)
def dense_tanh(X, W, b, out):
    """out = q16(tanh(X @ W.T + b)) for a (rows, in) block."""
    Y = X @ W.T
    for g in range(Y.shape[0]):
        for o in range(Y.shape[1]):
            out[g, o] = q16(tanh(Y[g, o] + b[o]))


@njit(cache=True)
def dense_tanh_vec(x, W, b, out):
    y = W @ x
    for o in range(y.shape[0]):
        out[o] = q16(tanh(y[o] + b[o]))


@njit(cache=True)
def tac_kernel(h, Wt, bt, Wa, ba, Wc, bc, out):
    G, U = h.shape
    H = Wt.shape[0]
    f = np.empty((G, H))
    dense_tanh(h, Wt, bt, f)
    avg = np.empty(H)
    for j in range(H):
        s = 0.0
        for g in range(G):
            s += f[g, j]
        avg[j] = q16(s / G)
    gbar = np.empty(H)
    dense_tanh_vec(avg, Wa, ba, gbar)
    cat = np.empty((G, 2 * H))
    for g in range(G):
        cat[g, :H] = f[g]
        cat[g, H:] = gbar
    z = np.empty((G, U))
    dense_tanh(cat, Wc, bc, z)
    for g in range(G):
        for u in range(U):
            out[g, u] = q16(h[g, u] + z[g, u])


@njit(cache=True)
def _dwconv(hist, x, W, b, out):
    # hist: (G, k - 1, U) oldest first; window = hist ++ [x]; hist shifts in place
    G, km1, U = hist.shape
    for g in range(G):
        for u in range(U):
            s = b[u] + W[u, km1] * x[g, u]
            for j in range(km1):
                s += W[u, j] * hist[g, j, u]
            out[g, u] = q16(s)
        for j in range(km1 - 1):
            hist[g, j] = hist[g, j + 1]
        hist[g, km1 - 1] = x[g]


@njit(cache=True)
def _gru_layer(x, h, Wih, Whh, bih, bhh):
    """One GRU step for all groups; updates ``h`` (G, U) in place."""
    G, U = h.shape
    gi = x @ Wih.T
    gh = h @ Whh.T
    for g in range(G):
        for u in range(U):
            z = q16(sigmoid(gi[g, u] + bih[u] + gh[g, u] + bhh[u]))
            r = q16(sigmoid(gi[g, U + u] + bih[U + u] + gh[g, U + u] + bhh[U + u]))
            n = q16(tanh(gi[g, 2 * U + u] + bih[2 * U + u] + r * (gh[g, 2 * U + u] + bhh[2 * U + u])))
            h[g, u] = q16((1.0 - z) * n + z * h[g, u])


@njit(cache=True)
def _skip_add(y, x, w, b, out):
    G, U = y.shape
    for g in range(G):
        for u in range(U):
            out[g, u] = q16(y[g, u] + q16(x[g, u] * w[u, 0] + b[u]))


@njit(cache=True)
def forward_kernel(
    x_in, conv5, conv3, gru,
    qeq_w, qeq_b, in_w, in_b, grp_w, grp_b,
    dw5_w, dw5_b, pw5_w, pw5_b, dw3_w, dw3_b, pw3_w, pw3_b, cskip_w, cskip_b,
    t1_tw, t1_tb, t1_aw, t1_ab, t1_cw, t1_cb,
    g0_ih, g0_hh, g0_bih, g0_bhh, g1_ih, g1_hh, g1_bih, g1_bhh, gskip_w, gskip_b,
    t2_tw, t2_tb, t2_aw, t2_ab, t2_cw, t2_cb,
    ug_w, ug_b, sp_w, sp_b, pf_w, pf_b,
    sp_out, pf_out,
):
    B = x_in.shape[0]
    P = in_w.shape[0]
    G = conv5.shape[0]
    U = grp_w.shape[0]
    gw = P // G

    x = np.empty(B)
    for i in range(B):
        x[i] = q16(q16(x_in[i]) * qeq_w[i] + qeq_b[i])
    hid = np.empty(P)
    dense_tanh_vec(x, in_w, in_b, hid)

    grp = np.empty((G, U))
    dense_tanh(hid.reshape((G, gw)), grp_w, grp_b, grp)

    d = np.empty((G, U))
    y = np.empty((G, U))
    _dwconv(conv5, grp, dw5_w, dw5_b, d)
    dense_tanh(d, pw5_w, pw5_b, y)
    _dwconv(conv3, y, dw3_w, dw3_b, d)
    dense_tanh(d, pw3_w, pw3_b, y)
    conv_out = np.empty((G, U))
    _skip_add(y, grp, cskip_w, cskip_b, conv_out)

    t1 = np.empty((G, U))
    tac_kernel(conv_out, t1_tw, t1_tb, t1_aw, t1_ab, t1_cw, t1_cb, t1)

    _gru_layer(t1, gru[0], g0_ih, g0_hh, g0_bih, g0_bhh)
    _gru_layer(gru[0].copy(), gru[1], g1_ih, g1_hh, g1_bih, g1_bhh)
    gru_out = np.empty((G, U))
    _skip_add(gru[1], t1, gskip_w, gskip_b, gru_out)

    t2 = np.empty((G, U))
    tac_kernel(gru_out, t2_tw, t2_tb, t2_aw, t2_ab, t2_cw, t2_cb, t2)

    z = np.empty((G, gw))
    dense_tanh(t2, ug_w, ug_b, z)
    zf = z.reshape(P)
    dense_tanh_vec(zf, sp_w, sp_b, sp_out)
    dense_tanh_vec(zf, pf_w, pf_b, pf_out)
