"""3-D cross-correlation and its transpose, with autograd wrappers.

Array layouts follow the channels-first convention:

* inputs are ``(B, C_in, D, H, W)`` or unbatched ``(C_in, D, H, W)``
* ``conv3d`` kernels are ``(C_out, C_in, k, k, k)``
* ``conv_transpose3d`` kernels are ``(C_in, C_out, k, k, k)``

so that ``conv_transpose3d(g, w)`` with a ``conv3d`` kernel ``w`` is exactly
the adjoint (input gradient) of ``conv3d(x, w)``.

Every direction is lowered to an im2col/col2im layout pass plus a single
matrix product.  When the kernel size is a multiple of the stride (the
networks' k=4, s=2 case) the input is first space-to-depth decomposed so
the column gathers run at unit stride, which is several times faster than
the strided gathers of the generic path.  Offset loops have a fixed order,
so results are bit-deterministic on a given machine.
"""

from __future__ import annotations

import numpy as np

from .autograd import Tensor, _as_tensor

__all__ = ["conv3d", "conv_transpose3d", "conv3d_raw", "conv_transpose3d_raw"]


def _check_kernel(x, w, in_axis, what):
    if w.ndim != 5 or w.shape[2] != w.shape[3] or w.shape[3] != w.shape[4]:
        raise ValueError(f"{what} kernel must be (C, C, k, k, k), got {w.shape}")
    if x.shape[1] != w.shape[in_axis]:
        raise ValueError(
            f"{what}: input has {x.shape[1]} channels but kernel expects {w.shape[in_axis]}"
        )


def _out_size(n, k, stride, padding):
    span = n + 2 * padding - k
    if span < 0:
        raise ValueError(f"kernel size {k} exceeds padded input extent {n + 2 * padding}")
    return span // stride + 1


def _pad(x, padding):
    if padding:
        return np.pad(x, ((0, 0), (0, 0)) + ((padding, padding),) * 3)
    return x


def _fast_ok(spatial, k, stride, padding):
    return (
        stride > 1
        and k % stride == 0
        and all((n + 2 * padding) % stride == 0 for n in spatial)
    )


# --- space-to-depth plumbing --------------------------------------------------------


def _s2d(xp, s):
    """(B, C, D, H, W) -> (B, C*s^3, D/s, H/s, W/s); c' = ((c*s+pd)*s+ph)*s+pw."""
    B, C, D, H, W = xp.shape
    v = xp.reshape(B, C, D // s, s, H // s, s, W // s, s)
    v = v.transpose(0, 1, 3, 5, 7, 2, 4, 6)
    return np.ascontiguousarray(v).reshape(B, C * s ** 3, D // s, H // s, W // s)


def _inv_s2d(y, s, channels):
    B, _, nb, nh, nw = y.shape
    v = y.reshape(B, channels, s, s, s, nb, nh, nw)
    v = v.transpose(0, 1, 5, 2, 6, 3, 7, 4)
    return np.ascontiguousarray(v).reshape(B, channels, nb * s, nh * s, nw * s)


def _s2d_weight(w, s):
    """(C0, C1, k, k, k) -> (C0, C1*s^3, m, m, m) with offset a = qa*s + pd."""
    c0, c1, k = w.shape[0], w.shape[1], w.shape[2]
    m = k // s
    v = w.reshape(c0, c1, m, s, m, s, m, s)
    v = v.transpose(0, 1, 3, 5, 7, 2, 4, 6)
    return np.ascontiguousarray(v).reshape(c0, c1 * s ** 3, m, m, m)


def _inv_s2d_weight(v, s, c0, c1, k):
    """Inverse of ``_s2d_weight`` for gradient rearrangement."""
    m = k // s
    v = v.reshape(c0, c1, s, s, s, m, m, m)
    v = v.transpose(0, 1, 5, 2, 6, 3, 7, 4)
    return np.ascontiguousarray(v).reshape(c0, c1, k, k, k)


# --- generic column transforms ------------------------------------------------------


def _im2col(xp, k, stride):
    """Columns (B * out^3, C * k^3) of an already padded (B, C, D, H, W) array."""
    xcl = np.ascontiguousarray(xp.transpose(0, 2, 3, 4, 1))
    B, Dp, Hp, Wp, C = xcl.shape
    do = (Dp - k) // stride + 1
    ho = (Hp - k) // stride + 1
    wo = (Wp - k) // stride + 1
    cols = np.empty((B, do, ho, wo, C, k, k, k), dtype=np.float64)
    for a in range(k):
        for e in range(k):
            for f in range(k):
                cols[:, :, :, :, :, a, e, f] = xcl[
                    :,
                    a : a + (do - 1) * stride + 1 : stride,
                    e : e + (ho - 1) * stride + 1 : stride,
                    f : f + (wo - 1) * stride + 1 : stride,
                    :,
                ]
    return cols.reshape(B * do * ho * wo, C * k ** 3), (do, ho, wo)


def _col2im(cols2d, batch, in_spatial, c_out, k, stride, padding, out_spatial):
    """Scatter column contributions at ``t = i*stride + j - padding`` (generic)."""
    di, hi, wi = in_spatial
    full = tuple((n - 1) * stride + k for n in in_spatial)
    acc = np.zeros((batch,) + full + (c_out,), dtype=np.float64)
    cols = cols2d.reshape(batch, di, hi, wi, c_out, k, k, k)
    for a in range(k):
        for e in range(k):
            for f in range(k):
                acc[
                    :,
                    a : a + (di - 1) * stride + 1 : stride,
                    e : e + (hi - 1) * stride + 1 : stride,
                    f : f + (wi - 1) * stride + 1 : stride,
                    :,
                ] += cols[:, :, :, :, :, a, e, f]
    acc = np.ascontiguousarray(acc.transpose(0, 4, 1, 2, 3))
    return _crop_to(acc, padding, out_spatial)


def _crop_to(acc, padding, out_spatial):
    """Remove symmetric padding and zero-fill up to the requested extent."""
    batch, c = acc.shape[:2]
    full = acc.shape[2:]
    out = np.zeros((batch, c) + tuple(out_spatial), dtype=np.float64)
    src = acc[
        :,
        :,
        padding : padding + min(out_spatial[0], full[0] - padding),
        padding : padding + min(out_spatial[1], full[1] - padding),
        padding : padding + min(out_spatial[2], full[2] - padding),
    ]
    out[:, :, : src.shape[2], : src.shape[3], : src.shape[4]] = src
    return out


def _col2im_s1(cols2d, batch, in_spatial, c_out, m):
    """Unit-stride scatter: contributions at ``t = i + q``; returns channels-first."""
    di, hi, wi = in_spatial
    full = (di - 1 + m, hi - 1 + m, wi - 1 + m)
    acc = np.zeros((batch,) + full + (c_out,), dtype=np.float64)
    cols = cols2d.reshape(batch, di, hi, wi, c_out, m, m, m)
    for a in range(m):
        for e in range(m):
            for f in range(m):
                acc[:, a : a + di, e : e + hi, f : f + wi, :] += cols[:, :, :, :, :, a, e, f]
    return np.ascontiguousarray(acc.transpose(0, 4, 1, 2, 3))


# --- forward/backward kernels -------------------------------------------------------


def _conv_cols(x, k, stride, padding):
    """im2col in either the fast (space-to-depth) or generic layout.

    Returns (cols2d, out_spatial, fast) where ``fast`` tells which kernel
    matrix layout the columns expect.
    """
    if _fast_ok(x.shape[2:], k, stride, padding):
        xs = _s2d(_pad(x, padding), stride)
        cols, out_spatial = _im2col(xs, k // stride, 1)
        return cols, out_spatial, True
    cols, out_spatial = _im2col(_pad(x, padding), k, stride)
    return cols, out_spatial, False


def _conv_wmat(w, stride, fast):
    """Kernel as a (C_in*k^3, C_out) GEMM operand matching ``_conv_cols``."""
    cout = w.shape[0]
    if fast:
        wr = _s2d_weight(w, stride)
        return wr.transpose(1, 2, 3, 4, 0).reshape(-1, cout)
    return w.transpose(1, 2, 3, 4, 0).reshape(-1, cout)


def conv3d_raw(x, w, b=None, stride=1, padding=0, _keep=False):
    """Forward cross-correlation on a batched (B, C_in, D, H, W) array."""
    _check_kernel(x, w, 1, "conv3d")
    k = w.shape[2]
    for n in x.shape[2:]:
        _out_size(n, k, stride, padding)
    cols, out_spatial, fast = _conv_cols(x, k, stride, padding)
    cout = w.shape[0]
    out = cols @ _conv_wmat(w, stride, fast)
    out = out.reshape((x.shape[0],) + out_spatial + (cout,))
    out = np.ascontiguousarray(out.transpose(0, 4, 1, 2, 3))
    if b is not None:
        out += b[None, :, None, None, None]
    return (out, cols, fast) if _keep else out


def _conv_dx(g, w, stride, padding, target_spatial):
    """Input gradient of conv3d: scatter ``g @ w`` back over the input."""
    cout, cin, k = w.shape[0], w.shape[1], w.shape[2]
    batch = g.shape[0]
    g2d = np.ascontiguousarray(g.transpose(0, 2, 3, 4, 1)).reshape(-1, cout)
    if _fast_ok(target_spatial, k, stride, padding):
        s = stride
        m = k // s
        # _s2d_weight gives (C_out, C_in*s^3, m^3) whose flattened columns
        # are exactly the (channel-major, offset) order _col2im_s1 expects
        wr = _s2d_weight(w, s)
        gcols = g2d @ wr.reshape(cout, -1)
        ds = _col2im_s1(gcols, batch, g.shape[2:], cin * s ** 3, m)
        dxp = _inv_s2d(ds, s, cin)
        return _crop_to(dxp, padding, target_spatial)
    gcols = g2d @ w.reshape(cout, cin * k ** 3)
    return _col2im(gcols, batch, g.shape[2:], cin, k, stride, padding, target_spatial)


def _conv_dw(cols, g, w_shape, stride, fast):
    """Kernel gradient of conv3d from cached forward columns."""
    cout, cin, k = w_shape[0], w_shape[1], w_shape[2]
    g2d = np.ascontiguousarray(g.transpose(0, 2, 3, 4, 1)).reshape(-1, cout)
    dwmat = cols.T @ g2d
    if fast:
        s = stride
        m = k // s
        dwr = dwmat.reshape(cin * s ** 3, m, m, m, cout).transpose(4, 0, 1, 2, 3)
        return _inv_s2d_weight(dwr, s, cout, cin, k)
    return np.ascontiguousarray(
        dwmat.reshape(cin, k, k, k, cout).transpose(4, 0, 1, 2, 3)
    )


def conv_transpose3d_raw(x, w, b=None, stride=1, padding=0, out_spatial=None):
    """Transposed convolution on (B, C_in, D, H, W); kernel (C_in, C_out, k^3).

    ``out_spatial`` overrides the natural output size ``(n-1)*stride - 2p + k``;
    a larger size zero-fills the tail, which is what the adjoint of a
    stride-truncated forward convolution requires.
    """
    _check_kernel(x, w, 0, "conv_transpose3d")
    cin, cout, k = w.shape[0], w.shape[1], w.shape[2]
    natural = tuple((n - 1) * stride - 2 * padding + k for n in x.shape[2:])
    if min(natural) < 1:
        raise ValueError(
            f"transposed conv output size {natural} is not positive "
            f"(k={k}, stride={stride}, padding={padding})"
        )
    if out_spatial is None:
        out_spatial = natural
    for nat, want in zip(natural, out_spatial):
        if want < nat:
            raise ValueError(f"requested output {out_spatial} smaller than natural {natural}")
    # the transpose kernel already has (this op's C_in) on axis 0, which is
    # what _conv_dx expects of the adjoint convolution's kernel
    out = _conv_dx(x, w, stride, padding, out_spatial)
    if b is not None:
        out += b[None, :, None, None, None]
    return out


def _with_batch(data):
    if data.ndim == 4:
        return data[None], True
    if data.ndim == 5:
        return data, False
    raise ValueError(f"expected 4-D or 5-D input, got shape {data.shape}")


def conv3d(x, w, b, stride=1, padding=0):
    """Autograd 3-D convolution; accepts (C,D,H,W) or (B,C,D,H,W) input."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    xd, squeeze = _with_batch(x.data)
    if b.data.shape != (w.data.shape[0],):
        raise ValueError(
            f"bias shape {b.data.shape} does not match {w.data.shape[0]} output channels"
        )
    if w.requires_grad:
        out, cols, fast = conv3d_raw(xd, w.data, b.data, stride, padding, _keep=True)
    else:
        out, cols, fast = conv3d_raw(xd, w.data, b.data, stride, padding), None, None
    wd = w.data

    def vjp_x(g):
        g = g[None] if squeeze else g
        dx = _conv_dx(g, wd, stride, padding, xd.shape[2:])
        return dx[0] if squeeze else dx

    def vjp_w(g):
        g = g[None] if squeeze else g
        return _conv_dw(cols, g, wd.shape, stride, fast)

    def vjp_b(g):
        g = g[None] if squeeze else g
        return g.sum(axis=(0, 2, 3, 4))

    return Tensor(
        out[0] if squeeze else out,
        _parents=(x, w, b),
        _vjps=(vjp_x, vjp_w, vjp_b),
    )


def conv_transpose3d(x, w, b, stride=1, padding=0):
    """Autograd transposed 3-D convolution; kernel layout (C_in, C_out, k, k, k)."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    xd, squeeze = _with_batch(x.data)
    if b.data.shape != (w.data.shape[1],):
        raise ValueError(
            f"bias shape {b.data.shape} does not match {w.data.shape[1]} output channels"
        )
    out = conv_transpose3d_raw(xd, w.data, b.data, stride, padding)
    k = w.data.shape[2]
    cin, cout = w.data.shape[0], w.data.shape[1]
    wd = w.data

    def vjp_x(g):
        g = g[None] if squeeze else g
        # adjoint of the scatter is a plain strided convolution with the same kernel
        dx = conv3d_raw(g, wd, None, stride, padding)
        return dx[0] if squeeze else dx

    def vjp_w(g):
        g = g[None] if squeeze else g
        gcols, gspatial, fast = _conv_cols(g, k, stride, padding)
        x2d = np.ascontiguousarray(xd.transpose(0, 2, 3, 4, 1)).reshape(-1, cin)
        dw2d = x2d.T @ gcols
        if fast:
            s = stride
            m = k // s
            dwr = dw2d.reshape(cin, cout * s ** 3, m, m, m)
            return _inv_s2d_weight(dwr, s, cin, cout, k)
        return dw2d.reshape(cin, cout, k, k, k)

    def vjp_b(g):
        g = g[None] if squeeze else g
        return g.sum(axis=(0, 2, 3, 4))

    return Tensor(
        out[0] if squeeze else out,
        _parents=(x, w, b),
        _vjps=(vjp_x, vjp_w, vjp_b),
    )
