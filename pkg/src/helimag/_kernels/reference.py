"""NumPy reference implementations of the hot stencil kernels.

These definitions are the semantic ground truth; the Cython backend in
``_cyops.pyx`` mirrors them operation for operation and is checked against
them in the test suite.
"""

import numpy as np


def _cross_axis(v, ax):
    out = np.empty_like(v)
    if ax == 0:
        out[..., 0] = 0.0
        out[..., 1] = v[..., 2]
        out[..., 2] = -v[..., 1]
    elif ax == 1:
        out[..., 0] = -v[..., 2]
        out[..., 1] = 0.0
        out[..., 2] = v[..., 0]
    else:
        out[..., 0] = v[..., 1]
        out[..., 1] = -v[..., 0]
        out[..., 2] = 0.0
    return out


def exchange_dmi_field(m, lex, kappa, spacing, nthreads=1):
    """Flux-form helical Laplacian L_h m = -G^T G m.

    Per axis, interior-face fluxes
        F = lex*(u_+ - u_-)/h + (kappa/lex)*avg x e_ax
    are scattered back with
        cell_-  += (lex/h)*F + (kappa/(2 lex))*(F x e_ax)
        cell_+  += -(lex/h)*F + (kappa/(2 lex))*(F x e_ax).
    Boundary faces carry zero flux (the helical Neumann condition).
    """
    m = np.asarray(m, dtype=float)
    out = np.zeros_like(m)
    for ax in range(3):
        n = m.shape[ax]
        if n < 2:
            continue
        h = spacing[ax]
        sl_lo = [slice(None)] * 4
        sl_hi = [slice(None)] * 4
        sl_lo[ax] = slice(0, -1)
        sl_hi[ax] = slice(1, None)
        lo = tuple(sl_lo)
        hi = tuple(sl_hi)
        F = lex * (m[hi] - m[lo]) / h
        F += (kappa / lex) * _cross_axis(0.5 * (m[lo] + m[hi]), ax)
        G = (lex / h) * F
        R = (0.5 * kappa / lex) * _cross_axis(F, ax)
        out[lo] += G + R
        out[hi] += R - G
    return out


def llg_rhs(m, heff, alpha, nthreads=1):
    """Landau-Lifshitz form: -(m x H + alpha m x (m x H)) / (1 + alpha^2)."""
    mxh = np.cross(m, heff)
    return -(mxh + alpha * np.cross(m, mxh)) / (1.0 + alpha * alpha)


def midpoint_velocity(m_mid, heff, alpha, nthreads=1):
    """Exact solve of dm = m_mid x (alpha dm - H) for dm, given m_mid.

    Inverting (I - alpha [m_mid]x) in closed form gives
        dm = -(m_mid x H + alpha m_mid x (m_mid x H)) / (1 + alpha^2 |m_mid|^2).
    """
    mxh = np.cross(m_mid, heff)
    denom = 1.0 + alpha * alpha * np.sum(m_mid * m_mid, axis=-1, keepdims=True)
    return -(mxh + alpha * np.cross(m_mid, mxh)) / denom
