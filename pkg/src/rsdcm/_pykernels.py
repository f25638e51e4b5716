"""NumPy implementations of the hot loops.

These define the reference semantics of the compiled versions in
``_ckernels.pyx``; both must agree to rounding.
"""
import numpy as np

DOMAIN_FLOOR = 1e-9


def _rhs(r, f, v, q, x, kappa, gam, inv_tau, rho, inv_xi, log1mrho):
    vx = v ** inv_xi
    return (
        x - kappa * r - gam * (f - 1.0),
        r,
        (f - vx) * inv_tau,
        (f * (1.0 - (np.exp(log1mrho / f) - (1.0 - rho)) / rho) - vx / v * q) * inv_tau,
    )


def _bad(f, v, q):
    bad = (f <= DOMAIN_FLOOR) | (v <= DOMAIN_FLOOR) | (q <= DOMAIN_FLOOR)
    return int(np.argmax(bad)) if bad.any() else -1


def balloon_rk4(x, dt, params):
    """Vectorized-over-regions RK4; loops over time steps in Python."""
    K, n = x.shape
    kappa, gam, tau, rho, xi, V0, k1, k2, k3 = params
    inv_tau = 1.0 / tau
    inv_xi = 1.0 / xi
    lr = np.log(1.0 - rho)
    r = np.zeros(n)
    f = np.ones(n)
    v = np.ones(n)
    q = np.ones(n)
    y = np.zeros((K, n))
    args = (kappa, gam, inv_tau, rho, inv_xi, lr)
    for j in range(K):
        i = _bad(f, v, q)
        if i >= 0:
            return y, j, i
        y[j] = V0 * (k1 * (1.0 - q) + k2 * (1.0 - q / v) + k3 * (1.0 - v))
        if j == K - 1:
            break
        xin = x[j]
        s1 = _rhs(r, f, v, q, xin, *args)
        stages = [s1]
        for w in (0.5 * dt, 0.5 * dt, dt):
            prev = stages[-1]
            rr, ff, vv, qq = (z + w * dz for z, dz in zip((r, f, v, q), prev))
            i = _bad(ff, vv, qq)
            if i >= 0:
                return y, j, i
            stages.append(_rhs(rr, ff, vv, qq, xin, *args))
        a, b, c, d = stages
        r = r + dt / 6.0 * (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0])
        f = f + dt / 6.0 * (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1])
        v = v + dt / 6.0 * (a[2] + 2.0 * b[2] + 2.0 * c[2] + d[2])
        q = q + dt / 6.0 * (a[3] + 2.0 * b[3] + 2.0 * c[3] + d[3])
    return y, -1, -1


def linear_recursion(F, u, x0, stride):
    """Blocked evaluation of x[j+1] = F x[j] + u[j].

    Each block of ``stride`` inputs is folded with the precomputed powers
    F^(stride-1), ..., F^0 in one ``einsum``; only the block boundaries are
    stepped sequentially.
    """
    K, m = u.shape
    nout = K // stride
    powers = np.empty((stride, m, m))
    powers[-1] = np.eye(m)
    for i in range(stride - 2, -1, -1):
        powers[i] = powers[i + 1] @ F
    Fs = powers[0] @ F if stride > 1 else F
    blocks = u[: nout * stride].reshape(nout, stride, m)
    drive = np.einsum("iab,nib->na", powers, blocks)
    out = np.empty((nout, m))
    cur = np.array(x0, dtype=float)
    for o in range(nout):
        cur = Fs @ cur + drive[o]
        out[o] = cur
    for j in range(nout * stride, K):
        cur = F @ cur + u[j]
    return out, cur
