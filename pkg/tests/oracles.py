"""Independent reference computations used by several test modules."""
import numpy as np
import scipy.linalg


def trapezoid_gramian(M, S, T, panels=100_000):
    """int_0^T e^{M t} S e^{M' t} dt by the composite trapezoid rule.

    Only the one-panel exponential E = e^{M h} is used, no closed form of
    the integral. The node sum G(m) = sum_{k<m} E^k S E^k' is accumulated
    by binary splitting, G(a + b) = G(a) + E^a G(b) E^a', which gives the
    same sum as the panel-by-panel loop in O(log panels) products.
    """
    h = T / panels
    step = scipy.linalg.expm(M * h)
    # G over panels + 1 nodes
    count = panels + 1
    G = np.zeros_like(S, dtype=float)
    Ep = np.eye(M.shape[0])  # E^(nodes accumulated so far)
    blockG, blockE = S.astype(float), step  # G(2^j), E^(2^j)
    while count:
        if count & 1:
            G = G + Ep @ blockG @ Ep.T
            Ep = Ep @ blockE
        count >>= 1
        if count:
            blockG = blockG + blockE @ blockG @ blockE.T
            blockE = blockE @ blockE
    last = np.linalg.matrix_power(step, panels)
    return h * (G - 0.5 * S - 0.5 * last @ S @ last.T)


def trapezoid_gramian_loop(M, S, T, panels):
    """Panel-by-panel version of :func:`trapezoid_gramian` (for checking it)."""
    h = T / panels
    step = scipy.linalg.expm(M * h)
    E = np.eye(M.shape[0])
    acc = 0.5 * S.copy()
    for _ in range(panels - 1):
        E = step @ E
        acc += E @ S @ E.T
    E = step @ E
    acc += 0.5 * (E @ S @ E.T)
    return acc * h


def dense_gaussian_smoother(F, C, Q, R, m0, P0, Y):
    """Posterior of all states x(0..N) by conditioning one big Gaussian.

    x(0) ~ N(m0, P0), x(k) = F x(k-1) + q(k), y(k) = C x(k) + r(k), k = 1..N.
    Returns (mean (N+1, d), cov (N+1, d, N+1, d)).
    """
    N, n = Y.shape
    d = F.shape[0]
    D = (N + 1) * d
    # x = T0 m0 + L z with z = (x0 - m0, q1, ..., qN)
    L = np.zeros((D, D))
    Fp = [np.eye(d)]
    for _ in range(N):
        Fp.append(F @ Fp[-1])
    for k in range(N + 1):
        for j in range(k + 1):
            L[k * d:(k + 1) * d, j * d:(j + 1) * d] = Fp[k - j]
    mean = np.concatenate([Fp[k] @ m0 for k in range(N + 1)])
    Z = scipy.linalg.block_diag(P0, *([Q] * N))
    Sx = L @ Z @ L.T
    H = np.zeros((N * n, D))
    for k in range(1, N + 1):
        H[(k - 1) * n:k * n, k * d:(k + 1) * d] = C
    Sy = H @ Sx @ H.T + np.kron(np.eye(N), R)
    K = np.linalg.solve(Sy, H @ Sx).T
    post_mean = mean + K @ (Y.ravel() - H @ mean)
    post_cov = Sx - K @ H @ Sx
    return post_mean.reshape(N + 1, d), post_cov.reshape(N + 1, d, N + 1, d)


def dense_loglik(F, C, Q, R, m0, P0, Y):
    N, n = Y.shape
    d = F.shape[0]
    Fp = [np.eye(d)]
    for _ in range(N):
        Fp.append(F @ Fp[-1])
    D = (N + 1) * d
    L = np.zeros((D, D))
    for k in range(N + 1):
        for j in range(k + 1):
            L[k * d:(k + 1) * d, j * d:(j + 1) * d] = Fp[k - j]
    mu = np.concatenate([Fp[k] @ m0 for k in range(N + 1)])
    Z = scipy.linalg.block_diag(P0, *([Q] * N))
    H = np.zeros((N * n, D))
    for k in range(1, N + 1):
        H[(k - 1) * n:k * n, k * d:(k + 1) * d] = C
    Sy = H @ L @ Z @ L.T @ H.T + np.kron(np.eye(N), R)
    r = Y.ravel() - H @ mu
    sign, logdet = np.linalg.slogdet(Sy)
    return -0.5 * (N * n * np.log(2 * np.pi) + logdet + r @ np.linalg.solve(Sy, r))
