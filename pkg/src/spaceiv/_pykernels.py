"""Pure-numpy subset scans; reference backend for :mod:`spaceiv.kernels`.

All scans take Gram matrices over ``W = [Y | X]`` (index 0 is the
response) and an integer array ``subsets`` of shape ``(k, s)`` holding
0-based predictor indices. Failed subsets are reported as NaN.
"""

import numpy as np

_CHUNK = 4096


def _blocks(G, subsets):
    idx = np.concatenate([np.zeros((subsets.shape[0], 1), dtype=np.intp), subsets + 1], axis=1)
    return G[idx[:, :, None], idx[:, None, :]]


def _chunks(k):
    for start in range(0, k, _CHUNK):
        yield slice(start, min(start + _CHUNK, k))


def _liml_chunk(gp, gm, subsets):
    P = _blocks(gp, subsets)
    M = _blocks(gm, subsets)
    L = np.linalg.cholesky(M)
    Linv = np.linalg.inv(L)
    S = Linv @ P @ np.swapaxes(Linv, 1, 2)
    S = 0.5 * (S + np.swapaxes(S, 1, 2))
    w, U = np.linalg.eigh(S)
    v = np.einsum("kji,kj->ki", Linv, U[:, :, 0])
    return w[:, 0], v


def liml_scan(gp, gm, subsets):
    """Minimal Anderson-Rubin ratio per subset and the LIML coefficients.

    The ratio is the smallest generalized eigenvalue of the pencil
    ``(W_S^T P W_S, W_S^T (Id - P) W_S)``.
    """
    gp = np.ascontiguousarray(gp, dtype=float)
    gm = np.ascontiguousarray(gm, dtype=float)
    subsets = np.asarray(subsets, dtype=np.intp)
    k, s = subsets.shape
    ratios = np.full(k, np.nan)
    betas = np.full((k, s), np.nan)
    for sl in _chunks(k):
        try:
            kappa, v = _liml_chunk(gp, gm, subsets[sl])
        except np.linalg.LinAlgError:
            # isolate the offending subsets
            out = [_liml_single(gp, gm, row) for row in subsets[sl]]
            kappa = np.array([o[0] for o in out])
            v = np.array([o[1] for o in out]).reshape(-1, s + 1)
        ok = np.abs(v[:, 0]) >= 1e-12 * np.maximum(np.linalg.norm(v, axis=1), 1e-300)
        ok &= np.isfinite(kappa)
        ratios[sl] = np.where(ok, kappa, np.nan)
        with np.errstate(all="ignore"):
            b = -v[:, 1:] / v[:, :1]
        betas[sl] = np.where(ok[:, None], b, np.nan)
    return ratios, betas


def _liml_single(gp, gm, row):
    try:
        kappa, v = _liml_chunk(gp, gm, row[None, :])
        return kappa[0], v[0]
    except np.linalg.LinAlgError:
        return np.nan, np.full(row.shape[0] + 1, np.nan)


def _tsls_single(Pj, Mj):
    try:
        L = np.linalg.cholesky(Pj[1:, 1:])
    except np.linalg.LinAlgError:
        return np.nan, None
    b = np.linalg.solve(L.T, np.linalg.solve(L, Pj[1:, 0]))
    v = np.concatenate([[1.0], -b])
    den = v @ Mj @ v
    if not den > 0:
        return np.nan, None
    return (v @ Pj @ v) / den, b


def tsls_scan(gp, gm, subsets):
    """Two-stage least squares per subset and the AR ratio at that fit."""
    gp = np.ascontiguousarray(gp, dtype=float)
    gm = np.ascontiguousarray(gm, dtype=float)
    subsets = np.asarray(subsets, dtype=np.intp)
    k, s = subsets.shape
    ratios = np.full(k, np.nan)
    betas = np.full((k, s), np.nan)
    for sl in _chunks(k):
        P = _blocks(gp, subsets[sl])
        M = _blocks(gm, subsets[sl])
        try:
            L = np.linalg.cholesky(P[:, 1:, 1:])
        except np.linalg.LinAlgError:
            for j, (Pj, Mj) in enumerate(zip(P, M)):
                r, b = _tsls_single(Pj, Mj)
                if b is not None:
                    ratios[sl.start + j] = r
                    betas[sl.start + j] = b
            continue
        z = np.linalg.solve(L, P[:, 1:, 0:1])
        b = np.linalg.solve(np.swapaxes(L, 1, 2), z)[:, :, 0]
        v = np.concatenate([np.ones((len(b), 1)), -b], axis=1)
        num = np.einsum("ki,kij,kj->k", v, P, v)
        den = np.einsum("ki,kij,kj->k", v, M, v)
        ok = den > 0
        with np.errstate(all="ignore"):
            ratios[sl] = np.where(ok, num / den, np.nan)
        betas[sl] = np.where(ok[:, None], b, np.nan)
    return ratios, betas


def ls_scan(g, subsets):
    """Least squares of column 0 on each subset of the remaining columns,
    from the Gram matrix ``g``. Returns residual sums of squares and fits."""
    g = np.ascontiguousarray(g, dtype=float)
    subsets = np.asarray(subsets, dtype=np.intp)
    k, s = subsets.shape
    rss = np.full(k, np.nan)
    betas = np.full((k, s), np.nan)
    if s == 0:
        rss[:] = g[0, 0]
        return rss, betas
    for i0 in range(0, k, _CHUNK):
        sub = subsets[i0 : i0 + _CHUNK]
        G = _blocks(g, sub)
        try:
            L = np.linalg.cholesky(G[:, 1:, 1:])
        except np.linalg.LinAlgError:
            for j, Gj in enumerate(G):
                try:
                    Lj = np.linalg.cholesky(Gj[1:, 1:])
                except np.linalg.LinAlgError:
                    continue
                b = np.linalg.solve(Lj.T, np.linalg.solve(Lj, Gj[1:, 0]))
                betas[i0 + j] = b
                rss[i0 + j] = Gj[0, 0] - Gj[1:, 0] @ b
            continue
        z = np.linalg.solve(L, G[:, 1:, 0:1])
        b = np.linalg.solve(np.swapaxes(L, 1, 2), z)[:, :, 0]
        betas[i0 : i0 + len(sub)] = b
        rss[i0 : i0 + len(sub)] = G[:, 0, 0] - np.einsum("ki,ki->k", G[:, 1:, 0], b)
    return rss, betas
