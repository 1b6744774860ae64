import itertools

import numpy as np
import pytest

from spaceiv import kernels
from spaceiv._pykernels import liml_scan as py_liml
from spaceiv.estimators import liml, tsls

BACKENDS = sorted(kernels.BACKENDS)


def grams(seed, n=300, d=7, m=4):
    rng = np.random.default_rng(seed)
    I = rng.standard_normal((n, m))
    X = I @ rng.standard_normal((m, d)) + rng.standard_normal((n, d))
    Y = X[:, 1] - X[:, 3] + rng.standard_normal(n)
    W = np.column_stack([Y, X])
    Q, _ = np.linalg.qr(I)
    PW = Q @ (Q.T @ W)
    R = W - PW
    return PW.T @ PW, R.T @ R, W.T @ W, (X, Y, I)


def subsets(d, s):
    rows = list(itertools.combinations(range(d), s))
    return np.array(rows, dtype=np.intp).reshape(len(rows), s)


def test_compiled_backend_is_built():
    assert "cython" in kernels.BACKENDS
    assert kernels.BACKEND in kernels.BACKENDS


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("s", [1, 2, 3])
def test_liml_scan_matches_direct_fit(backend, s):
    gp, gm, _, (X, Y, I) = grams(s)
    sub = subsets(X.shape[1], s)
    ratios, betas = kernels.BACKENDS[backend].liml_scan(gp, gm, sub)
    for row, b in zip(sub[::5], betas[::5]):
        np.testing.assert_allclose(b, liml(X[:, row], Y, I), rtol=1e-8, atol=1e-10)
    assert np.all(np.isfinite(ratios)) and np.all(ratios >= -1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("s", [1, 2, 3])
def test_tsls_scan_matches_direct_fit(backend, s):
    gp, gm, _, (X, Y, I) = grams(10 + s)
    sub = subsets(X.shape[1], s)
    _, betas = kernels.BACKENDS[backend].tsls_scan(gp, gm, sub)
    for row, b in zip(sub[::5], betas[::5]):
        np.testing.assert_allclose(b, tsls(X[:, row], Y, I), rtol=1e-8, atol=1e-10)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("s", [0, 1, 2, 3])
def test_ls_scan_matches_lstsq(backend, s):
    _, _, g, (X, Y, _) = grams(20 + s)
    sub = subsets(X.shape[1], s)
    rss, betas = kernels.BACKENDS[backend].ls_scan(g, sub)
    for k, row in enumerate(sub):
        if s == 0:
            assert rss[k] == pytest.approx(Y @ Y)
            continue
        b, *_ = np.linalg.lstsq(X[:, row], Y, rcond=None)
        np.testing.assert_allclose(betas[k], b, rtol=1e-8)
        assert rss[k] == pytest.approx(np.sum((Y - X[:, row] @ b) ** 2), rel=1e-8)


@pytest.mark.skipif("cython" not in kernels.BACKENDS, reason="extension not built")
@pytest.mark.parametrize("seed", range(5))
def test_backends_agree(seed):
    gp, gm, g, (X, _, _) = grams(seed, d=9)
    py, cy = kernels.BACKENDS["python"], kernels.BACKENDS["cython"]
    for s in (1, 2, 3):
        sub = subsets(X.shape[1], s)
        for name in ("liml_scan", "tsls_scan"):
            a = getattr(py, name)(gp, gm, sub)
            b = getattr(cy, name)(gp, gm, sub)
            np.testing.assert_allclose(a[0], b[0], rtol=1e-9, atol=1e-12)
            np.testing.assert_allclose(a[1], b[1], rtol=1e-8, atol=1e-10)
        a, b = py.ls_scan(g, sub), cy.ls_scan(g, sub)
        np.testing.assert_allclose(a[0], b[0], rtol=1e-9)
        np.testing.assert_allclose(a[1], b[1], rtol=1e-9)


@pytest.mark.parametrize("backend", BACKENDS)
def test_singular_blocks_reported_as_nan(backend):
    gp, gm, g, _ = grams(0, d=4)
    # duplicate predictor: append a copy of column 1 as column 5
    def dup(G):
        idx = [0, 1, 2, 3, 4, 2]
        return G[np.ix_(idx, idx)]

    sub = np.array([[1, 4], [0, 1]], dtype=np.intp)
    mod = kernels.BACKENDS[backend]
    ratios, betas = mod.tsls_scan(dup(gp), dup(gm), sub)
    assert np.isnan(ratios[0]) and np.isfinite(ratios[1])
    rss, _ = mod.ls_scan(dup(g), sub)
    assert np.isnan(rss[0]) and np.isfinite(rss[1])


def test_pure_python_backend_is_used_when_requested(monkeypatch):
    import importlib

    monkeypatch.setenv("SPACEIV_PURE_PYTHON", "1")
    reloaded = importlib.reload(kernels)
    try:
        assert reloaded.BACKEND == "python"
        assert reloaded.liml_scan is py_liml
    finally:
        monkeypatch.delenv("SPACEIV_PURE_PYTHON")
        importlib.reload(kernels)
