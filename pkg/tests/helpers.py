"""Shared finite-difference helpers for the test suites.

Oracle: central finite differences in float64. For a scalar function f and
coordinate step h, df/dx_i ~ (f(x + h e_i) - f(x - h e_i)) / 2h. Agreement
rule throughout: |a - b| <= tol * max(1, |a|, |b|).
"""

import numpy as np

from slu import autodiff as ad

FD_STEP = 1e-3
FD_TOL = 1e-4


def numeric_grad(f, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of scalar-valued f at x (float64)."""
    x = x.astype(np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f(x)
        flat[i] = orig - step
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * step)
    return grad


def assert_close(analytic: np.ndarray, numeric: np.ndarray, tol: float = FD_TOL):
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    assert a.shape == b.shape, f"shape mismatch {a.shape} vs {b.shape}"
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    err = np.abs(a - b) / denom
    worst = float(err.max()) if err.size else 0.0
    assert worst <= tol, f"max relative error {worst:.3e} exceeds {tol:.0e}"


def crf_brute_force(emissions: np.ndarray, T: np.ndarray):
    """Exhaustive-path oracle for a linear-chain CRF on ONE sequence.

    ``emissions`` is (n, S); ``T`` is the full (S+2, S+2) table with the
    begin state at index S and the end state at S+1. Returns
    (log_partition, best_path, best_score) by enumerating all S^n paths.
    """
    import itertools

    n, S = emissions.shape
    begin, end = S, S + 1
    scores = []
    paths = []
    for path in itertools.product(range(S), repeat=n):
        s = T[begin, path[0]] + emissions[0, path[0]]
        for t in range(1, n):
            s += T[path[t - 1], path[t]] + emissions[t, path[t]]
        s += T[path[-1], end]
        scores.append(s)
        paths.append(path)
    scores = np.array(scores)
    m = scores.max()
    log_z = m + np.log(np.exp(scores - m).sum())
    best = int(scores.argmax())
    return log_z, list(paths[best]), float(scores[best])


def fd_check_unary(op, x: np.ndarray, tol: float = FD_TOL, **kwargs):
    """Backward of ``op`` against finite differences, via a random projection.

    The scalar probe is sum(op(x) * r) for a fixed random r, which exercises
    the full Jacobian-transpose product rather than one output at a time.
    """
    rng = np.random.default_rng(7)
    x64 = x.astype(np.float64)
    probe_shape = op(ad.Tensor(x64), **kwargs).data.shape
    r = rng.standard_normal(probe_shape)

    t = ad.Tensor(x64, requires_grad=True)
    out = op(t, **kwargs)
    loss = ad.tsum(ad.mul(out, ad.Tensor(r)))
    loss.backward()

    def f(arr):
        with ad.no_grad():
            return float(
                ad.tsum(ad.mul(op(ad.Tensor(arr), **kwargs), ad.Tensor(r))).item()
            )

    assert_close(t.grad, numeric_grad(f, x64), tol)
