"""Dense eigensolvers for small general complex matrices.

``eig_qr`` is a self-contained Hessenberg + Wilkinson-shifted QR iteration
(complex Schur form, eigenvectors by back substitution).  ``eig_lapack``
wraps LAPACK ``zgeev`` through numpy and accepts stacks of matrices.  Both
return eigenvalues sorted by real part and unit-norm eigenvectors as columns.
"""

from __future__ import annotations

import numpy as np


class NumericalError(RuntimeError):
    """Eigensolver failed to meet its residual bound or iteration budget."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


def hessenberg(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Householder reduction ``a = q @ h @ q^H`` with ``h`` upper Hessenberg."""
    h = np.array(a, dtype=complex)
    n = h.shape[0]
    q = np.eye(n, dtype=complex)
    for k in range(n - 2):
        x = h[k + 1 :, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        h[k + 1 :, :] -= 2.0 * np.outer(v, v.conj() @ h[k + 1 :, :])
        h[:, k + 1 :] -= 2.0 * np.outer(h[:, k + 1 :] @ v, v.conj())
        q[:, k + 1 :] -= 2.0 * np.outer(q[:, k + 1 :] @ v, v.conj())
        h[k + 2 :, k] = 0.0
    return h, q


def _givens(a: complex, b: complex) -> np.ndarray:
    # unitary G with G @ [a, b] = [r, 0]
    na, nb = abs(a), abs(b)
    if nb == 0.0:
        return np.eye(2, dtype=complex)
    if na == 0.0:
        return np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=complex)
    norm = np.hypot(na, nb)
    c = na / norm
    s = (a / na) * np.conj(b) / norm
    return np.array([[c, s], [-np.conj(s), c]], dtype=complex)


def _wilkinson(h: np.ndarray, hi: int) -> complex:
    a, b = h[hi - 1, hi - 1], h[hi - 1, hi]
    c, d = h[hi, hi - 1], h[hi, hi]
    tr, det = a + d, a * d - b * c
    disc = np.sqrt(tr * tr / 4.0 - det)
    l1, l2 = tr / 2.0 + disc, tr / 2.0 - disc
    return l1 if abs(l1 - d) < abs(l2 - d) else l2


def schur(a: np.ndarray, max_iter: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Complex Schur decomposition ``a = z @ t @ z^H`` by shifted QR."""
    t, z = hessenberg(a)
    n = t.shape[0]
    if max_iter is None:
        max_iter = 30 * n * n
    eps = np.finfo(float).eps
    tiny = eps * max(np.linalg.norm(a), np.finfo(float).tiny)
    hi = n - 1
    total = stall = 0
    while hi > 0:
        lo = hi
        while lo > 0:
            sub = abs(t[lo, lo - 1])
            if sub <= eps * (abs(t[lo, lo]) + abs(t[lo - 1, lo - 1])) or sub <= tiny:
                t[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            hi -= 1
            stall = 0
            continue
        total += 1
        stall += 1
        if total > max_iter:
            raise NumericalError(f"QR iteration did not converge in {max_iter} steps")
        if stall % 11 == 10:
            # exceptional shift breaks cycles
            mu = t[hi, hi] + 0.75 * abs(t[hi, hi - 1])
        else:
            mu = _wilkinson(t, hi)
        idx = np.arange(lo, hi + 1)
        t[idx, idx] -= mu
        rots = []
        for k in range(lo, hi):
            g = _givens(t[k, k], t[k + 1, k])
            t[k : k + 2, k:] = g @ t[k : k + 2, k:]
            t[k + 1, k] = 0.0
            rots.append(g)
        for k, g in zip(range(lo, hi), rots):
            gh = g.conj().T
            top = min(k + 2, hi) + 1
            t[:top, k : k + 2] = t[:top, k : k + 2] @ gh
            z[:, k : k + 2] = z[:, k : k + 2] @ gh
        t[idx, idx] += mu
    return t, z


def _triangular_eigvecs(t: np.ndarray) -> np.ndarray:
    n = t.shape[0]
    small = np.finfo(float).eps * max(np.linalg.norm(t), np.finfo(float).tiny)
    y = np.zeros((n, n), dtype=complex)
    for k in range(n):
        lam = t[k, k]
        y[k, k] = 1.0
        for i in range(k - 1, -1, -1):
            num = -(t[i, k] + t[i, i + 1 : k] @ y[i + 1 : k, k])
            den = t[i, i] - lam
            if abs(den) < small:
                den = small
            y[i, k] = num / den
    return y


def residuals(a: np.ndarray, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Per-pair ``||A v - lambda v||`` (works on stacked inputs)."""
    av = a @ vectors
    return np.linalg.norm(av - vectors * values[..., None, :], axis=-2)


def _sorted_unit(values, vectors):
    order = np.argsort(values.real, axis=-1, kind="stable")
    values = np.take_along_axis(values, order, axis=-1)
    vectors = np.take_along_axis(vectors, order[..., None, :], axis=-1)
    vectors = vectors / np.linalg.norm(vectors, axis=-2, keepdims=True)
    return values, vectors


def _check(a, values, vectors, tol):
    res = residuals(a, values, vectors)
    scale = np.linalg.norm(a, axis=(-2, -1))
    rel = res.max(axis=-1) / np.where(scale > 0, scale, 1.0)
    worst = float(np.max(rel))
    if worst > tol:
        raise NumericalError(
            f"eigen residual {worst:.3e} exceeds tolerance {tol:.1e}", residual=worst
        )


def eig_qr(a: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("eig_qr expects a single square matrix")
    t, z = schur(a)
    values = np.diag(t).copy()
    vectors = z @ _triangular_eigvecs(t)
    values, vectors = _sorted_unit(values, vectors)
    _check(a, values, vectors, tol)
    return values, vectors


def eig_lapack(a: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=complex)
    values, vectors = np.linalg.eig(a)
    values, vectors = _sorted_unit(values, vectors)
    _check(a, values, vectors, tol)
    return values, vectors


def eig(a: np.ndarray, tol: float = 1e-12, method: str = "lapack"):
    """Eigenpairs of ``a`` with residual ``<= tol * ||a||`` for every pair."""
    if method == "lapack":
        return eig_lapack(a, tol)
    if method == "qr":
        a = np.asarray(a, dtype=complex)
        if a.ndim == 2:
            return eig_qr(a, tol)
        pairs = [eig_qr(m, tol) for m in a.reshape(-1, *a.shape[-2:])]
        values = np.stack([p[0] for p in pairs]).reshape(a.shape[:-1])
        vectors = np.stack([p[1] for p in pairs]).reshape(a.shape)
        return values, vectors
    raise ValueError(f"unknown eigensolver method {method!r}")
