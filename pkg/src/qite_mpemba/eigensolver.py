"""Dense real-symmetric eigensolver.

Householder reduction to tridiagonal form followed by the implicit QL
algorithm with Wilkinson-style shifts.  Eigenvectors are accumulated by
applying each plane rotation to the Householder basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import QiteMpembaError

_EPS = np.finfo(float).eps
MAX_QL_ITERATIONS = 60


class EigensolverError(QiteMpembaError):
    pass


def tridiagonalize(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(d, e, q)`` with ``a = q T q^T``; ``T`` has diagonal ``d`` and off-diagonal ``e``.

    ``e[k]`` couples rows ``k`` and ``k+1``.  The input is not modified.
    """
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[0]
    # reflectors are stored as rows of ``us`` and applied to q afterwards
    us = []
    for k in range(n - 2):
        u = a[k + 1:, k].copy()
        alpha = math.sqrt(float(u @ u))
        if alpha == 0.0 or (alpha == abs(u[0]) and np.count_nonzero(u[1:]) == 0):
            us.append(None)
            continue
        if u[0] < 0.0:
            alpha = -alpha
        u[0] += alpha
        h = 0.5 * float(u @ u)
        sub = a[k + 1:, k + 1:]
        v = (sub @ u) / h
        g = float(u @ v) / (2.0 * h)
        v -= g * u
        sub -= np.outer(v, u) + np.outer(u, v)
        a[k + 1:, k] = 0.0
        a[k, k + 1:] = 0.0
        a[k + 1, k] = a[k, k + 1] = -alpha
        us.append((u, h))
    d = np.diagonal(a).copy()
    e = np.zeros(n)
    e[: n - 1] = np.diagonal(a, 1)
    q = np.eye(n)
    for k in range(n - 3, -1, -1):
        if us[k] is None:
            continue
        u, h = us[k]
        block = q[k + 1:, k + 1:]
        block -= np.outer(u, (u @ block) / h)
    return d, e, q


def tridiagonal_ql(d: np.ndarray, e: np.ndarray, zt: np.ndarray) -> None:
    """Diagonalize the tridiagonal matrix in place.

    On return ``d`` holds the eigenvalues (unsorted) and row ``k`` of ``zt``
    the matching eigenvector, given that ``zt`` started as the transposed
    tridiagonalizing basis.  Rows are rotated rather than columns so each
    update touches contiguous memory.
    """
    n = d.size
    tmp = np.empty(zt.shape[1])
    for l in range(n):
        iterations = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd:
                    break
                m += 1
            if m == l:
                break
            iterations += 1
            if iterations > MAX_QL_ITERATIONS:
                raise EigensolverError("QL iteration did not converge")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                # rows i, i+1 <- rotation(c, s)
                zi, zj = zt[i], zt[i + 1]
                np.multiply(zi, s, out=tmp)
                zi *= c
                zi -= s * zj
                zj *= c
                zj += tmp
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    max_residual: float


def residuals(a: np.ndarray, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """``||A v_k - lambda_k v_k||_2`` for each column ``v_k``."""
    return np.linalg.norm(a @ vectors - vectors * values[None, :], axis=0)


def eigh(a: np.ndarray, check: bool = True, residual_tol: float = 1e-9) -> EigenDecomposition:
    """Ascending eigenvalues and orthonormal eigenvector columns of a symmetric matrix.

    With ``check`` the residuals are verified against ``residual_tol * ||A||_2``
    (Frobenius norm as the bound) and :class:`EigensolverError` is raised on failure.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if not np.array_equal(a, a.T):
        raise ValueError("matrix must be exactly symmetric")
    n = a.shape[0]
    if n == 1:
        return EigenDecomposition(a.diagonal().copy(), np.ones((1, 1)), 0.0)
    d, e, q = tridiagonalize(a)
    zt = np.ascontiguousarray(q.T)
    tridiagonal_ql(d, e, zt)
    order = np.argsort(d, kind="stable")
    values = d[order]
    vectors = np.ascontiguousarray(zt[order].T)
    res = residuals(a, values, vectors)
    worst = float(res.max())
    if check:
        scale = float(np.linalg.norm(a)) or 1.0
        if worst > residual_tol * scale:
            raise EigensolverError(
                f"eigen-residual {worst:.3e} exceeds {residual_tol:g} * ||A||"
            )
    values.setflags(write=False)
    vectors.setflags(write=False)
    return EigenDecomposition(values, vectors, worst)
