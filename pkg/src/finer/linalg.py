"""Dense float64 matrix helpers and a cyclic Jacobi symmetric eigensolver.

Matrices and vectors are plain C-ordered ``float64`` numpy arrays; the
helpers here only add the shape/finiteness contracts the rest of the
package relies on.
"""
import numpy as np

from . import _accel
from .errors import ContractError, ConvergenceError

MAX_SWEEPS = 100
# off-diagonal Frobenius norm, relative to ||A||_F, at which a sweep loop stops
_OFF_TOL = 1e-15
_SYM_TOL = 1e-9


def as_matrix(a, name="matrix"):
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ContractError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ContractError(f"{name} has non-finite entries")
    return m


def as_vector(v, name="vector"):
    x = np.ascontiguousarray(v, dtype=np.float64)
    if x.ndim != 1:
        raise ContractError(f"{name} must be 1-D, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise ContractError(f"{name} has non-finite entries")
    return x


def matmul(a, b):
    """Matrix product with an explicit inner-dimension check.

    Backed by numpy/BLAS.  No broadcasting: both operands must be 2-D.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ContractError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    out = a @ b
    if not np.isfinite(out).all():
        raise ContractError("matmul overflowed to non-finite values")
    return out


def round_robin_pairs(n):
    """Index pairs for one cyclic Jacobi sweep, grouped into rounds.

    Returns an int64 array ``(rounds, n_pairs, 2)``; pairs inside a round are
    disjoint so their rotations commute.  For odd ``n`` the pair touching the
    padding index is marked ``(-1, -1)``.
    """
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for i in range(m // 2):
            p, q = players[i], players[m - 1 - i]
            if p >= n or q >= n:
                pairs.append((-1, -1))
            else:
                pairs.append((min(p, q), max(p, q)))
        rounds.append(pairs)
        # circle method: first player fixed, the rest rotate
        players = [players[0], players[-1]] + players[1:-1]
    if not rounds:
        return np.zeros((0, 0, 2), dtype=np.int64)
    return np.array(rounds, dtype=np.int64)


def _offdiag_norm(a):
    # sum the off-diagonal squares directly: total minus diagonal cancels
    # catastrophically once the off-diagonal part is tiny
    off = a[~np.eye(a.shape[0], dtype=bool)]
    return float(np.sqrt(np.dot(off, off)))


@_accel.njit
def _jacobi_numba(a, v, rounds, max_sweeps, tol):
    n = a.shape[0]
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += a[i, j] * a[i, j]
        off = np.sqrt(off)
        if off <= tol:
            return sweep, off
        if sweep == max_sweeps:
            return -1, off
        for r in range(rounds.shape[0]):
            for t in range(rounds.shape[1]):
                p = rounds[r, t, 0]
                q = rounds[r, t, 1]
                if p < 0:
                    continue
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                tn = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    tn = -tn
                c = 1.0 / np.sqrt(tn * tn + 1.0)
                s = tn * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return -1, 0.0


def _jacobi_numpy(a, v, rounds, max_sweeps, tol):
    for sweep in range(max_sweeps + 1):
        off = _offdiag_norm(a)
        if off <= tol:
            return sweep, off
        if sweep == max_sweeps:
            return -1, off
        for pairs in rounds:
            pairs = pairs[pairs[:, 0] >= 0]
            p, q = pairs[:, 0], pairs[:, 1]
            apq = a[p, q]
            live = apq != 0.0
            if not live.any():
                continue
            p, q, apq = p[live], q[live], apq[live]
            with np.errstate(over="ignore", divide="ignore"):
                # theta may overflow for denormal apq; tn -> 0 is the right limit
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                tn = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            tn[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(tn * tn + 1.0)
            s = tn * c
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * ap - s * aq
            a[:, q] = s * ap + c * aq
            ap, aq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = s[:, None] * ap + c[:, None] * aq
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
    return -1, _offdiag_norm(a)


def sym_eigen(k, max_sweeps=MAX_SWEEPS):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    k : (n, n) array_like
        Symmetric up to ``1e-9 * max|k|``; it is symmetrised before the sweeps.
    max_sweeps : int
        Sweep cap; exceeding it raises :class:`ConvergenceError`.

    Returns
    -------
    eigenvalues : (n,) ndarray
        Sorted in descending order.
    eigenvectors : (n, n) ndarray
        Orthonormal columns, ``eigenvectors[:, i]`` pairs with ``eigenvalues[i]``.
    """
    k = as_matrix(k, "k")
    n, m = k.shape
    if n != m:
        raise ContractError(f"sym_eigen needs a square matrix, got {k.shape}")
    scale = float(np.max(np.abs(k))) if k.size else 0.0
    asym = float(np.max(np.abs(k - k.T))) if k.size else 0.0
    if asym > _SYM_TOL * scale:
        raise ContractError(f"matrix is not symmetric: max|k - k^T| = {asym:.3e}")
    a = 0.5 * (k + k.T)
    v = np.eye(n)
    if n <= 1:
        return np.diag(a).copy(), v
    tol = _OFF_TOL * float(np.linalg.norm(a))
    rounds = round_robin_pairs(n)
    if _accel.use_numba():
        sweeps, off = _jacobi_numba(a, v, rounds, max_sweeps, tol)
    else:
        sweeps, off = _jacobi_numpy(a, v, rounds, max_sweeps, tol)
    if sweeps < 0:
        raise ConvergenceError(
            f"Jacobi did not converge in {max_sweeps} sweeps (off-diagonal norm {off:.3e})",
            off_norm=off,
        )
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], np.ascontiguousarray(v[:, order])
