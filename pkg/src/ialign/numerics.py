"""Small dense complex-matrix kernel.

Everything here works on plain ``numpy`` arrays. Real inputs are promoted
to complex so the rest of the package only ever sees one code path.
"""
from typing import NamedTuple

import numpy as np

#: Maximum tolerated Hermitian asymmetry, relative to the matrix scale.
HERMITIAN_TOL = 1e-9


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix expected to be positive definite is not."""


class HermEig(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_cmatrix(a) -> np.ndarray:
    """Return `a` as a finite, 2-D complex array."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or 0 in a.shape:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def symmetrize(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Check that `a` is square and Hermitian within `tol`, return its Hermitian part."""
    a = as_cmatrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, np.abs(a).max())
    if np.abs(a - a.conj().T).max() > tol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    return hermitian_part(a)


def herm_eig(a) -> HermEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    Parameters
    ----------
    a : array_like
        Square matrix, Hermitian up to a relative asymmetry of 1e-9.

    Returns
    -------
    HermEig
        ``(eigenvalues, eigenvectors)`` with ``a = V diag(w) V^H``.
    """
    a = symmetrize(a)
    w, v = np.linalg.eigh(a)
    return HermEig(w, v)


def project_eigenvalues(lam: np.ndarray, cap: float) -> np.ndarray:
    """Euclidean projection of a real vector onto ``{x >= 0, sum(x) <= cap}``."""
    x = np.maximum(lam, 0.0)
    if x.sum() <= cap:
        return x
    # Capped-simplex projection: find tau with sum(max(lam - tau, 0)) == cap.
    u = np.sort(lam)[::-1]
    css = np.cumsum(u) - cap
    idx = np.arange(1, u.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    tau = css[rho] / (rho + 1)
    return np.maximum(lam - tau, 0.0)


def project_psd_trace(a, cap: float) -> np.ndarray:
    """Frobenius-nearest Hermitian PSD matrix with trace at most `cap`."""
    if not cap > 0:
        raise ValueError("cap must be positive")
    w, v = herm_eig(a)
    x = project_eigenvalues(w, cap)
    return hermitian_part((v * x) @ v.conj().T)


def logdet_psd(a) -> float:
    """Natural log-determinant of a Hermitian positive definite matrix.

    Raises
    ------
    ValueError
        On non-finite or non-square input.
    NotPositiveDefiniteError
        When the Cholesky factorization fails.
    """
    a = symmetrize(a)
    try:
        c = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite") from exc
    return float(2.0 * np.sum(np.log(np.abs(np.diag(c)))))


def solve(a, b) -> np.ndarray:
    """Solve ``a x = b`` for square nonsingular `a`."""
    return np.linalg.solve(a, b)


def inv_psd(a) -> np.ndarray:
    """Inverse of a Hermitian positive definite matrix, returned Hermitian."""
    return hermitian_part(np.linalg.inv(a))


def canonical_phase(v: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Rotate a vector so its first non-negligible coordinate is real positive."""
    v = np.asarray(v, dtype=complex)
    n = np.linalg.norm(v)
    if n == 0:
        return v
    mags = np.abs(v) / n
    i = int(np.argmax(mags > tol))
    return v * (np.conj(v[i]) / abs(v[i]))


def orth(a, rtol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis of the column space of `a` (rank cut at ``rtol * s_max``)."""
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        return np.zeros((a.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((a.shape[0], 0), dtype=complex)
    r = int(np.sum(s > rtol * s[0]))
    return u[:, :r]


def crandn(rng: np.random.Generator, *shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_hermitian(rng: np.random.Generator, n: int) -> np.ndarray:
    x = crandn(rng, n, n)
    return hermitian_part(x)


def random_pd(rng: np.random.Generator, n: int, shift: float = 0.1) -> np.ndarray:
    x = crandn(rng, n, n)
    return hermitian_part(x @ x.conj().T) + shift * np.eye(n)
