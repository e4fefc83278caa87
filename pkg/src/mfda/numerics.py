"""Small dense Hermitian linear algebra with reproducible eigenvectors.

Every eigenvector returned here is canonicalized: its largest-magnitude entry
(first one on ties) is made real and non-negative. Re-running on the same
input therefore gives bit-identical vectors, which keeps CSV output stable.
"""

import numpy as np
import scipy.linalg as sla

from mfda.errors import NumericalError, ValidationError

HERMITIAN_RTOL = 1e-12


def as_hermitian(H, name="matrix"):
    """Validate ``H`` as square and Hermitian, return its symmetrized copy."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise ValidationError(f"{name} has non-finite entries")
    scale = np.linalg.norm(H)
    resid = np.linalg.norm(H - H.conj().T)
    if resid > HERMITIAN_RTOL * max(scale, np.finfo(float).tiny):
        raise ValidationError(
            f"{name} is not Hermitian (symmetry residual {resid:.3e}, norm {scale:.3e})"
        )
    return 0.5 * (H + H.conj().T)


def fix_phase(v):
    """Rotate ``v`` so its largest-magnitude entry is real and non-negative."""
    v = np.array(v, dtype=complex)
    if v.size == 0:
        return v
    idx = int(np.argmax(np.abs(v)))
    mag = abs(v[idx])
    if mag == 0.0:
        return v
    v = v * (np.conj(v[idx]) / mag)
    v[idx] = mag
    return v


def leading_eigpair(H):
    """Largest eigenvalue of Hermitian ``H`` and a unit, phase-fixed eigenvector."""
    H = as_hermitian(H, "H")
    try:
        vals, vecs = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Hermitian eigensolver failed: {exc}") from exc
    u = vecs[:, -1]
    return float(vals[-1]), fix_phase(u / np.linalg.norm(u))


def herm_gen_eig_max(A, B):
    """Largest generalized eigenpair of the Hermitian-definite pair ``(A, B)``.

    Solves ``A u = lam B u`` by Cholesky whitening: with ``B = L L^H`` the
    problem becomes the ordinary Hermitian problem ``L^-1 A L^-H y = lam y``
    and ``u = L^-H y``. The returned ``u`` has unit Euclidean norm and the
    canonical phase.
    """
    A = as_hermitian(A, "A")
    B = as_hermitian(B, "B")
    if A.shape != B.shape:
        raise ValidationError(f"shape mismatch: {A.shape} vs {B.shape}")
    try:
        L = sla.cholesky(B, lower=True)
    except sla.LinAlgError as exc:
        raise ValidationError("B must be positive definite") from exc
    X = sla.solve_triangular(L, A, lower=True)
    C = sla.solve_triangular(L, X.conj().T, lower=True).conj().T
    lam, y = leading_eigpair(0.5 * (C + C.conj().T))
    u = sla.solve_triangular(L.conj().T, y, lower=False)
    norm = np.linalg.norm(u)
    if not np.isfinite(norm) or norm == 0.0:
        raise NumericalError("generalized eigenvector back-substitution failed")
    return lam, fix_phase(u / norm)
