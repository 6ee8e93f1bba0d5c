"""
Solvers for the condensed sparse symmetric positive definite system.

The default is conjugate gradients with a Jacobi preconditioner. A dense
Cholesky path (n <= DENSE_CHOLESKY_LIMIT) serves as an oracle and as the SPD
check, and a sparse direct path is available for badly conditioned runs.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from loguru import logger

from app.config.settings import DENSE_CHOLESKY_LIMIT, SOLVER_MAX_ITER_FACTOR, SOLVER_TOLERANCE
from app.utils.errors import InvalidArgumentError, SolverError

SOLVER_METHODS = ("cg", "cholesky", "direct")


@dataclass(frozen=True)
class SolverResult:
    """
    Outcome of a linear solve.

    Attributes:
    -----------
    solution : np.ndarray
        The computed x.
    iterations : int
        CG iterations (0 for direct methods).
    residual_norm : float
        Relative residual ||A x - b|| / ||b||, recomputed from x.
    method : str
        Method used.
    """
    solution: np.ndarray
    iterations: int
    residual_norm: float
    method: str


def _as_sparse(A) -> sp.csr_matrix:
    if sp.issparse(A):
        return A.tocsr()
    return sp.csr_matrix(np.asarray(A, dtype=float))


def relative_residual(A, x: np.ndarray, b: np.ndarray) -> float:
    b_norm = np.linalg.norm(b)
    r_norm = np.linalg.norm(A @ x - b)
    return float(r_norm / b_norm) if b_norm > 0.0 else float(r_norm)


def check_spd(A) -> Optional[int]:
    """
    Dense Cholesky test of positive definiteness.

    Returns:
    --------
    Optional[int]
        None if A is SPD, otherwise the row at which the factorization failed.
    """
    dense = A.toarray() if sp.issparse(A) else np.array(A, dtype=float)
    if dense.size == 0:
        return None
    _, info = scipy.linalg.lapack.dpotrf(dense, lower=1)
    if info > 0:
        return int(info - 1)
    if info < 0:
        raise SolverError("Invalid argument passed to the Cholesky factorization", context={"info": int(info)})
    return None


def _validate(A, b: np.ndarray) -> None:
    if A.shape[0] != A.shape[1]:
        raise InvalidArgumentError("System matrix must be square", {"shape": A.shape})
    if b.shape != (A.shape[0],):
        raise InvalidArgumentError("Right-hand side length does not match the matrix",
                                   {"n": A.shape[0], "len_b": b.shape})
    if not np.all(np.isfinite(b)):
        raise InvalidArgumentError("Right-hand side has non-finite entries")
    if not np.all(np.isfinite(A.data)):
        raise InvalidArgumentError("System matrix has non-finite entries")


def _conjugate_gradient(A: sp.csr_matrix, b: np.ndarray, tol: float, max_iter: int) -> SolverResult:
    n = b.shape[0]
    diagonal = A.diagonal()
    if np.any(diagonal <= 0.0):
        row = int(np.flatnonzero(diagonal <= 0.0)[0])
        raise SolverError("Matrix is not positive definite (non-positive diagonal entry)",
                          context={"row": row})
    inverse_diagonal = 1.0 / diagonal

    b_norm = np.linalg.norm(b)
    x = np.zeros(n)
    if b_norm == 0.0:
        return SolverResult(solution=x, iterations=0, residual_norm=0.0, method="cg")

    r = b.copy()
    z = inverse_diagonal * r
    d = z.copy()
    rz = r @ z
    for iteration in range(1, max_iter + 1):
        Ad = A @ d
        curvature = d @ Ad
        if curvature <= 0.0:
            raise SolverError("Negative curvature in conjugate gradients: matrix is not positive definite",
                              residual=float(np.linalg.norm(r) / b_norm), iterations=iteration)
        step = rz / curvature
        x += step * d
        r -= step * Ad
        if np.linalg.norm(r) <= tol * b_norm:
            # guard against drift of the recursive residual
            r = b - A @ x
            if np.linalg.norm(r) <= tol * b_norm:
                return SolverResult(solution=x, iterations=iteration,
                                    residual_norm=float(np.linalg.norm(r) / b_norm), method="cg")
        z = inverse_diagonal * r
        rz_next = r @ z
        d = z + (rz_next / rz) * d
        rz = rz_next

    residual = relative_residual(A, x, b)
    raise SolverError("Conjugate gradients did not converge within max_iter",
                      residual=residual, iterations=max_iter)


def solve_spd(A,
              b: np.ndarray,
              tol: float = SOLVER_TOLERANCE,
              max_iter: Optional[int] = None,
              method: str = "cg",
              verify: bool = True) -> SolverResult:
    """
    Solve A x = b for a sparse symmetric positive definite A.

    Parameters:
    -----------
    A : sparse matrix or array
        Structurally symmetric system matrix.
    b : np.ndarray
        Right-hand side.
    tol : float, optional
        Relative residual target for CG. Default is SOLVER_TOLERANCE.
    max_iter : Optional[int], optional
        CG iteration cap. Default is SOLVER_MAX_ITER_FACTOR * n.
    method : str, optional
        "cg" (default), "cholesky" (dense, n <= DENSE_CHOLESKY_LIMIT) or "direct".
    verify : bool, optional
        Run the dense SPD check first when n <= DENSE_CHOLESKY_LIMIT. Default is True.

    Returns:
    --------
    SolverResult
        Solution and recomputed relative residual.
    """
    if method not in SOLVER_METHODS:
        raise InvalidArgumentError(f"Unknown solver method '{method}'", {"methods": SOLVER_METHODS})
    A = _as_sparse(A)
    b = np.asarray(b, dtype=float)
    _validate(A, b)
    n = b.shape[0]
    if n == 0:
        return SolverResult(solution=np.zeros(0), iterations=0, residual_norm=0.0, method=method)

    if method == "cholesky" and n > DENSE_CHOLESKY_LIMIT:
        raise InvalidArgumentError("Dense Cholesky path is limited to small systems",
                                   {"n": n, "limit": DENSE_CHOLESKY_LIMIT})
    if (verify or method == "cholesky") and n <= DENSE_CHOLESKY_LIMIT:
        row = check_spd(A)
        if row is not None:
            raise SolverError("Matrix is not symmetric positive definite (Cholesky failed)",
                              context={"row": row})

    if method == "cg":
        result = _conjugate_gradient(A, b, tol, max_iter or SOLVER_MAX_ITER_FACTOR * n)
    elif method == "cholesky":
        factor = scipy.linalg.cho_factor(A.toarray(), lower=True)
        x = scipy.linalg.cho_solve(factor, b)
        result = SolverResult(solution=x, iterations=0, residual_norm=relative_residual(A, x, b), method=method)
    else:
        x = spla.spsolve(A.tocsc(), b)
        if not np.all(np.isfinite(x)):
            raise SolverError("Sparse direct solve produced non-finite values (singular matrix)")
        result = SolverResult(solution=x, iterations=0, residual_norm=relative_residual(A, x, b), method=method)

    logger.debug(f"solve_spd[{result.method}]: n={n}, iterations={result.iterations}, "
                 f"residual={result.residual_norm:.3e}")
    return result
