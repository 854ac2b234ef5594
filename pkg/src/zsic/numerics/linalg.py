import numpy as np
import scipy.linalg


class NumericalError(ArithmeticError):
    pass


def ridge_solve(E, Y, reg=1.0):
    r"""Closed-form ridge weights mapping rows of ``E`` onto rows of ``Y``.

    Minimises :math:`\|EW - Y\|_F^2 + reg \|W\|_F^2` through the dual
    (kernel) form :math:`W = E^\top (E E^\top + reg I)^{-1} Y`, which only
    factorises a C x C system. The system is symmetric positive definite
    for ``reg > 0`` and is solved by Cholesky, never by explicit inversion.

    Parameters
    ----------
    E : array (C, d)
    Y : array (C, K)
    reg : float
        Strictly positive regulariser.

    Returns
    -------
    W : array (d, K)
    """
    E = np.asarray(E, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if reg <= 0:
        raise ValueError(f"ridge regulariser must be positive, got {reg}")
    if not np.all(np.isfinite(E)):
        raise ValueError("E contains non-finite entries")
    if E.shape[0] != Y.shape[0]:
        raise ValueError(f"row mismatch: E has {E.shape[0]} rows, Y has {Y.shape[0]}")

    gram = E @ E.T + reg * np.eye(E.shape[0])
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"ridge system not positive definite (condition estimate {np.linalg.cond(gram):.3e})"
        ) from exc
    return E.T @ scipy.linalg.cho_solve(factor, Y)


def ridge_objective_grad(E, Y, W, reg=1.0):
    """Gradient of the ridge objective at ``W``: 2 E^T (EW - Y) + 2 reg W."""
    return 2.0 * E.T @ (E @ W - Y) + 2.0 * reg * W


def softmax(v, axis=-1):
    v = np.asarray(v, dtype=np.float64)
    e = np.exp(v - v.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def entropy(p, axis=-1):
    """Shannon entropy in nats, with 0 * log 0 taken as 0."""
    p = np.asarray(p, dtype=np.float64)
    logs = np.log(np.where(p > 0, p, 1.0))
    return -(p * logs).sum(axis=axis)


def euclidean(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    d = x - y
    return float(np.sqrt(np.dot(d, d)))
