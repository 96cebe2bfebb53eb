"""AR(p) error handling: Burg estimation and the conditional whitening filter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = ["ArFit", "estimate_ar", "whiten"]


@dataclass(frozen=True)
class ArFit:
    """AR coefficients ``phi_1..phi_p`` and the innovation variance."""

    phi: np.ndarray
    innovation_variance: float

    @property
    def p(self) -> int:
        return len(self.phi)


@njit(cache=True, error_model="numpy")
def burg_kernel(x, p):
    n = x.shape[0]
    energy = 0.0
    for i in range(n):
        energy += x[i] * x[i]
    energy /= n
    phi = np.zeros(p)
    if p == 0:
        return phi, energy
    fwd = x[1:].copy()
    bwd = x[:-1].copy()
    tmp = np.empty(p)
    for m in range(p):
        length = n - 1 - m
        num = 0.0
        den = 0.0
        for i in range(length):
            num += fwd[i] * bwd[i]
            den += fwd[i] * fwd[i] + bwd[i] * bwd[i]
        refl = 2.0 * num / den if den > 0.0 else 0.0
        for j in range(m):
            tmp[j] = phi[j] - refl * phi[m - 1 - j]
        for j in range(m):
            phi[j] = tmp[j]
        phi[m] = refl
        energy *= 1.0 - refl * refl
        # f_t pairs with b_{t-1} at the next stage
        for i in range(length - 1):
            f_new = fwd[i + 1] - refl * bwd[i + 1]
            b_new = bwd[i] - refl * fwd[i]
            fwd[i] = f_new
            bwd[i] = b_new
    return phi, energy


@njit(cache=True, error_model="numpy")
def whiten_kernel(x, phi, p_max):
    n = x.shape[0]
    cols = x.shape[1]
    p = phi.shape[0]
    out = np.empty((n - p_max, cols))
    for i in range(p_max, n):
        for c in range(cols):
            acc = x[i, c]
            for j in range(p):
                acc -= phi[j] * x[i - j - 1, c]
            out[i - p_max, c] = acc
    return out


def estimate_ar(residuals: np.ndarray, p: int) -> ArFit:
    """Fit an AR(p) model to a (mean-zero) residual sequence by Burg's method.

    Burg's recursion keeps every reflection coefficient in ``[-1, 1]``, so
    the fitted polynomial is always causal and the whitening filter built
    from it never explodes.  The residuals are not demeaned: they come from
    a regression that already contains an intercept.

    Parameters
    ----------
    residuals : array_like
        The sequence to model.
    p : int
        AR order; ``0`` returns an empty coefficient vector.

    Returns
    -------
    ArFit
    """
    x = np.ascontiguousarray(residuals, dtype=float)
    if p < 0:
        raise ValueError("AR order must be >= 0")
    if len(x) <= p:
        raise ValueError(f"need more than {p} residuals to fit AR({p}), got {len(x)}")
    if not np.dot(x, x) > 0:
        raise ValueError("residual variance is zero")
    phi, energy = burg_kernel(x, int(p))
    return ArFit(phi=phi, innovation_variance=float(energy))


def whiten(x: np.ndarray, phi: np.ndarray, p_max: int) -> np.ndarray:
    """Apply ``x_t - sum_j phi_j x_{t-j}`` for ``t = p_max+1..n``.

    ``x`` holds the full sequence from ``t = 1`` (a vector, or a matrix
    whose columns are filtered independently); observations before
    ``p_max + 1`` serve only as lag context.
    """
    x = np.asarray(x, dtype=float)
    phi = np.ascontiguousarray(phi, dtype=float)
    if len(phi) > p_max:
        raise ValueError(f"AR order {len(phi)} exceeds p_max={p_max}; lags would be undefined")
    if x.ndim == 1:
        return whiten_kernel(np.ascontiguousarray(x[:, None]), phi, p_max)[:, 0]
    return whiten_kernel(np.ascontiguousarray(x), phi, p_max)
