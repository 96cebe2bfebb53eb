"""BMDL score of a candidate model and the profile estimates behind it.

The score has four parts: a goodness-of-fit term in the innovation
variance, a mixture-code penalty for the model-specific coefficients
``mu`` (changepoint increments and harmonic terms), a two-part penalty for
the AR coefficients, and a Beta-Bernoulli penalty on the number of
changepoints.  Smaller is better.

Plug-in quantities are built as follows.  The series is regressed on all
columns, AR coefficients are estimated from those residuals and both the
response and the columns are whitened.  The baseline pair ``(1, t)`` is then
projected out and ``mu`` gets a ridge estimate with penalty ``1/nu``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .arnoise import burg_kernel, estimate_ar, whiten
from .model import ChangepointModel, Hyperparams, TimeSeries, validate_model

__all__ = [
    "ScoringError",
    "IllConditionedWarning",
    "ScoredModel",
    "design_score",
    "Scorer",
    "harmonic_table",
    "profile_fit",
    "bmdl_score",
    "score_model",
    "changepoint_penalty",
    "better",
]

COND_WARN = 1e12
# residual RMS below this fraction of the data scale counts as a perfect fit
DEGENERATE_RMS = 1e-11


class ScoringError(ArithmeticError):
    """The score is undefined for this model and series (perfect fit or collapsed design)."""


class IllConditionedWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class ScoredModel:
    """A model with its profile estimates; ``bmdl`` is ``None`` until scored.

    ``s_hat`` is the baseline ``(intercept, slope)``; ``mu_hat`` follows the
    column order of :func:`bmdlcp.model.design_columns`.
    """

    model: ChangepointModel
    sigma2_hat: float
    s_hat: np.ndarray
    mu_hat: np.ndarray
    phi_hat: np.ndarray
    log_det: float
    nu: float
    n_fit: int
    bmdl: float | None = None

    def sort_key(self) -> tuple[float, int, int, int]:
        return (self.bmdl, *self.model.tiebreak_key())


def better(a: ScoredModel, b: ScoredModel | None) -> bool:
    """True if ``a`` beats ``b``: lower score, ties to fewer changepoints, then lower k, then lower p."""
    return b is None or a.sort_key() < b.sort_key()


def _prepare(ts: TimeSeries, hyper: Hyperparams) -> Hyperparams:
    if hyper.nu is None or hyper.k_max is None:
        hyper = hyper.resolve(ts.n, ts.period)
    return hyper


@njit(cache=True, error_model="numpy")
def _fill_columns(out, harm, taus, k, t0, rows, mid, width):
    # columns: 1, t, (ind, ind * t) per regime r > 1, harmonics; t centered as (t - mid) / width
    m = taus.shape[0]
    for r in range(rows):
        t = t0 + r + 1.0
        tt = (t - mid) / width
        out[0, r] = 1.0
        out[1, r] = tt
        for j in range(m):
            ind = 1.0 if t >= taus[j] and (j == m - 1 or t < taus[j + 1]) else 0.0
            out[2 + 2 * j, r] = ind
            out[3 + 2 * j, r] = ind * tt
        for h in range(2 * k):
            out[2 + 2 * m + h, r] = harm[t0 + r, h]


@njit(cache=True, error_model="numpy")
def _residuals_for_ar(x, harm, taus, k, p_max):
    """Least-squares residuals of x on all columns over rows p_max+1..n.

    Normal equations on centered time columns; near-dependent columns are
    dropped during the Cholesky sweep.
    """
    n = x.shape[0]
    n_fit = n - p_max
    c = 2 + 2 * taus.shape[0] + 2 * k
    a = np.empty((c, n_fit))
    _fill_columns(a, harm, taus, k, p_max, n_fit, 0.5 * (n + p_max + 1.0), n_fit)
    gram = np.zeros((c, c))
    rhs = np.zeros(c)
    for r in range(n_fit):
        xr = x[p_max + r]
        for i in range(c):
            ai = a[i, r]
            rhs[i] += ai * xr
            for j in range(i + 1):
                gram[i, j] += ai * a[j, r]
    chol = np.zeros((c, c))
    keep = np.ones(c, dtype=np.bool_)
    for j in range(c):
        acc = gram[j, j]
        for l in range(j):
            acc -= chol[j, l] * chol[j, l]
        if not acc > 1e-10 * gram[j, j]:
            keep[j] = False
            chol[j, j] = 1.0
            continue
        chol[j, j] = np.sqrt(acc)
        for i in range(j + 1, c):
            acc = gram[i, j]
            for l in range(j):
                acc -= chol[i, l] * chol[j, l]
            chol[i, j] = acc / chol[j, j]
    w = np.zeros(c)
    for j in range(c):
        if keep[j]:
            acc = rhs[j]
            for l in range(j):
                acc -= chol[j, l] * w[l]
            w[j] = acc / chol[j, j]
    coef = np.zeros(c)
    for j in range(c - 1, -1, -1):
        if keep[j]:
            acc = w[j]
            for l in range(j + 1, c):
                acc -= chol[l, j] * coef[l]
            coef[j] = acc / chol[j, j]
    resid = np.empty(n_fit)
    for r in range(n_fit):
        acc = x[p_max + r]
        for j in range(c):
            acc -= a[j, r] * coef[j]
        resid[r] = acc
    return resid


@njit(cache=True, error_model="numpy")
def _profile_kernel(x, harm, taus, k, p, p_max, nu, scale_tol):
    """Returns (status, sigma2, log_det, cond_est, mu, s_hat, phi).

    status 0 ok, 1 singular baseline, 2 zero residual variance,
    3 ridge system not positive definite, 4 AR fit impossible.
    """
    n = x.shape[0]
    n_fit = n - p_max
    m = taus.shape[0]
    q = 2 * m + 2 * k
    c = q + 3
    mu = np.zeros(q)
    s_hat = np.zeros(2)
    phi = np.zeros(p)

    # work[0:2] baseline, work[2:2+q] model columns, work[c-1] response; raw t; one row per column
    work = np.empty((c, n_fit))
    if p > 0:
        resid = _residuals_for_ar(x, harm, taus, k, p_max)
        energy = 0.0
        for r in range(n_fit):
            energy += resid[r] * resid[r]
        if not energy > 0.0:
            return 4, 0.0, 0.0, 0.0, mu, s_hat, phi
        phi, _ = burg_kernel(resid, p)
        full = np.empty((c, n))
        _fill_columns(full, harm, taus, k, 0, n, 0.0, 1.0)
        for i in range(n):
            full[c - 1, i] = x[i]
        for r in range(n_fit):
            i = p_max + r
            for col in range(c):
                acc = full[col, i]
                for j in range(p):
                    acc -= phi[j] * full[col, i - j - 1]
                work[col, r] = acc
    else:
        _fill_columns(work, harm, taus, k, p_max, n_fit, 0.0, 1.0)
        for r in range(n_fit):
            work[c - 1, r] = x[p_max + r]

    # orthonormal basis (b0, b1) of the whitened baseline pair, Z~ = B R
    b0 = np.empty(n_fit)
    b1 = np.empty(n_fit)
    r00 = 0.0
    for r in range(n_fit):
        r00 += work[0, r] * work[0, r]
    r00 = np.sqrt(r00)
    if r00 == 0.0:
        return 1, 0.0, 0.0, 0.0, mu, s_hat, phi
    for r in range(n_fit):
        b0[r] = work[0, r] / r00
    r01 = 0.0
    norm1 = 0.0
    for r in range(n_fit):
        r01 += b0[r] * work[1, r]
        norm1 += work[1, r] * work[1, r]
    for r in range(n_fit):
        b1[r] = work[1, r] - r01 * b0[r]
    extra = 0.0
    for r in range(n_fit):
        extra += b0[r] * b1[r]
    r01 += extra
    r11 = 0.0
    for r in range(n_fit):
        b1[r] -= extra * b0[r]
        r11 += b1[r] * b1[r]
    r11 = np.sqrt(r11)
    if r11 <= 1e-12 * np.sqrt(norm1):
        return 1, 0.0, 0.0, 0.0, mu, s_hat, phi
    for r in range(n_fit):
        b1[r] /= r11

    # project the baseline out of model columns and response, two passes
    coords = np.zeros((c, 2))
    for col in range(2, c):
        for _ in range(2):
            d0 = 0.0
            d1 = 0.0
            for r in range(n_fit):
                d0 += b0[r] * work[col, r]
                d1 += b1[r] * work[col, r]
            for r in range(n_fit):
                work[col, r] -= d0 * b0[r] + d1 * b1[r]
            coords[col, 0] += d0
            coords[col, 1] += d1

    yy = 0.0
    for r in range(n_fit):
        yy += work[c - 1, r] * work[c - 1, r]
    rss = yy
    log_det = 0.0
    cond_est = 1.0
    if q > 0:
        gram = np.zeros((q, q))
        rhs = np.zeros(q)
        for r in range(n_fit):
            yr = work[c - 1, r]
            for i in range(q):
                di = work[2 + i, r]
                rhs[i] += di * yr
                for j in range(i + 1):
                    gram[i, j] += di * work[2 + j, r]
        inv_nu = 1.0 / nu
        chol = np.zeros((q, q))
        lo = np.inf
        hi = 0.0
        for j in range(q):
            acc = gram[j, j] + inv_nu
            for l in range(j):
                acc -= chol[j, l] * chol[j, l]
            if not acc > 0.0:
                return 3, 0.0, 0.0, 0.0, mu, s_hat, phi
            d = np.sqrt(acc)
            chol[j, j] = d
            log_det += 2.0 * np.log(d)
            lo = min(lo, d)
            hi = max(hi, d)
            for i in range(j + 1, q):
                acc = gram[i, j]
                for l in range(j):
                    acc -= chol[i, l] * chol[j, l]
                chol[i, j] = acc / d
        cond_est = (hi / lo) ** 2
        w = np.empty(q)
        for j in range(q):
            acc = rhs[j]
            for l in range(j):
                acc -= chol[j, l] * w[l]
            w[j] = acc / chol[j, j]
        for j in range(q - 1, -1, -1):
            acc = w[j]
            for l in range(j + 1, q):
                acc -= chol[l, j] * mu[l]
            mu[j] = acc / chol[j, j]
        for j in range(q):
            rss -= rhs[j] * mu[j]

    sigma2 = rss / n_fit
    raw = 0.0
    for r in range(p_max, x.shape[0]):
        raw += x[r] * x[r]
    scale = max(np.sqrt(yy / n_fit), np.sqrt(raw / n_fit))
    if not sigma2 > 0.0 or np.sqrt(sigma2) <= scale_tol * scale:
        return 2, sigma2, log_det, cond_est, mu, s_hat, phi

    # baseline pair from B'(x~ - D~ mu) and R
    c0 = coords[c - 1, 0]
    c1 = coords[c - 1, 1]
    for j in range(q):
        c0 -= coords[2 + j, 0] * mu[j]
        c1 -= coords[2 + j, 1] * mu[j]
    s_hat[1] = c1 / r11
    s_hat[0] = (c0 - r01 * s_hat[1]) / r00
    return 0, sigma2, log_det, cond_est, mu, s_hat, phi


_FAILURES = {
    1: "whitened baseline design is singular",
    2: "residual variance is zero (series is fitted exactly)",
    3: "ridge system is not positive definite",
    4: "AR fit impossible: residuals are identically zero",
}


def harmonic_table(n: int, period: int, k_max: int) -> np.ndarray:
    """``sin, cos`` of ``2 pi t i / T`` for ``t = 1..n``, ``i = 1..k_max``, interleaved per order."""
    t = np.arange(1.0, n + 1.0)
    table = np.empty((n, 2 * k_max))
    for i in range(1, k_max + 1):
        angle = 2.0 * math.pi * i * t / period
        table[:, 2 * i - 2] = np.sin(angle)
        table[:, 2 * i - 1] = np.cos(angle)
    return table


class Scorer:
    """Scores models on one series; shares the harmonic table across calls.

    Both the Metropolis-Hastings chain and the exhaustive oracle go through
    this object, so they see the same function bit for bit.
    """

    def __init__(self, ts: TimeSeries, hyper: Hyperparams) -> None:
        self.ts = ts
        self.hyper = _prepare(ts, hyper)
        self.x = np.ascontiguousarray(ts.values, dtype=float)
        self.harm = harmonic_table(ts.n, ts.period, max(self.hyper.k_max, 0))
        self.n_fit = ts.n - self.hyper.p_max

    def validate(self, model: ChangepointModel) -> str | None:
        return validate_model(model, self.hyper, self.ts.n, self.ts.period)

    def profile(self, model: ChangepointModel, *, check: bool = True) -> ScoredModel:
        hyper = self.hyper
        if check:
            reason = self.validate(model)
            if reason is not None:
                raise ScoringError(f"invalid model: {reason}")
        if self.n_fit <= 2 + model.n_mu:
            raise ScoringError(f"{self.n_fit} fitted rows cannot support {2 + model.n_mu} coefficients")
        status, sigma2, log_det, cond_est, mu, s_hat, phi = _profile_kernel(
            self.x,
            self.harm,
            np.asarray(model.taus, dtype=np.int64),
            model.k,
            model.p,
            hyper.p_max,
            float(hyper.nu),
            DEGENERATE_RMS,
        )
        if status:
            raise ScoringError(_FAILURES[status])
        if cond_est > COND_WARN:
            warnings.warn(
                f"ridge system condition estimate {cond_est:.2e} exceeds {COND_WARN:.0e}",
                IllConditionedWarning,
                stacklevel=2,
            )
        return ScoredModel(
            model=model,
            sigma2_hat=float(sigma2),
            s_hat=s_hat,
            mu_hat=mu,
            phi_hat=phi,
            log_det=float(log_det),
            nu=float(hyper.nu),
            n_fit=self.n_fit,
        )

    def fast_score(self, taus: tuple[int, ...], k: int, p: int) -> float:
        """Score only, for a configuration already known to be valid."""
        hyper = self.hyper
        if self.n_fit <= 2 + 2 * len(taus) + 2 * k:
            raise ScoringError("too few fitted rows")
        status, sigma2, log_det, _, _, _, _ = _profile_kernel(
            self.x, self.harm, np.array(taus, dtype=np.int64), k, p, hyper.p_max, hyper.nu, DEGENERATE_RMS
        )
        if status:
            raise ScoringError(_FAILURES[status])
        return assemble_score(sigma2, log_det, len(taus), k, p, self.n_fit, hyper.nu, hyper.a, hyper.b)

    def score(self, model: ChangepointModel, *, check: bool = True) -> ScoredModel:
        fit = self.profile(model, check=check)
        return replace(fit, bmdl=_assemble(fit, self.hyper))


def profile_fit(ts: TimeSeries, model: ChangepointModel, hyper: Hyperparams) -> ScoredModel:
    """Profile estimates for ``model`` on ``ts``, without the score.

    In order: least-squares fit on all columns, Burg AR fit of its residuals
    (skipped for ``p = 0``), whitening of response and columns, projection
    of the baseline pair out of both, ridge estimate of ``mu`` with
    penalty ``1/nu``, innovation variance ``y'(y - D mu) / (n - p_max)``
    and finally the baseline pair from the whitened remainder.

    Raises
    ------
    ScoringError
        If the model is invalid, the rows cannot support the coefficients,
        the whitened baseline collapses, or the fit is exact.
    """
    return Scorer(ts, hyper).profile(model)


def changepoint_penalty(m: int, n_fit: int, a: float, b: float) -> float:
    """``-log[Gamma(a + m) Gamma(b + n_fit - m)]``, the Beta-Bernoulli code length of ``eta``."""
    return -(math.lgamma(a + m) + math.lgamma(b + n_fit - m))


def assemble_score(
    sigma2: float, log_det: float, m: int, k: int, p: int, n_fit: int, nu: float, a: float, b: float
) -> float:
    """Sum of the four code-length terms given the plug-in quantities."""
    return (
        0.5 * n_fit * math.log(sigma2)
        + (m + k) * math.log(nu)
        + 0.5 * log_det
        + 0.5 * p * math.log(n_fit)
        + changepoint_penalty(m, n_fit, a, b)
    )


def _assemble(fit: ScoredModel, hyper: Hyperparams) -> float:
    model = fit.model
    return assemble_score(
        fit.sigma2_hat, fit.log_det, model.m, model.k, model.p, fit.n_fit, fit.nu, hyper.a, hyper.b
    )


def score_model(ts: TimeSeries, model: ChangepointModel, hyper: Hyperparams) -> ScoredModel:
    """Profile fit with the BMDL score filled in."""
    return Scorer(ts, hyper).score(model)


def bmdl_score(ts: TimeSeries, model: ChangepointModel, hyper: Hyperparams) -> float:
    return score_model(ts, model, hyper).bmdl


def design_score(
    x: np.ndarray,
    D: np.ndarray,
    *,
    m: int,
    k: int,
    p: int,
    p_max: int,
    nu: float,
    a: float = 1.0,
    b: float = 19.0,
) -> float:
    """BMDL score for explicit model-specific columns ``D`` (rows ``1..n``).

    Dense numpy version of the same construction as :class:`Scorer`; the
    baseline ``(1, t)`` is added here.  Column order in ``D`` is irrelevant to
    the result, and ``m``, ``k``, ``p`` only enter the penalties.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    n_fit = n - p_max
    t = np.arange(1.0, n + 1.0)
    Z = np.column_stack([np.ones(n), t])
    D = np.asarray(D, dtype=float).reshape(n, -1)
    q = D.shape[1]
    phi = np.zeros(0)
    if p:
        full = np.column_stack([Z, D])[p_max:]
        coef, *_ = np.linalg.lstsq(full, x[p_max:], rcond=None)
        phi = estimate_ar(x[p_max:] - full @ coef, p).phi
    xw = whiten(x, phi, p_max)
    zw = whiten(Z, phi, p_max)
    dw = whiten(D, phi, p_max) if q else np.zeros((n_fit, 0))
    qz, _ = np.linalg.qr(zw)
    y = xw - qz @ (qz.T @ xw)
    log_det = 0.0
    rss = float(y @ y)
    if q:
        dh = dw - qz @ (qz.T @ dw)
        chol = np.linalg.cholesky(dh.T @ dh + np.eye(q) / nu)
        log_det = 2.0 * math.fsum(np.log(np.diag(chol)))
        w = np.linalg.solve(chol, dh.T @ y)
        rss -= float(w @ w)
    sigma2 = rss / n_fit
    if not sigma2 > 0.0:
        raise ScoringError(_FAILURES[2])
    return assemble_score(sigma2, log_det, m, k, p, n_fit, nu, a, b)
