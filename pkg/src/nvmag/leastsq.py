"""Damped least squares with analytic Jacobians and box bounds.

Small Levenberg-Marquardt style solver used by the spectrum fitter and the
field inversion.  Problems here are tiny (<= 10 parameters, <= a few hundred
residuals) so the implementation favors clarity over scalability: dense
normal equations, multiplicative damping, and projection of each trial step
onto the box.

Convergence: relative step below ``step_tol`` or chi-square decrease below
``chi2_tol``, whichever comes first, within ``max_iter`` iterations.  A
step is accepted whenever it does not increase chi-square; the damping
factor is divided by 10 on acceptance and multiplied by 10 on rejection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LsqResult", "damped_least_squares", "covariance"]


@dataclass
class LsqResult:
    """Solver outcome: solution, final chi-square, and diagnostics."""

    x: np.ndarray
    chi2: float
    iterations: int
    converged: bool
    message: str
    jacobian: np.ndarray
    singular: bool = False


def _project(x, lo, hi):
    return np.minimum(np.maximum(x, lo), hi)


def damped_least_squares(
    residual,
    jacobian,
    x0,
    bounds=None,
    step_tol=1e-8,
    chi2_tol=1e-12,
    max_iter=200,
    lam0=1e-3,
    lam_max=1e12,
) -> LsqResult:
    """Minimize sum(residual(x)**2) from ``x0``.

    ``residual(x)`` returns shape (m,), ``jacobian(x)`` shape (m, n) with
    J[i, j] = d residual_i / d x_j.  ``bounds`` is an optional (lo, hi)
    pair of length-n arrays; trial points are clipped to the box, so the
    solver can converge onto a face (reported via the step criterion).

    Raises ValueError on non-finite x0 or residuals at the start; a
    non-finite trial residual mid-run is treated as a rejected step.
    """
    x = np.asarray(x0, dtype=float).copy()
    if x.ndim != 1:
        raise ValueError("x0 must be one-dimensional")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    n = x.size
    if bounds is not None:
        lo = np.asarray(bounds[0], dtype=float)
        hi = np.asarray(bounds[1], dtype=float)
        if lo.shape != (n,) or hi.shape != (n,):
            raise ValueError("bounds must match the parameter count")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        x = _project(x, lo, hi)
    else:
        lo = hi = None

    r = np.asarray(residual(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("residual at x0 is not finite")
    chi2 = float(r @ r)
    lam = lam0
    j = np.asarray(jacobian(x), dtype=float)

    for it in range(1, max_iter + 1):
        if not np.all(np.isfinite(j)):
            return LsqResult(x, chi2, it, False, "jacobian is not finite", j, singular=True)
        jtj = j.T @ j
        jtr = j.T @ r

        # Constrained optimum on a box face: the remaining gradient points
        # out of the box, so steps can only be rejected.  Detect it by the
        # projected gradient instead of waiting for the damping to blow up.
        if lo is not None:
            # tolerance from the current point, not the bounds (often inf)
            face = 1e-12 * np.maximum(1.0, np.abs(x))
            g_proj = jtr.copy()
            g_proj[(x <= lo + face) & (jtr > 0)] = 0.0
            g_proj[(x >= hi - face) & (jtr < 0)] = 0.0
            g_norm = float(np.abs(jtr).max())
            if g_norm > 0 and float(np.abs(g_proj).max()) <= 1e-6 * g_norm:
                return LsqResult(x, chi2, it, True, "pinned at bounds", j)
        # Floor the damping diagonal so flat directions stay solvable.
        diag = np.maximum(np.diag(jtj), 1e-30)
        try:
            step = np.linalg.solve(jtj + lam * np.diag(diag), -jtr)
        except np.linalg.LinAlgError:
            return LsqResult(x, chi2, it, False, "normal equations singular", j, singular=True)

        candidates = [x + step]
        if lo is not None:
            plain = _project(candidates[0], lo, hi)
            candidates[0] = plain
            clipped = plain != x + step
            # A clipped step leaves the free components with a stale
            # direction (they were solved jointly with the frozen ones), so
            # re-solve for them with the clipped components held at the face.
            if clipped.any() and not clipped.all():
                free = ~clipped
                sub = jtj[np.ix_(free, free)]
                rhs = jtr[free] + jtj[np.ix_(free, clipped)] @ (plain - x)[clipped]
                diag_f = np.maximum(np.diag(sub), 1e-30)
                try:
                    step_f = np.linalg.solve(sub + lam * np.diag(diag_f), -rhs)
                except np.linalg.LinAlgError:
                    pass
                else:
                    refined = plain.copy()
                    refined[free] = x[free] + step_f
                    candidates.append(_project(refined, lo, hi))

        x_try, r_try, chi2_try = x, r, np.inf
        for cand in candidates:
            r_c = np.asarray(residual(cand), dtype=float)
            if not np.all(np.isfinite(r_c)):
                continue
            chi2_c = float(r_c @ r_c)
            if chi2_c < chi2_try:
                x_try, r_try, chi2_try = cand, r_c, chi2_c
        actual_step = x_try - x

        if chi2_try <= chi2:
            rel_step = float(np.max(np.abs(actual_step) / np.maximum(np.abs(x), 1.0)))
            drop = chi2 - chi2_try
            x, r, chi2 = x_try, r_try, chi2_try
            j = np.asarray(jacobian(x), dtype=float)
            lam = max(lam / 10.0, 1e-12)
            if rel_step < step_tol:
                return LsqResult(x, chi2, it, True, "step below tolerance", j)
            if drop < chi2_tol:
                return LsqResult(x, chi2, it, True, "chi2 decrease below tolerance", j)
        else:
            lam *= 10.0
            if lam > lam_max:
                return LsqResult(x, chi2, it, False, "damping exhausted", j)

    return LsqResult(x, chi2, max_iter, False, "iteration limit reached", j)


def covariance(j, chi2, n_obs, n_params, scale=True):
    """Parameter covariance from the final Jacobian.

    With ``scale`` the inverse normal matrix is multiplied by the residual
    variance chi2/(n_obs - n_params), the usual estimate when residuals are
    unweighted.  Pass ``scale=False`` when residuals were already divided
    by their known sigma.  Returns None when the normal matrix is singular
    or there are no degrees of freedom.
    """
    j = np.asarray(j, dtype=float)
    dof = n_obs - n_params
    if dof <= 0:
        return None
    try:
        inv = np.linalg.inv(j.T @ j)
    except np.linalg.LinAlgError:
        return None
    if scale:
        inv = inv * (chi2 / dof)
    return inv
