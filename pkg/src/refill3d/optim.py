"""Descent with Armijo backtracking, shared by the 3D and 2D aligners.

The objective is a callable ``f(x, grad=False, hessian=False)`` returning the
loss, ``(loss, g)`` or ``(loss, g, H)`` where ``H`` is a Gauss-Newton
(positive semi-definite) approximation of the Hessian.
"""

from dataclasses import dataclass, field

import numpy as np

ARMIJO_C = 1e-4
SHRINK = 0.5
MAX_BACKTRACKS = 40
LM_DAMPING = 1e-6


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)


def _gauss_newton_direction(g, H):
    A = H + LM_DAMPING * np.diag(np.diag(H)) + 1e-12 * np.eye(len(g)) * max(np.trace(H), 1e-300)
    try:
        d = np.linalg.solve(A, -g)
    except np.linalg.LinAlgError:
        return -g
    if not np.all(np.isfinite(d)) or g @ d >= 0:
        return -g
    return d


def minimize(f, x0, method="gauss-newton", max_iters=200, step_tolerance=1e-7):
    """Minimize ``f`` from ``x0``; accepted losses never increase.

    Stops when an accepted step is shorter than ``step_tolerance``, when no
    step length along the search direction satisfies the Armijo condition,
    or after ``max_iters`` iterations.
    """
    x = np.array(x0, dtype=np.float64)
    gauss_newton = method == "gauss-newton"
    fx = f(x)
    history = [fx]
    if not np.isfinite(fx):
        return OptimizeResult(x, fx, 0, False, history)

    alpha_sd = None
    converged = False
    it = 0
    while it < max_iters:
        if gauss_newton:
            fx, g, H = f(x, grad=True, hessian=True)
            d = _gauss_newton_direction(g, H)
            alpha = 1.0
        else:
            fx, g = f(x, grad=True)
            d = -g
            gmax = np.max(np.abs(g))
            if gmax == 0:
                converged = True
                break
            alpha = alpha_sd if alpha_sd is not None else 1e-2 / gmax
        slope = g @ d
        if not slope < 0:
            converged = True
            break

        accepted = False
        for _ in range(MAX_BACKTRACKS):
            x_new = x + alpha * d
            f_new = f(x_new)
            if f_new <= fx + ARMIJO_C * alpha * slope:
                accepted = True
                break
            alpha *= SHRINK
        if not accepted:
            converged = True
            break

        it += 1
        step = x_new - x
        x, fx = x_new, f_new
        history.append(fx)
        alpha_sd = 2.0 * alpha
        if np.linalg.norm(step) < step_tolerance:
            converged = True
            break
    return OptimizeResult(x, float(fx), it, converged, history)
