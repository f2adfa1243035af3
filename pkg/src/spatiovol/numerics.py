"""Shared numerical machinery.

The optimizer here is the single minimizer used by every likelihood fit in
the package, so that estimates from different models are comparable. It is a
projected BFGS method on a box, with central finite-difference gradients and
a backtracking line search that only ever accepts improving steps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from scipy import stats

from .errors import (
    AsymmetryError,
    DomainError,
    NonFiniteObjectiveError,
    PDFailure,
    SingularMatrixError,
)

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 2000


@dataclass
class OptProblem:
    objective: Callable[[np.ndarray], float]
    lower: np.ndarray
    upper: np.ndarray
    start: np.ndarray

    def __post_init__(self) -> None:
        self.start = np.asarray(self.start, dtype=float).copy()
        k = self.start.size
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (k,)).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (k,)).copy()
        if np.any(self.lower > self.upper):
            raise DomainError("lower bound exceeds upper bound")
        if np.any(self.start < self.lower) or np.any(self.start > self.upper):
            raise DomainError("start point outside the box")


@dataclass
class OptResult:
    argmin: np.ndarray
    value: float
    iterations: int
    converged: bool
    trace: list[float] = field(default_factory=list)
    message: str = ""
    nfev: int = 0
    start: np.ndarray | None = None
    seed: int | None = None


def _safe(objective: Callable[[np.ndarray], float]):
    counter = [0]

    def f(x: np.ndarray) -> float:
        counter[0] += 1
        try:
            v = float(objective(x))
        except (ArithmeticError, ValueError, np.linalg.LinAlgError):
            return np.inf
        return v if np.isfinite(v) else np.inf

    return f, counter


def fd_gradient(f, x: np.ndarray, fx: float, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Central differences with step max(1e-6, 1e-6|x|), one-sided at the box edges."""
    g = np.zeros_like(x)
    for i in range(x.size):
        h = max(1e-6, 1e-6 * abs(x[i]))
        up_ok = x[i] + h <= upper[i]
        dn_ok = x[i] - h >= lower[i]
        fp = fm = np.inf
        if up_ok:
            xp = x.copy()
            xp[i] += h
            fp = f(xp)
        if dn_ok:
            xm = x.copy()
            xm[i] -= h
            fm = f(xm)
        if np.isfinite(fp) and np.isfinite(fm):
            g[i] = (fp - fm) / (2.0 * h)
        elif np.isfinite(fp) and np.isfinite(fx):
            g[i] = (fp - fx) / h
        elif np.isfinite(fm) and np.isfinite(fx):
            g[i] = (fx - fm) / h
        else:
            g[i] = 0.0
    return g


def _on_implicit_constraint(f, x, pg, lower, upper) -> bool:
    """True when a tiny descent step leaves the objective's finite domain.

    Objectives encode constraints beyond the box (stationarity, positive
    definiteness) by returning +inf; a point where descent immediately hits
    that wall is a constrained optimum, not a failure.
    """
    norm = np.abs(pg).max()
    if norm == 0.0:
        return False
    for h in (1e-9, 1e-7, 1e-5):
        xn = np.clip(x - h * np.maximum(1.0, np.abs(x)) * pg / norm, lower, upper)
        if np.any(xn != x) and not np.isfinite(f(xn)):
            return True
    return False


def minimize(problem: OptProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> OptResult:
    """Minimize ``problem.objective`` over its box.

    Convergence is declared when the projected gradient's infinity norm drops
    below ``tol``, when the relative objective improvement stays below
    ``tol`` for five consecutive iterations, or when descent is blocked by an
    implicit constraint (the objective turning infinite just inside the box). Non-finite objective values
    inside the box are treated as +inf, so the offending step is rejected.
    """
    f, counter = _safe(problem.objective)
    lower, upper = problem.lower, problem.upper
    x = np.clip(problem.start, lower, upper)
    fx = f(x)
    if not np.isfinite(fx):
        raise NonFiniteObjectiveError("objective is not finite at the start point")

    k = x.size
    g = fd_gradient(f, x, fx, lower, upper)
    H = np.eye(k) / max(1.0, np.abs(g).max())
    trace = [fx]
    small = 0
    converged = False
    message = "max_iter reached"
    it = 0
    eps_bound = 1e-12
    for it in range(1, max_iter + 1):
        at_lo = (x <= lower + eps_bound) & (g > 0)
        at_hi = (x >= upper - eps_bound) & (g < 0)
        free = ~(at_lo | at_hi)
        pg = np.where(free, g, 0.0)
        if np.abs(pg).max() < tol:
            converged, message = True, "projected gradient below tol"
            break

        d = np.zeros(k)
        idx = np.flatnonzero(free)
        d[idx] = -H[np.ix_(idx, idx)] @ g[idx]
        if d @ g >= 0:
            H = np.eye(k) / max(1.0, np.abs(pg).max())
            d = -H @ pg

        accepted = False
        for attempt in range(2):
            t = 1.0
            for _ in range(50):
                xn = np.clip(x + t * d, lower, upper)
                step = xn - x
                if not np.any(step):
                    break
                fn = f(xn)
                if fn <= fx + 1e-4 * (g @ step) and fn <= fx:
                    accepted = True
                    break
                t *= 0.5
            if accepted or attempt == 1:
                break
            # retry along the scaled steepest-descent direction
            H = np.eye(k) / max(1.0, np.abs(pg).max())
            d = -H @ pg

        if not accepted:
            if _on_implicit_constraint(f, x, pg, lower, upper):
                converged, message = True, "stopped on an implicit constraint"
            else:
                converged = np.abs(pg).max() < 1e-3
                message = "no improving step found"
            break

        gn = fd_gradient(f, xn, fn, lower, upper)
        s = xn - x
        y = gn - g
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if it == 1:
                H = np.eye(k) * (sy / (y @ y))
            rho = 1.0 / sy
            Hy = H @ y
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho * rho * (y @ Hy) + rho) * np.outer(s, s)

        rel = (fx - fn) / max(abs(fx), 1e-12)
        x, fx, g = xn, fn, gn
        trace.append(fx)
        small = small + 1 if rel < tol else 0
        if small >= 5:
            converged, message = True, "relative improvement below tol"
            break

    return OptResult(
        argmin=x,
        value=fx,
        iterations=it,
        converged=converged,
        trace=trace,
        message=message,
        nfev=counter[0],
        start=problem.start.copy(),
    )


def perturbed_starts(
    default: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    n_starts: int,
    seed: int,
    scale: float = 0.1,
) -> list[np.ndarray]:
    """Default start plus ``n_starts - 1`` seeded perturbations of it, kept inside the box."""
    default = np.asarray(default, dtype=float)
    rng = np.random.default_rng(seed)
    starts = [default.copy()]
    for _ in range(n_starts - 1):
        jitter = scale * np.maximum(np.abs(default), 0.05) * rng.standard_normal(default.size)
        lo = np.where(np.isfinite(lower), lower, -np.inf)
        hi = np.where(np.isfinite(upper), upper, np.inf)
        span = np.where(np.isfinite(hi - lo), 1e-6 * (hi - lo), 0.0)
        starts.append(np.clip(default + jitter, lo + span, hi - span))
    return starts


def minimize_multistart(
    objective: Callable[[np.ndarray], float],
    starts: Sequence[np.ndarray],
    lower,
    upper,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    seed: int | None = None,
) -> OptResult:
    """Run :func:`minimize` from every start and keep the best objective.

    Starts at which the objective is not finite are skipped; if all are, the
    error from the first start is re-raised.
    """
    best: OptResult | None = None
    first_error: Exception | None = None
    for i, x0 in enumerate(starts):
        try:
            res = minimize(OptProblem(objective, lower, upper, x0), tol=tol, max_iter=max_iter)
        except NonFiniteObjectiveError as exc:
            first_error = first_error or exc
            logger.debug("start %d skipped: %s", i, exc)
            continue
        res.seed = seed
        logger.debug("start %d: value %.6g after %d iterations", i, res.value, res.iterations)
        if best is None or res.value < best.value:
            best = res
    if best is None:
        assert first_error is not None
        raise first_error
    return best


def _check_symmetric(S: np.ndarray, tol: float) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise AsymmetryError("matrix must be square")
    scale = max(1.0, np.abs(S).max())
    if np.abs(S - S.T).max() > tol * scale:
        raise AsymmetryError("matrix is not symmetric")
    return S


def cholesky(S: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; raises :class:`PDFailure` when S is not positive definite."""
    S = _check_symmetric(S, 1e-10)
    try:
        return np.linalg.cholesky(0.5 * (S + S.T))
    except np.linalg.LinAlgError as exc:
        raise PDFailure(str(exc)) from None


def is_pd(S: np.ndarray) -> bool:
    try:
        cholesky(S)
    except PDFailure:
        return False
    return True


def sym_eigen(W: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (Q, lam) with Q @ W @ Q.T = diag(lam), rows of Q orthonormal, lam ascending."""
    W = _check_symmetric(W, 1e-8)
    lam, V = np.linalg.eigh(0.5 * (W + W.T))
    return V.T, lam


def solve_linear(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError("A must be square")
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularMatrixError("matrix is singular to working precision", cond)
    return scipy.linalg.solve(A, b)


def tail_prob(dist: str, x: float, *params: float) -> float:
    """Tail probability used by the package's tests.

    ``"normal"`` is two-sided, P(|Z| > |x|); ``"chi2"`` and ``"f"`` are upper
    tails, P(X > x), with degrees of freedom passed positionally.
    """
    if dist == "normal":
        if params:
            raise DomainError("normal takes no parameters")
        return float(min(1.0, 2.0 * stats.norm.sf(abs(x))))
    if dist == "chi2":
        (df,) = params
        if df <= 0:
            raise DomainError("chi2 degrees of freedom must be positive")
        return float(stats.chi2.sf(x, df)) if x > 0 else 1.0
    if dist == "f":
        d1, d2 = params
        if d1 <= 0 or d2 <= 0:
            raise DomainError("F degrees of freedom must be positive")
        return float(stats.f.sf(x, d1, d2)) if x > 0 else 1.0
    raise DomainError(f"unknown distribution {dist!r}")
