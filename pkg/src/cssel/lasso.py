"""Lasso solvers with L2 column scaling.

The objective throughout is

    min_b  (1/2n) || y - sum_j (X_j / ||X_j||_2) b_j ||^2  +  lambda ||b||_1

i.e. the penalty applies to coefficients of norm-scaled columns.  Columns are
scaled internally; every public result reports coefficients on the original
column basis (divide by the norm), so predictions are plain X @ coef.  No
centering happens unless the DataSet carries center=True, in which case X and
y are mean-centered first and coefficients apply to centered columns.

Two independent routes solve the same problem: a homotopy that tracks the
exact piecewise-linear solution path in lambda (knot by knot), and cyclic
coordinate descent at a fixed lambda.  They are kept separate so each can
certify the other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import DataSet

KKT_TOL = 1e-8
CD_TOL = 1e-10
TIE_REL = 1e-12


class PathTie(Exception):
    """Two features would enter the path at numerically identical lambda."""

    def __init__(self, lam: float, features: tuple[int, ...]):
        self.lam = float(lam)
        self.features = tuple(sorted(int(f) for f in features))
        super().__init__(
            f"path tie at lambda={self.lam!r}: features {self.features} "
            "enter at numerically identical knots"
        )


class ConvergenceFailure(Exception):
    """Coordinate descent ran out of iterations."""

    def __init__(self, residual: float, iterations: int):
        self.residual = float(residual)
        self.iterations = int(iterations)
        super().__init__(
            f"no convergence after {iterations} sweeps; "
            f"KKT residual {residual:.3e}"
        )


class InsufficientPath(Exception):
    """The path saturated before the requested number of entries."""


class RankDeficient(Exception):
    """A least-squares design has linearly dependent columns."""

    def __init__(self, columns: tuple[int, ...]):
        self.columns = tuple(int(c) for c in columns)
        super().__init__(f"design is rank deficient; dependent columns {self.columns}")


def _scaled_view(data: DataSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (U, y, norms) with U the norm-scaled (optionally centered) X."""
    X, y = data.X, data.y
    if data.center:
        X = X - X.mean(axis=0)
        y = y - y.mean()
    norms = np.sqrt(np.einsum("ij,ij->j", X, X))
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise ValueError(f"columns {bad.tolist()} have zero norm; cannot scale")
    return X / norms, y, norms


def lambda_max(data: DataSet) -> float:
    """Smallest lambda with all-zero solution: max_j |X_j^T y| / (n ||X_j||)."""
    U, y, _ = _scaled_view(data)
    return float(np.max(np.abs(U.T @ y)) / data.n)


def kkt_residual(data: DataSet, coefficients: np.ndarray, lam: float) -> float:
    """Max violation of the subgradient conditions at `coefficients`.

    For active j the stationarity gap |X_j^T r / (n||X_j||) - lam*sign(b_j)|,
    for inactive j the excess max(0, |X_j^T r| / (n||X_j||) - lam).
    """
    U, y, norms = _scaled_view(data)
    b = np.asarray(coefficients, dtype=float)
    c = U.T @ (y - U @ (b * norms)) / data.n
    active = b != 0.0
    viol = np.maximum(np.abs(c) - lam, 0.0)
    viol[active] = np.abs(c[active] - lam * np.sign(b[active]))
    return float(viol.max()) if viol.size else 0.0


@dataclass(frozen=True)
class LassoPath:
    """Exact solution path, recorded knot by knot.

    knots: (lambda, event, feature) with event "enter" or "drop", lambdas
    strictly decreasing.  knot_coefs holds the coefficient vector (original
    basis) at each knot.  The final linear segment runs from the last knot
    down to terminal_lambda with terminal_coefs there; terminal_lambda is 0
    when the path ran to the unpenalized end, else the path stopped early
    (saturation or max_steps) and queries below the last knot are invalid.
    """

    knots: tuple[tuple[float, str, int], ...]
    knot_coefs: np.ndarray
    terminal_lambda: float
    terminal_coefs: np.ndarray
    scaling: np.ndarray
    n: int
    completed: bool
    saturated: bool

    @property
    def lambda_1(self) -> float:
        return self.knots[0][0] if self.knots else 0.0

    def entry_order(self) -> list[int]:
        """Features by first entry, drops and re-entries ignored."""
        seen: list[int] = []
        for _, event, j in self.knots:
            if event == "enter" and j not in seen:
                seen.append(j)
        return seen

    def coefficients_at(self, lam: float) -> np.ndarray:
        """Interpolate the exact solution at a given lambda (original basis)."""
        if lam < 0:
            raise ValueError("lambda must be nonnegative")
        p = self.knot_coefs.shape[1] if self.knots else self.terminal_coefs.shape[0]
        if lam < self.terminal_lambda:
            raise ValueError(
                f"lambda={lam!r} below the computed path end {self.terminal_lambda!r}"
            )
        if not self.knots or lam >= self.knots[0][0]:
            return np.zeros(p)
        lams = [k[0] for k in self.knots]
        for i in range(len(lams) - 1):
            if lam >= lams[i + 1]:
                lo, hi = lams[i + 1], lams[i]
                t = 0.0 if hi == lo else (hi - lam) / (hi - lo)
                return (1 - t) * self.knot_coefs[i] + t * self.knot_coefs[i + 1]
        if lam >= self.terminal_lambda:
            lo, hi = self.terminal_lambda, lams[-1]
            t = 1.0 if hi == lo else (hi - lam) / (hi - lo)
            return (1 - t) * self.knot_coefs[-1] + t * self.terminal_coefs
        raise ValueError(
            f"lambda={lam!r} below the computed path end {self.terminal_lambda!r}"
        )


def fit_lasso_path(
    data: DataSet, max_steps: int | None = None, stop_lambda: float = 0.0
) -> LassoPath:
    """Homotopy: track every knot of the exact lasso path from lambda_1 down.

    On each segment the active-set coefficients are linear in lambda; the
    next knot is the largest lambda at which an inactive feature's
    correlation reaches the boundary (enter) or an active coefficient hits
    zero (drop).  Ties between two would-be entrants raise PathTie.
    stop_lambda truncates the path once every remaining event lies below it;
    coefficients_at stays exact down to the truncation point.
    """
    if max_steps is not None and max_steps < 1:
        raise ValueError("max_steps must be positive")
    if stop_lambda < 0:
        raise ValueError("stop_lambda must be nonnegative")
    U, y, norms = _scaled_view(data)
    n, p = U.shape
    c0 = U.T @ y
    mu1 = float(np.max(np.abs(c0)))
    stop_mu = stop_lambda * n

    zeros = np.zeros(p)
    if mu1 <= stop_mu:
        return LassoPath(
            knots=(), knot_coefs=np.zeros((0, p)), terminal_lambda=stop_lambda,
            terminal_coefs=zeros, scaling=norms, n=n,
            completed=mu1 == 0.0, saturated=False,
        )
    if mu1 == 0.0:
        return LassoPath(
            knots=(), knot_coefs=np.zeros((0, p)), terminal_lambda=0.0,
            terminal_coefs=zeros, scaling=norms, n=n, completed=True,
            saturated=False,
        )

    top = np.flatnonzero(np.abs(c0) >= mu1 * (1.0 - TIE_REL))
    if top.size > 1:
        raise PathTie(mu1 / n, tuple(top))
    j1 = int(top[0])

    knots: list[tuple[float, str, int]] = [(mu1 / n, "enter", j1)]
    knot_coefs: list[np.ndarray] = [zeros.copy()]
    active: list[int] = [j1]
    signs: dict[int, float] = {j1: float(np.sign(c0[j1]))}
    mu_cur = mu1
    last_dropped = -1
    saturated = False
    completed = False
    terminal_lambda = mu1 / n
    terminal_coefs = zeros.copy()
    # More than n active features would make the Gram factor singular; with
    # n > p the loop instead ends when no candidate events remain.
    max_active = n

    while True:
        if max_steps is not None and len(knots) >= max_steps:
            break
        A = np.array(active)
        UA = U[:, A]
        sA = np.array([signs[j] for j in active])
        G = UA.T @ UA
        try:
            cho = scipy.linalg.cho_factor(G)
        except scipy.linalg.LinAlgError:
            saturated = True
            break
        v = scipy.linalg.cho_solve(cho, UA.T @ y)
        d = scipy.linalg.cho_solve(cho, sA)
        # beta_A(mu) = v - mu*d on the scaled basis for mu in (mu_next, mu_cur]
        r0 = y - UA @ v
        q = UA @ d
        upper = mu_cur * (1.0 - TIE_REL)

        inactive = np.array([j for j in range(p) if j not in signs], dtype=int)
        entry: list[tuple[float, int, float]] = []
        if inactive.size and len(active) < max_active:
            a = U[:, inactive].T @ r0
            g = U[:, inactive].T @ q
            # A just-dropped feature touches the boundary exactly at its drop
            # knot, so its equations have a spurious root there; a genuine
            # re-entry further down the same segment must still be kept.
            reentry_cut = mu_cur * (1.0 - 1e-9)
            for sgn in (1.0, -1.0):
                denom = sgn - g
                ok = np.abs(denom) > 1e-12
                with np.errstate(divide="ignore", invalid="ignore"):
                    cand = np.where(ok, a / denom, -1.0)
                for idx in np.flatnonzero((cand > 0.0) & (cand < upper) & ok):
                    j = int(inactive[idx])
                    if j == last_dropped and cand[idx] >= reentry_cut:
                        continue
                    entry.append((float(cand[idx]), j, sgn))

        drops: list[tuple[float, int]] = []
        for pos, j in enumerate(active):
            dj = d[pos]
            if dj != 0.0:
                cand = v[pos] / dj
                if 0.0 < cand < upper:
                    drops.append((float(cand), j))

        if not entry and not drops:
            terminal_lambda = 0.0
            terminal_coefs = zeros.copy()
            terminal_coefs[A] = v / norms[A]
            completed = True
            break

        best_entry = max(entry, default=None, key=lambda t: t[0])
        best_drop = max(drops, default=None, key=lambda t: t[0])
        if best_entry is not None:
            tied = {j for mu, j, _ in entry
                    if abs(mu - best_entry[0]) <= TIE_REL * best_entry[0]}
            if len(tied) > 1:
                raise PathTie(best_entry[0] / n, tuple(tied))

        # Drops take precedence at numerically equal knots (measure-zero case).
        if best_drop is not None and (
            best_entry is None or best_drop[0] >= best_entry[0]
        ):
            mu_next, j_ev, event = best_drop[0], best_drop[1], "drop"
        else:
            mu_next, j_ev, event = best_entry[0], best_entry[1], "enter"

        if mu_next <= stop_mu:
            # Every remaining event lies below the stop point; the current
            # segment is exact there, so end the path at stop_lambda.
            terminal_lambda = stop_lambda
            terminal_coefs = zeros.copy()
            terminal_coefs[A] = (v - stop_mu * d) / norms[A]
            break

        beta = zeros.copy()
        beta[A] = (v - mu_next * d) / norms[A]
        if event == "drop":
            beta[j_ev] = 0.0
            active.remove(j_ev)
            del signs[j_ev]
            last_dropped = j_ev
        else:
            active.append(j_ev)
            signs[j_ev] = best_entry[2]
            last_dropped = -1
        knots.append((mu_next / n, event, j_ev))
        knot_coefs.append(beta)
        mu_cur = mu_next
        terminal_lambda = mu_next / n
        terminal_coefs = beta
        if event == "enter" and len(active) >= max_active:
            saturated = True
            break

    return LassoPath(
        knots=tuple(knots),
        knot_coefs=np.array(knot_coefs),
        terminal_lambda=terminal_lambda,
        terminal_coefs=terminal_coefs,
        scaling=norms,
        n=n,
        completed=completed,
        saturated=saturated,
    )


def select_first_k(path: LassoPath, k: int) -> list[int]:
    """The first k distinct features to enter the path, in entry order."""
    if k < 1:
        raise ValueError("k must be positive")
    order = path.entry_order()
    if len(order) < k:
        raise InsufficientPath(
            f"path has {len(order)} distinct entries, {k} requested"
        )
    return order[:k]


@dataclass(frozen=True)
class LassoFit:
    """Solution at one fixed lambda (coefficients on the original basis)."""

    lam: float
    coefficients: np.ndarray
    support: frozenset[int]
    iterations: int
    kkt: float


def _cd_solve(
    U: np.ndarray,
    y: np.ndarray,
    G: np.ndarray,
    c: np.ndarray,
    mu: float,
    beta: np.ndarray,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, int]:
    """Cyclic coordinate descent at penalty mu, warm-started from beta.

    Sweeps over the active set until stable, then over all coordinates; done
    when a full sweep moves no coefficient by more than tol.  grad tracks
    c - G @ beta incrementally.
    """
    p = beta.shape[0]
    grad = c - G @ beta if beta.any() else c.copy()
    diag = np.diag(G)
    it = 0

    def sweep(coords) -> float:
        nonlocal grad
        worst = 0.0
        for j in coords:
            bj = beta[j]
            z = grad[j] + diag[j] * bj
            nb = np.sign(z) * max(abs(z) - mu, 0.0) / diag[j]
            if nb != bj:
                grad -= G[:, j] * (nb - bj)
                beta[j] = nb
                delta = abs(nb - bj)
                if delta > worst:
                    worst = delta
        return worst

    all_coords = range(p)
    while it < max_iter:
        it += 1
        if sweep(all_coords) <= tol:
            return beta, it
        while it < max_iter:
            it += 1
            act = np.flatnonzero(beta)
            if sweep(act) <= tol:
                break
    return beta, it


def fit_lasso_at(
    data: DataSet,
    lam: float,
    tol: float = CD_TOL,
    max_iter: int = 10000,
    kkt_tol: float = KKT_TOL,
) -> LassoFit:
    """Coordinate-descent solution at a fixed lambda."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    U, y, norms = _scaled_view(data)
    n, p = U.shape

    if lam == 0.0:
        beta, *_ = np.linalg.lstsq(U, y, rcond=None)
        iterations = 0
    else:
        G = U.T @ U
        c = U.T @ y
        beta, iterations = _cd_solve(
            U, y, G, c, n * lam, np.zeros(p), tol, max_iter
        )
    coef = beta / norms
    resid = kkt_residual(data, coef, lam)
    if resid > kkt_tol:
        raise ConvergenceFailure(resid, iterations)
    return LassoFit(
        lam=float(lam),
        coefficients=coef,
        support=frozenset(np.flatnonzero(coef).tolist()),
        iterations=iterations,
        kkt=resid,
    )


def default_lambda_grid(data: DataSet, points: int = 100, min_ratio: float = 1e-3) -> np.ndarray:
    """Log-spaced grid from lambda_max down to lambda_max * min_ratio."""
    lam1 = lambda_max(data)
    if lam1 == 0.0:
        return np.array([0.0])
    return np.geomspace(lam1, lam1 * min_ratio, points)


def cross_validate_lambda(
    data: DataSet,
    folds: int = 10,
    grid: np.ndarray | None = None,
    seed: int = 0,
    stream: int = 0,
) -> float:
    """Pick the grid lambda with the lowest held-out squared error.

    Rows are shuffled once (seeded), split into `folds` chunks.  Each training
    fold is solved by one homotopy path truncated at the bottom of the grid,
    and every grid point is scored off that path; a fold whose path cannot
    cover the grid (a knot tie, or saturation above the smallest lambda)
    falls back to warm-started coordinate descent along the grid.  Ties in
    the pooled held-out error break toward the larger lambda.  `stream`
    separates shuffle streams when several CV runs share one seed.
    """
    from .rng import DOMAIN_CV, stream_rng

    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > data.n:
        raise ValueError(f"{folds} folds exceed {data.n} rows")
    if grid is None:
        grid = default_lambda_grid(data)
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty lambda grid")
    if grid.size > 1 and not np.all(np.diff(grid) < 0):
        raise ValueError("grid must be strictly decreasing")
    if grid[-1] < 0:
        raise ValueError("negative lambda in grid")

    perm = stream_rng(seed, DOMAIN_CV, stream).permutation(data.n)
    chunks = np.array_split(perm, folds)
    sq_err = np.zeros(grid.size)
    for chunk in chunks:
        val = np.sort(chunk)
        train = np.sort(np.setdiff1d(perm, chunk, assume_unique=True))
        Xt, yt = data.X[train], data.y[train]
        Xv, yv = data.X[val], data.y[val]
        if data.center:
            x_off, y_off = Xt.mean(axis=0), yt.mean()
        else:
            x_off, y_off = np.zeros(data.p), 0.0
        Xc = Xt - x_off
        yc = yt - y_off
        norms = np.sqrt(np.einsum("ij,ij->j", Xc, Xc))
        if np.any(norms == 0.0):
            raise ValueError("zero-norm column in a CV training fold")

        fold = DataSet(X=Xt, y=yt, center=data.center)
        try:
            path = fit_lasso_path(fold, stop_lambda=float(grid[-1]))
        except PathTie:
            path = None
        covered = path is not None and (
            path.completed or path.terminal_lambda <= grid[-1]
        )
        if covered:
            for i, lam in enumerate(grid):
                pred = (Xv - x_off) @ path.coefficients_at(lam) + y_off
                sq_err[i] += float(np.sum((yv - pred) ** 2))
            continue

        Ut = Xc / norms
        G = Ut.T @ Ut
        c = Ut.T @ yc
        beta = np.zeros(data.p)
        for i, lam in enumerate(grid):
            if lam == 0.0:
                beta, *_ = np.linalg.lstsq(Ut, yc, rcond=None)
            else:
                beta, _ = _cd_solve(
                    Ut, yc, G, c, len(train) * lam, beta, CD_TOL, 10000
                )
            pred = (Xv - x_off) @ (beta / norms) + y_off
            sq_err[i] += float(np.sum((yv - pred) ** 2))
    return float(grid[int(np.argmin(sq_err))])


def ols_fit(
    data: DataSet, support: list[int] | tuple[int, ...]
) -> tuple[np.ndarray, float]:
    """Least squares of y on the listed columns plus an intercept.

    Returns (coefficients in support order, intercept).  Linearly dependent
    columns raise RankDeficient naming them.
    """
    support = [int(j) for j in support]
    for j in support:
        if not 0 <= j < data.p:
            raise ValueError(f"column {j} out of range for p={data.p}")
    if len(support) >= data.n:
        raise ValueError(
            f"{len(support)} columns with only {data.n} rows; need #columns < n"
        )
    cols = data.X[:, support] if support else np.zeros((data.n, 0))
    design = np.column_stack([np.ones(data.n), cols])
    coef, offending = _ols_solve(design, data.y)
    if offending is not None:
        raise RankDeficient(tuple(support[k - 1] for k in offending if k > 0))
    return coef[1:], float(coef[0])


def _ols_solve(
    design: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, tuple[int, ...] | None]:
    """Least squares with rank diagnosis via pivoted QR.

    Returns (coefficients, None) on full rank, else (zeros, design-column
    indices past the numerical rank in pivot order).
    """
    n, m = design.shape
    if m == 0:
        return np.zeros(0), None
    _, R, piv = scipy.linalg.qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(n, m) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < m:
        return np.zeros(m), tuple(int(k) for k in piv[rank:])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return coef, None
