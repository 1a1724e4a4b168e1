"""Linear regression fits (OLS, LASSO) and residual/score construction."""
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    intercept: bool = False

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError(f"X has shape {X.shape} but y has length {y.shape[0]}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        self.X = X
        self.y = y

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def q(self):
        return self.X.shape[1]

    def design(self):
        """Covariates, with a leading column of ones when the model has an intercept."""
        if self.intercept:
            return np.column_stack([np.ones(self.n), self.X])
        return self.X

    def subset(self, idx):
        return Dataset(self.X[idx], self.y[idx], self.intercept)


@dataclass
class FittedModel:
    theta_hat: np.ndarray
    estimator: str = "ols"
    lam: float = 0.0
    intercept: bool = False
    info: dict = field(default_factory=dict)

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        p = X.shape[1] + int(self.intercept)
        if p != self.theta_hat.shape[0]:
            raise ValueError(
                f"model has {self.theta_hat.shape[0]} coefficients, data implies {p}")
        if self.intercept:
            return self.theta_hat[0] + X @ self.theta_hat[1:]
        return X @ self.theta_hat


@dataclass
class ResidualBundle:
    residuals: np.ndarray
    G: np.ndarray
    fitted: np.ndarray


def fit_ols(data):
    """Least squares fit; raises :class:`DegenerateDataError` on a rank-deficient design."""
    D = data.design()
    n, p = D.shape
    if n < p:
        raise DegenerateDataError(f"OLS needs n >= {p} observations, got {n}")
    theta, _, rank, sv = np.linalg.lstsq(D, data.y, rcond=None)
    if rank < p or sv[-1] <= sv[0] * p * np.finfo(float).eps * 10:
        raise DegenerateDataError("design matrix is rank deficient")
    return FittedModel(theta, "ols", 0.0, data.intercept)


def _soft(a, lam):
    if a > lam:
        return a - lam
    if a < -lam:
        return a + lam
    return 0.0


def _cd_path(XtX, Xty, lambdas, tol=1e-10, max_sweeps=10_000, theta0=None):
    """Covariance-update coordinate descent along a decreasing lambda path.

    Solves ``0.5 * theta' XtX theta - Xty' theta + lam * ||theta||_1`` for each
    lambda (XtX, Xty already divided by n). Returns one row per lambda.
    """
    p = XtX.shape[0]
    theta = np.zeros(p) if theta0 is None else np.array(theta0, dtype=float)
    diag = np.diag(XtX).copy()
    out = np.empty((len(lambdas), p))
    for k, lam in enumerate(lambdas):
        grad = Xty - XtX @ theta
        for _ in range(max_sweeps):
            for j in range(p):
                if diag[j] <= 0.0:
                    continue
                old = theta[j]
                new = _soft(grad[j] + diag[j] * old, lam) / diag[j]
                if new != old:
                    grad -= XtX[:, j] * (new - old)
                    theta[j] = new
            # KKT violation drives the stopping rule
            active = theta != 0.0
            viol = np.where(active, np.abs(grad - lam * np.sign(theta)),
                            np.maximum(np.abs(grad) - lam, 0.0))
            if viol.max(initial=0.0) <= tol:
                break
        out[k] = theta
    return out


def lambda_max(data):
    D, y = _centered(data)
    return float(np.max(np.abs(D.T @ y)) / data.n)


def default_lambda_grid(data, num=50, ratio=1e-3):
    lmax = lambda_max(data)
    if lmax <= 0:
        return np.array([0.0])
    return np.geomspace(lmax, ratio * lmax, num)


def _centered(data):
    X, y = data.X, data.y
    if data.intercept:
        return X - X.mean(axis=0), y - y.mean()
    return X, y


def _lasso_fixed(data, lambdas, tol=1e-10):
    X, y = _centered(data)
    n = data.n
    path = _cd_path(X.T @ X / n, X.T @ y / n, lambdas, tol=tol)
    if data.intercept:
        b0 = data.y.mean() - path @ data.X.mean(axis=0)
        path = np.column_stack([b0, path])
    return path


def fit_lasso(data, lambda_grid=None, folds=5, lam=None, tol=1e-10):
    """LASSO by coordinate descent on ``(2n)^-1 ||y - X theta||^2 + lam ||theta||_1``.

    The penalty is chosen by ``folds``-fold cross-validation (contiguous folds)
    over ``lambda_grid`` unless ``lam`` is given. The intercept, if any, is not
    penalized.
    """
    if lam is not None:
        if lam < 0:
            raise ValueError("lambda must be nonnegative")
        theta = _lasso_fixed(data, [float(lam)], tol)[0]
        return FittedModel(theta, "lasso", float(lam), data.intercept)

    grid = default_lambda_grid(data) if lambda_grid is None else np.asarray(lambda_grid, float)
    if grid.size == 0:
        raise ValueError("lambda grid is empty")
    if np.any(grid < 0) or not np.all(np.isfinite(grid)):
        raise ValueError("lambda grid must hold finite nonnegative values")
    if folds < 2:
        raise ValueError("need at least two folds")
    grid = np.sort(grid)[::-1]
    n = data.n
    if n < folds:
        raise DegenerateDataError(f"{folds}-fold CV needs at least {folds} observations")

    cv_err = np.zeros(grid.size)
    for hold in np.array_split(np.arange(n), folds):
        keep = np.setdiff1d(np.arange(n), hold)
        train = data.subset(keep)
        path = _lasso_fixed(train, grid, tol=1e-7)
        D_hold = data.subset(hold).design()
        resid = data.y[hold][:, None] - D_hold @ path.T
        cv_err += np.sum(resid**2, axis=0)
    best = int(np.argmin(cv_err))
    # refit along the path up to the chosen penalty for warm starts
    theta = _lasso_fixed(data, grid[: best + 1], tol)[-1]
    return FittedModel(theta, "lasso", float(grid[best]), data.intercept,
                       info={"cv_error": cv_err / n, "lambda_grid": grid})


def fit(data, estimator="ols", **kwargs):
    if estimator == "ols":
        return fit_ols(data)
    if estimator == "lasso":
        return fit_lasso(data, **kwargs)
    raise ValueError(f"unknown estimator {estimator!r}")


def residuals(model, data):
    """Residuals ``y - fitted`` and the score matrix (the design, with ones if intercept).

    The derivative of the residual w.r.t. theta is ``-x``; the sign is dropped
    since the projector built from G is unchanged by it.
    """
    fitted = model.predict(data.X)
    if model.intercept != data.intercept:
        raise ValueError("intercept flag of model and data disagree")
    return ResidualBundle(data.y - fitted, data.design(), fitted)
