"""Per-node objective functions, their curvature constants, and local solvers.

Each node carries a strongly convex, smooth function.  Built-in kinds are
quadratic (``||x - a||^2``) and ridge-regularized logistic loss; arbitrary
smooth objectives can be plugged in with explicit value/gradient/Hessian
callables and curvature constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteError, SolverDivergence, ValidationError
from .graph import Graph

__all__ = [
    "LocalObjective",
    "Quadratic",
    "LogisticRidge",
    "CustomSmooth",
    "ProblemInstance",
    "grad",
    "local_x_update",
    "centralized_solve",
]

_ARMIJO_C = 1e-4
_MAX_HALVINGS = 50
_SUBPROBLEM_TOL = 1e-10
_CENTRAL_TOL = 1e-12


class LocalObjective:
    """Interface of a node objective: value, gradient, Hessian, and the
    strong-convexity / gradient-Lipschitz constants ``nu`` and ``L``."""

    kind: str
    dim: int
    nu: float
    L: float

    def value(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def grad(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def hess(self, x):  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Quadratic(LocalObjective):
    """f(x) = ||x - target||^2, so nu = L = 2."""

    target: np.ndarray
    kind: str = field(default="quadratic", init=False)

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.target, dtype=np.float64))
        if t.ndim != 1:
            raise ValidationError("quadratic target must be a vector")
        object.__setattr__(self, "target", t)

    @property
    def dim(self):
        return self.target.shape[0]

    nu = 2.0
    L = 2.0

    def value(self, x):
        d = x - self.target
        return float(d @ d)

    def grad(self, x):
        return 2.0 * (x - self.target)

    def hess(self, x):
        return 2.0 * np.eye(self.dim)


@dataclass(frozen=True, eq=False)
class LogisticRidge(LocalObjective):
    """Logistic loss over (features, labels in {-1,+1}) plus (mu/2)||x||^2.

    nu = mu and L = mu + lambda_max(features^T features) / 4.
    """

    features: np.ndarray
    labels: np.ndarray
    mu: float
    kind: str = field(default="logistic-regularized", init=False)

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        y = np.asarray(self.labels, dtype=np.float64).ravel()
        if F.shape[0] != y.shape[0]:
            raise ValidationError("features and labels disagree on sample count")
        if not set(np.unique(y)) <= {-1.0, 1.0}:
            raise ValidationError("labels must be in {-1, +1}")
        if self.mu <= 0:
            raise ValidationError("ridge weight mu must be positive")
        object.__setattr__(self, "features", F)
        object.__setattr__(self, "labels", y)

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def nu(self):
        return float(self.mu)

    @property
    def L(self):
        gram_norm = float(np.linalg.eigvalsh(self.features.T @ self.features).max())
        return float(self.mu) + gram_norm / 4.0

    def _margins(self, x):
        return self.labels * (self.features @ x)

    def value(self, x):
        m = self._margins(x)
        # log(1 + exp(-m)) evaluated stably
        loss = np.logaddexp(0.0, -m).sum()
        return float(loss + 0.5 * self.mu * (x @ x))

    def grad(self, x):
        m = self._margins(x)
        s = 1.0 / (1.0 + np.exp(m))  # sigma(-m)
        return -(self.features * (self.labels * s)[:, None]).sum(axis=0) + self.mu * x

    def hess(self, x):
        m = self._margins(x)
        s = 1.0 / (1.0 + np.exp(-m))
        w = s * (1.0 - s)
        return (self.features * w[:, None]).T @ self.features + self.mu * np.eye(self.dim)


@dataclass(frozen=True, eq=False)
class CustomSmooth(LocalObjective):
    """User-supplied smooth objective with declared curvature constants."""

    dim: int
    nu: float
    L: float
    value_fn: callable
    grad_fn: callable
    hess_fn: callable
    kind: str = field(default="custom-smooth", init=False)

    def __post_init__(self):
        if self.nu <= 0 or self.L < self.nu:
            raise ValidationError("need 0 < nu <= L")

    def value(self, x):
        return float(self.value_fn(x))

    def grad(self, x):
        return np.asarray(self.grad_fn(x), dtype=np.float64)

    def hess(self, x):
        return np.asarray(self.hess_fn(x), dtype=np.float64)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """A graph plus one objective per node; nu/L are the global extremes."""

    graph: Graph
    objectives: tuple

    def __post_init__(self):
        objs = tuple(self.objectives)
        if len(objs) != self.graph.num_nodes:
            raise ValidationError(
                f"{len(objs)} objectives for {self.graph.num_nodes} nodes")
        dims = {o.dim for o in objs}
        if len(dims) != 1:
            raise ValidationError(f"objectives disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "objectives", objs)

    @property
    def num_nodes(self):
        return self.graph.num_nodes

    @property
    def dim(self):
        return self.objectives[0].dim

    @property
    def nu(self):
        return min(o.nu for o in self.objectives)

    @property
    def L(self):
        return max(o.L for o in self.objectives)

    def is_quadratic(self):
        return all(o.kind == "quadratic" for o in self.objectives)

    def targets(self):
        """(N, d) array of quadratic targets; only valid for quadratic instances."""
        if not self.is_quadratic():
            raise ValidationError("targets() requires an all-quadratic instance")
        return np.array([o.target for o in self.objectives])


def grad(obj: LocalObjective, x) -> np.ndarray:
    """Exact gradient of ``obj`` at ``x``; rejects non-finite input/output."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("gradient requested at a non-finite point")
    g = obj.grad(x)
    if not np.all(np.isfinite(g)):
        raise NonFiniteError("objective returned a non-finite gradient")
    return g


def _newton(value, gradient, hessian, x0, tol, max_iter=200):
    """Damped Newton with Armijo backtracking (c = 1e-4, halving)."""
    x = np.array(x0, dtype=np.float64)
    for _ in range(max_iter):
        g = gradient(x)
        if np.linalg.norm(g) <= tol:
            return x
        H = hessian(x)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError as exc:
            raise SolverDivergence(f"singular Hessian: {exc}") from exc
        f0 = value(x)
        slope = float(g @ step)
        # allowance for value-level rounding; without it the Armijo test
        # rejects near-converged full steps whose true decrease is below eps
        fuzz = 1e-14 * (1.0 + abs(f0))
        t = 1.0
        for _ in range(_MAX_HALVINGS):
            if value(x + t * step) <= f0 + _ARMIJO_C * t * slope + fuzz:
                break
            t *= 0.5
        else:
            raise SolverDivergence("line search failed 50 times")
        x = x + t * step
    g = gradient(x)
    if np.linalg.norm(g) <= tol:
        return x
    raise SolverDivergence(f"Newton stalled with gradient norm {np.linalg.norm(g):.3e}")


def local_x_update(obj: LocalObjective, lambda_sum, neighbor_means, rho: float):
    """Minimize ``f(x) + 2 lambda_sum^T x + rho sum_p ||x - m_p||^2``.

    ``neighbor_means`` holds one midpoint per neighbor.  Quadratic
    objectives use the closed form; everything else runs damped Newton to
    gradient norm 1e-10.  The factor 2 on the linear dual term is part of
    the update's definition, not an accident.
    """
    if rho <= 0:
        raise ValidationError("rho must be positive")
    lam = np.asarray(lambda_sum, dtype=np.float64)
    means = [np.asarray(m, dtype=np.float64) for m in neighbor_means]
    deg = len(means)
    m_sum = np.sum(means, axis=0) if deg else np.zeros(obj.dim)

    if obj.kind == "quadratic":
        return (2.0 * obj.target - 2.0 * lam + 2.0 * rho * m_sum) / (2.0 + 2.0 * rho * deg)

    def value(x):
        pen = sum(float((x - m) @ (x - m)) for m in means)
        return obj.value(x) + 2.0 * float(lam @ x) + rho * pen

    def gradient(x):
        return obj.grad(x) + 2.0 * lam + 2.0 * rho * (deg * x - m_sum)

    def hessian(x):
        return obj.hess(x) + 2.0 * rho * deg * np.eye(obj.dim)

    x0 = m_sum / deg if deg else np.zeros(obj.dim)
    return _newton(value, gradient, hessian, x0, _SUBPROBLEM_TOL)


def centralized_solve(p: ProblemInstance) -> np.ndarray:
    """Minimizer of the summed objective over a single shared variable.

    Newton iterations run until the summed gradient norm is at most 1e-12;
    uniqueness follows from strong convexity.
    """
    objs = p.objectives
    d = p.dim

    def value(x):
        return sum(o.value(x) for o in objs)

    def gradient(x):
        g = np.zeros(d)
        for o in objs:
            g += o.grad(x)
        return g

    def hessian(x):
        H = np.zeros((d, d))
        for o in objs:
            H += o.hess(x)
        return H

    return _newton(value, gradient, hessian, np.zeros(d), _CENTRAL_TOL)
