"""Scalar objectives with gradients, certified constants and sampled checks.

A :class:`ScalarObjective` is a differentiable ``f: H -> R`` on a weighted
space.  Its gradient is stored as the metric representer: the coordinate
array g with ``f(h + d) ~ f(h) + <g, d>_H`` in the weighted inner product.
Objectives optionally carry an analytic Lipschitz-gradient constant, a
Polyak-Lojasiewicz constant, the infimum ``f_star`` and (when unique and
known) the minimizer, which downstream bound checks consume.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import MissingCertificate, SolverCapExceeded
from .smoothmap import Ball, CertValue, SmoothMap, _sample_pairs, sample_ball
from .space import DENSE_EIG_CAP, LinOp, SpaceVec, WeightedSpace

#: points closer than this to optimal are excluded from PL ratios (0/0 hygiene)
PL_GAP_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class ScalarObjective:
    """A differentiable scalar function on a weighted space.

    Fields beyond the callables are metadata: ``L`` and ``lam`` are
    certified Lipschitz-gradient and PL constants (None when unknown),
    ``f_star`` the infimum over the whole space (None when unknown),
    ``f_star_attained`` records whether the infimum is attained, and
    ``minimizer`` the unique minimizer's coordinates when available.
    """

    space: WeightedSpace
    value_fn: Callable[[np.ndarray], float]
    grad_fn: Callable[[np.ndarray], np.ndarray]
    f_star: Optional[float] = None
    L: Optional[CertValue] = None
    lam: Optional[CertValue] = None
    minimizer: Optional[np.ndarray] = None
    f_star_attained: bool = True
    name: str = ""

    def value(self, h) -> float:
        return float(self.value_fn(self.space._coords(h)))

    def gradient(self, h) -> SpaceVec:
        g = np.asarray(self.grad_fn(self.space._coords(h)), dtype=float)
        return SpaceVec(self.space, g)

    def as_map(self) -> SmoothMap:
        """View the objective as a map into R, for finite-difference checks.

        The 1 x dim Jacobian row in coordinates is the weighted gradient
        pushed through the metric, so central differences of the value
        check the gradient representer exactly.
        """
        scalar = WeightedSpace.unit(1)

        def jac(x):
            g = self.grad_fn(x) * self.space.weights

            def apply_fn(u, g=g):
                return np.array([float(np.dot(g, u))])

            def adjoint_fn(v, g=g):
                return (v[0] * g) / self.space.weights

            return LinOp(self.space, scalar, apply_fn, adjoint_fn)

        return SmoothMap(
            domain=self.space,
            codomain=scalar,
            value_fn=lambda x: np.array([float(self.value_fn(x))]),
            jac_fn=jac,
            name=self.name or "objective",
        )

    def with_certs(self, **kwargs) -> "ScalarObjective":
        return replace(self, **kwargs)


def quadratic(space: WeightedSpace, a_mat, b=None, name: str = "quadratic") -> ScalarObjective:
    """The objective ``f(h) = 1/2 <h, A h> - <b, h>`` with exact constants.

    A must be self-adjoint positive semidefinite with respect to the
    weighted metric (for unit weights: a symmetric PSD matrix).  The
    Lipschitz-gradient constant is the largest eigenvalue, the PL constant
    the smallest nonzero one, and the infimum is attained at the minimum-
    norm solution of ``A h = b``.
    """
    a = np.asarray(a_mat, dtype=float)
    dim = space.dim
    if dim > DENSE_EIG_CAP:
        raise SolverCapExceeded(f"quadratic objective supports dim <= {DENSE_EIG_CAP}")
    b = np.zeros(dim) if b is None else np.asarray(b, dtype=float)

    d_half = np.sqrt(space.weights)
    sym = (a * d_half[:, None]) / d_half[None, :]
    if float(np.abs(sym - sym.T).max()) > 1e-10 * max(1.0, float(np.abs(sym).max())):
        raise ValueError("quadratic form must be self-adjoint in the weighted metric")
    sym = 0.5 * (sym + sym.T)
    eigs = np.linalg.eigvalsh(sym)
    if eigs[0] < -1e-10 * max(1.0, eigs[-1]):
        raise ValueError("quadratic form must be positive semidefinite")
    l_const = float(eigs[-1])
    positive = eigs[eigs > 1e-12 * max(1.0, eigs[-1])]
    lam_const = float(positive[0]) if positive.size else None

    # minimum-norm minimizer via the symmetrized pseudoinverse
    h_star = (np.linalg.pinv(sym, rcond=1e-12) @ (d_half * b)) / d_half

    def value_fn(h):
        return 0.5 * space.inner(h, a @ h) - space.inner(b, h)

    def grad_fn(h):
        return a @ h - b

    f_star = float(value_fn(h_star))
    return ScalarObjective(
        space=space,
        value_fn=value_fn,
        grad_fn=grad_fn,
        f_star=f_star,
        L=CertValue(l_const, "analytic"),
        lam=None if lam_const is None else CertValue(lam_const, "analytic"),
        minimizer=h_star,
        name=name,
    )


def estimate_lg(
    f: ScalarObjective,
    ball: Ball,
    n_pairs: int = 32,
    seed: int = 0,
    inflate: float = 1.1,
) -> float:
    """Sampled upper bound on the gradient Lipschitz constant over the ball."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    rng = np.random.default_rng(seed)
    space = f.space
    worst = 0.0
    for x, y in _sample_pairs(ball, n_pairs, rng):
        gx = f.grad_fn(x)
        gy = f.grad_fn(y)
        worst = max(worst, space.norm(gx - gy) / space.norm(x - y))
    return inflate * worst


@dataclass(frozen=True)
class PLReport:
    """Result of a sampled Polyak-Lojasiewicz check.

    ``lambda_hat`` is the smallest sampled ratio ``0.5 ||grad||^2 / gap``
    (None when no sample had a usable gap); ``violations`` lists the
    sampled points whose ratio fell below the requested constant.
    """

    lambda_hat: Optional[float]
    violations: list
    n_valid: int
    n_skipped: int


def check_pl(
    f: ScalarObjective,
    ball: Ball,
    n: int = 64,
    seed: int = 0,
    requested: Optional[float] = None,
) -> PLReport:
    """Probe ``0.5 ||grad f||^2 >= lam (f - f_star)`` by sampling the ball.

    Requires ``f_star``; sampled points with gap below ``PL_GAP_FLOOR``
    are skipped rather than divided by.
    """
    if f.f_star is None:
        raise MissingCertificate("check_pl requires a known f_star")
    rng = np.random.default_rng(seed)
    pts = [ball.center.coords] + sample_ball(ball, max(n - 1, 0), rng)
    lam_hat = None
    violations = []
    n_valid = 0
    n_skipped = 0
    for p in pts:
        gap = f.value_fn(p) - f.f_star
        if gap < PL_GAP_FLOOR:
            n_skipped += 1
            continue
        g = f.grad_fn(p)
        ratio = 0.5 * f.space.inner(g, g) / gap
        n_valid += 1
        lam_hat = ratio if lam_hat is None else min(lam_hat, ratio)
        if requested is not None and ratio < requested:
            violations.append({"point": np.asarray(p), "ratio": float(ratio)})
    return PLReport(lam_hat, violations, n_valid, n_skipped)


@dataclass(frozen=True)
class CorollaryReport:
    """Worst slacks of the two Lipschitz-gradient consequences on samples.

    ``taylor_slack`` is the worst value of
    ``|f(y) - f(x) - <grad f(x), y-x>| - L/2 ||y-x||^2`` over sampled pairs
    and ``grad_bound_slack`` the worst value of
    ``0.5 ||grad f(x)||^2 - L (f(x) - f_star)`` over sampled points
    (None when f_star is unknown).  Both are <= 0 when the constants hold.
    """

    taylor_slack: float
    grad_bound_slack: Optional[float]
    n_pairs: int
    n_points: int


def check_lg_corollaries(
    f: ScalarObjective,
    ball: Ball,
    n: int = 64,
    seed: int = 0,
) -> CorollaryReport:
    """Sample both quadratic-upper-bound consequences of the L constant."""
    if f.L is None:
        raise MissingCertificate("check_lg_corollaries requires a certified L")
    l_const = f.L.value
    rng = np.random.default_rng(seed)
    space = f.space

    taylor = -np.inf
    for x, y in _sample_pairs(ball, n, rng):
        lhs = abs(
            f.value_fn(y) - f.value_fn(x) - space.inner(f.grad_fn(x), y - x)
        )
        taylor = max(taylor, lhs - 0.5 * l_const * space.norm(y - x) ** 2)

    grad_bound = None
    if f.f_star is not None:
        grad_bound = -np.inf
        for p in [ball.center.coords] + sample_ball(ball, max(n - 1, 0), rng):
            g = f.grad_fn(p)
            grad_bound = max(
                grad_bound,
                0.5 * space.inner(g, g) - l_const * (f.value_fn(p) - f.f_star),
            )
    return CorollaryReport(float(taylor), grad_bound, n, n)
