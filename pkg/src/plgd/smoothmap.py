"""Differentiable maps between weighted spaces and sampled regularity bounds.

A :class:`SmoothMap` exposes a value and a Jacobian (as a :class:`LinOp`
with adjoint).  The estimators in this module certify, by seeded sampling
over a ball:

* ``estimate_bj`` -- an upper bound K on the Jacobian operator norm,
* ``estimate_lj`` -- an upper bound L on the Lipschitz constant of the
  Jacobian in operator norm,
* ``estimate_uc`` -- a lower bound lam > 0 on the coercivity of J(x) J(x)*
  (uniform conditioning), or None when some sample is not coercive.

Sampled upper bounds are inflated by a safety factor (default 1.1), lower
bounds deflated (default 0.9); pass factor 1.0 to obtain the raw sampled
value.  Analytic constants can be supplied directly via
:class:`MapCertificate`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch
from .space import LinOp, SpaceVec, WeightedSpace, coercivity, op_norm

#: contract threshold for finite-difference agreement of correct Jacobians
FD_TOL = 1e-5


@dataclass(frozen=True, eq=False)
class SmoothMap:
    """A Frechet-differentiable map ``F: domain -> codomain``.

    ``value_fn`` and ``jac_fn`` act on raw coordinates; ``jac_fn`` must
    return a :class:`LinOp` whose adjoint is taken with respect to both
    weighted metrics.  ``linear_op`` is set when the map is known to be
    linear (it then equals the constant Jacobian), which downstream code
    uses for exact constants and closest-optimum computations.
    """

    domain: WeightedSpace
    codomain: WeightedSpace
    value_fn: Callable[[np.ndarray], np.ndarray]
    jac_fn: Callable[[np.ndarray], LinOp]
    linear_op: Optional[LinOp] = None
    name: str = ""

    def value(self, x) -> SpaceVec:
        out = np.asarray(self.value_fn(self.domain._coords(x)), dtype=float)
        return SpaceVec(self.codomain, out)

    def jacobian(self, x) -> LinOp:
        return self.jac_fn(self.domain._coords(x))

    @staticmethod
    def linear(op: LinOp, name: str = "linear") -> "SmoothMap":
        return SmoothMap(
            domain=op.domain,
            codomain=op.codomain,
            value_fn=op.apply_fn,
            jac_fn=lambda _x: op,
            linear_op=op,
            name=name,
        )

    @staticmethod
    def identity(space: WeightedSpace) -> "SmoothMap":
        return SmoothMap.linear(LinOp.identity(space), name="identity")


@dataclass(frozen=True, eq=False)
class Ball:
    """Closed ball ``{x : ||x - center|| <= radius}`` in a weighted space."""

    center: SpaceVec
    radius: float

    def __post_init__(self):
        if self.radius < 0.0:
            raise ValueError("ball radius must be non-negative")


def sample_ball(ball: Ball, n: int, rng: np.random.Generator) -> list[np.ndarray]:
    """n points uniform in the ball: gaussian direction, radius ~ r u^(1/dim)."""
    space = ball.center.space
    out = []
    for _ in range(n):
        z = rng.standard_normal(space.dim)
        nz = space.norm(z)
        if nz == 0.0:
            z = np.ones(space.dim)
            nz = space.norm(z)
        r = ball.radius * rng.uniform() ** (1.0 / space.dim)
        out.append(ball.center.coords + (r / nz) * z)
    return out


@dataclass(frozen=True)
class CertValue:
    """A certified constant with its provenance.

    ``provenance`` is "analytic" for exact constants and "sampled" for
    seeded-sampling estimates; sampled values record the sample count and
    the safety factor that was applied.
    """

    value: float
    provenance: str = "analytic"
    n_samples: Optional[int] = None
    factor: Optional[float] = None

    def as_dict(self) -> dict:
        d = {"value": self.value, "provenance": self.provenance}
        if self.provenance == "sampled":
            d["n_samples"] = self.n_samples
            d["factor"] = self.factor
        return d


@dataclass(frozen=True)
class MapCertificate:
    """Regularity constants of a map on a ball.

    K bounds the Jacobian operator norm, L its Lipschitz constant, lam
    (optional) is a coercivity lower bound for J J*; lam <= K^2 must hold.
    """

    K: CertValue
    L: CertValue
    lam: Optional[CertValue] = None

    def __post_init__(self):
        if self.K.value < 0 or self.L.value < 0:
            raise ValueError("K and L must be non-negative")
        if self.lam is not None:
            if self.lam.value <= 0:
                raise ValueError("lam must be positive when present")
            if self.lam.value > self.K.value**2 * (1 + 1e-9):
                raise ValueError(
                    f"inconsistent certificate: lam={self.lam.value} exceeds K^2={self.K.value**2}"
                )

    @property
    def provenance(self) -> str:
        tags = [self.K.provenance, self.L.provenance]
        if self.lam is not None:
            tags.append(self.lam.provenance)
        return "analytic" if all(t == "analytic" for t in tags) else "sampled"


def fd_check(f: SmoothMap, x, h: float = 1e-5) -> float:
    """Largest relative mismatch between Jacobian columns and central FD.

    For each coordinate direction e_k the column J(x) e_k is compared to
    ``(F(x + h e_k) - F(x - h e_k)) / 2h`` in the codomain norm, relative
    to the larger of the two column norms.  Columns much smaller than the
    overall Jacobian scale are compared absolutely against that scale.
    Correctly implemented maps score <= 1e-5; a Jacobian off by a factor c
    scores about |1 - 1/c|.
    """
    if not (1e-8 <= h <= 1e-2):
        raise ValueError("fd step h must lie in [1e-8, 1e-2]")
    xc = f.domain._coords(x)
    jac = f.jacobian(xc)
    cod = f.codomain
    cols = []
    for k in range(f.domain.dim):
        e = np.zeros(f.domain.dim)
        e[k] = 1.0
        jcol = jac.apply(e)
        fd = (f.value_fn(xc + h * e) - f.value_fn(xc - h * e)) / (2.0 * h)
        cols.append((cod.norm(fd - jcol), cod.norm(jcol), cod.norm(fd)))
    scale = max((max(nj, nf) for _, nj, nf in cols), default=0.0)
    floor = 1e-8 * (1.0 + scale)
    worst = 0.0
    for err, nj, nf in cols:
        denom = max(nj, nf)
        if denom < floor:
            worst = max(worst, err / (1.0 + scale))
        else:
            worst = max(worst, err / denom)
    return worst


def jacobian_norm(f: SmoothMap, x, tol: float = 1e-6) -> float:
    """Operator norm of the Jacobian at a single point."""
    return op_norm(f.jacobian(x), tol=tol)


def conditioning_at(f: SmoothMap, x) -> float:
    """Raw coercivity of ``J(x) J(x)*`` at a single point (can be <= 0)."""
    return coercivity(f.jacobian(x).gram())


def estimate_bj(
    f: SmoothMap,
    ball: Ball,
    n: int = 32,
    seed: int = 0,
    inflate: float = 1.1,
) -> float:
    """Sampled upper bound on ``||J(x)||`` over the ball (center included)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    pts = [ball.center.coords] + sample_ball(ball, n - 1, rng)
    worst = max(jacobian_norm(f, p) for p in pts)
    return inflate * worst


def _sample_pairs(ball: Ball, n_pairs: int, rng: np.random.Generator):
    """Pairs for difference quotients: alternately independent and local.

    Local pairs (x, x + eps * dir) probe the differential behaviour of the
    quotient near a point; independent pairs probe the secant behaviour.
    Coincident pairs are resampled.
    """
    space = ball.center.space
    eps = 1e-3 * ball.radius if ball.radius > 0 else 1e-3
    pairs = []
    k = 0
    while len(pairs) < n_pairs:
        if k % 2 == 0:
            x, y = sample_ball(ball, 2, rng)
        else:
            (x,) = sample_ball(ball, 1, rng)
            d = rng.standard_normal(space.dim)
            nd = space.norm(d)
            if nd == 0.0:
                continue
            y = x + (eps / nd) * d
            if space.norm(y - ball.center.coords) > ball.radius:
                y = x - (eps / nd) * d
        k += 1
        if space.norm(x - y) < 1e-12:
            continue
        pairs.append((x, y))
    return pairs


def estimate_lj(
    f: SmoothMap,
    ball: Ball,
    n_pairs: int = 32,
    seed: int = 0,
    inflate: float = 1.1,
) -> float:
    """Sampled upper bound on the Jacobian Lipschitz constant over the ball.

    Exactly zero for linear maps (the Jacobian difference is the zero
    operator at every pair).
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    if f.linear_op is not None:
        return 0.0
    rng = np.random.default_rng(seed)
    space = ball.center.space
    worst = 0.0
    for x, y in _sample_pairs(ball, n_pairs, rng):
        diff = f.jacobian(x) - f.jacobian(y)
        worst = max(worst, op_norm(diff) / space.norm(x - y))
    return inflate * worst


def estimate_uc(
    f: SmoothMap,
    ball: Ball,
    n: int = 32,
    seed: int = 0,
    deflate: float = 0.9,
) -> Optional[float]:
    """Sampled lower bound on the coercivity of ``J(x) J(x)*`` over the ball.

    Returns None (not certified) as soon as any sampled point fails to be
    coercive, which in particular happens whenever dim(domain) <
    dim(codomain).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    pts = [ball.center.coords] + sample_ball(ball, n - 1, rng)
    worst = np.inf
    for p in pts:
        lam = conditioning_at(f, p)
        if lam <= 0.0:
            return None
        worst = min(worst, lam)
    return deflate * worst


def certify(
    f: SmoothMap,
    ball: Ball,
    n: int = 32,
    seed: int = 0,
    inflate: float = 1.1,
    deflate: float = 0.9,
) -> MapCertificate:
    """Bundle sampled BJ/LJ/UC estimates into a :class:`MapCertificate`."""
    k = estimate_bj(f, ball, n=n, seed=seed, inflate=inflate)
    l = estimate_lj(f, ball, n_pairs=n, seed=seed + 1, inflate=inflate)
    lam = estimate_uc(f, ball, n=n, seed=seed + 2, deflate=deflate)
    k_cert = CertValue(k, "sampled", n, inflate)
    l_cert = (
        CertValue(0.0, "analytic")
        if f.linear_op is not None
        else CertValue(l, "sampled", n, inflate)
    )
    lam_cert = None if lam is None else CertValue(lam, "sampled", n, deflate)
    return MapCertificate(K=k_cert, L=l_cert, lam=lam_cert)
