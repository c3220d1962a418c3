"""Ready-to-run prototype problems: min over theta of the integral loss of
a model's outputs on a weighted dataset.

Each assembler pairs an induced map (model over data) with an integral
objective (integrand over the same data) and an initial point, yielding a
:class:`PrototypeProblem` the descent engine can consume directly.  Three
families are provided: supervised fitting, encoder/decoder training on a
data-times-noise product measure, and gradient-penalized critics on an
even real/generated mixture.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, InvalidConfig, InvalidDataset, NumericFailure
from .integrand import (
    Dataset,
    Integrand,
    SamplePoint,
    gan_integrand,
    integral_functional,
    negate,
    vae_integrand,
)
from .model import Model, induce, ntk_gram
from .objective import ScalarObjective
from .smoothmap import (
    Ball,
    CertValue,
    MapCertificate,
    SmoothMap,
    _sample_pairs,
    certify,
    fd_check,
)
from .space import SpaceVec, WeightedSpace

#: fallback trust-region radius before any constants are known
DEFAULT_BALL_RADIUS = 1e3


@dataclass(frozen=True, eq=False)
class PrototypeProblem:
    """An assembled instance of the composite learning problem."""

    name: str
    family: str
    F: SmoothMap
    f: ScalarObjective
    theta0: SpaceVec
    declared_ball: Ball
    model: Model
    data: Dataset

    def __post_init__(self):
        if not self.F.codomain.compatible(self.f.space):
            raise DimensionMismatch(
                "map codomain and objective space must coincide"
            )

    def with_ball(self, radius: float) -> "PrototypeProblem":
        return replace(self, declared_ball=Ball(self.theta0, radius))

    def gram(self, theta=None):
        theta = self.theta0.coords if theta is None else theta
        return ntk_gram(self.model, self.data, theta)


def _make_problem(name, family, model, data, iota_objective, ball_radius) -> PrototypeProblem:
    f_map = induce(model, data)
    theta0 = SpaceVec(WeightedSpace.unit(model.param_dim), model.init)
    radius = DEFAULT_BALL_RADIUS if ball_radius is None else float(ball_radius)
    return PrototypeProblem(
        name=name,
        family=family,
        F=f_map,
        f=iota_objective,
        theta0=theta0,
        declared_ball=Ball(theta0, radius),
        model=model,
        data=data,
    )


def supervised(
    model: Model,
    data: Dataset,
    iota: Integrand,
    ball_radius: Optional[float] = None,
) -> PrototypeProblem:
    """Supervised fitting: every input carries exactly one target.

    Duplicate inputs with conflicting targets are rejected (the loss is a
    function of the input only through its unique target).
    """
    seen: dict[bytes, SamplePoint] = {}
    for p in data.points:
        if p.target is None:
            raise InvalidDataset("supervised data requires a target on every point")
        key = np.ascontiguousarray(p.x).tobytes()
        prev = seen.get(key)
        if prev is not None:
            same = (
                prev.target == p.target
                if isinstance(p.target, (int, np.integer))
                else np.array_equal(prev.target_array(), p.target_array())
            )
            if not same:
                raise InvalidDataset(
                    f"conflicting targets for duplicated input {p.x.tolist()}"
                )
        seen[key] = p
    return _make_problem(
        f"supervised[{model.name}/{iota.name}]",
        "supervised",
        model,
        data,
        integral_functional(iota, data),
        ball_radius,
    )


def vae(
    encoder: Model,
    decoder: Model,
    data_y,
    noise_w,
    ell: Integrand,
    beta: float,
    ball_radius: Optional[float] = None,
) -> PrototypeProblem:
    """Encoder/decoder training over the product of data and noise draws.

    The measure has one atom per (data point, noise draw) pair with
    product weights; each payload input is the concatenation (y, w) and
    the reconstruction target is y itself.
    """
    if encoder.out_dim % 2 != 0 or decoder.in_dim != encoder.out_dim // 2:
        raise InvalidConfig(
            "encoder must output (mean, log std) pairs of the decoder's latent dim"
        )
    from .model import vae_model  # local import keeps module load order simple

    composite = vae_model(encoder, decoder)
    l_z = decoder.in_dim
    ys = [np.asarray(y, dtype=float) for y in data_y]
    ws = [np.asarray(w, dtype=float) for w in noise_w]
    if any(w.shape != (l_z,) for w in ws):
        raise InvalidConfig(f"noise draws must have the latent dimension {l_z}")
    if ell.out_dim != decoder.out_dim:
        raise InvalidConfig("reconstruction loss dimension must match the decoder")
    pts = []
    for y in ys:
        for w in ws:
            pts.append(SamplePoint(x=np.concatenate([y, w]), target=y))
    n = len(pts)
    data = Dataset(tuple(pts), np.full(n, 1.0 / n))
    iota = vae_integrand(ell, beta, l_z)
    return _make_problem(
        f"vae[beta={beta}]",
        "vae",
        composite,
        data,
        integral_functional(iota, data),
        ball_radius,
    )


def gan_discriminator(
    disc: Model,
    real_points,
    gen_points,
    kind: str,
    beta: float,
    direction: str = "max",
    ball_radius: Optional[float] = None,
) -> PrototypeProblem:
    """Gradient-penalized critic on the even real/generated mixture.

    The pooled dataset weights each real atom ``1/(2 n_real)`` and each
    generated atom ``1/(2 n_gen)``; payloads carry the mixture densities
    (2, 0) and (0, 2).  ``direction="max"`` (the critic's own objective)
    descends the negated integrand.
    """
    if direction not in ("min", "max"):
        raise InvalidConfig("direction must be 'min' or 'max'")
    k = disc.in_dim
    if disc.out_dim != 1 + k:
        raise InvalidConfig("critic model must output (score, input gradient)")
    real = [np.asarray(x, dtype=float) for x in real_points]
    gen = [np.asarray(x, dtype=float) for x in gen_points]
    if not real or not gen:
        raise InvalidDataset("need at least one real and one generated point")
    pts, masses = [], []
    for x in real:
        pts.append(SamplePoint(x=x, mix_real=2.0, mix_gen=0.0))
        masses.append(0.5 / len(real))
    for x in gen:
        pts.append(SamplePoint(x=x, mix_real=0.0, mix_gen=2.0))
        masses.append(0.5 / len(gen))
    data = Dataset(tuple(pts), np.asarray(masses))

    iota = gan_integrand(kind, beta, k)
    if kind == "r1":
        for p in data.points:
            y = float(disc.value(p.x, disc.init)[0])
            if not (0.0 < y < 1.0):
                warnings.warn(
                    f"r1 critic score {y} outside (0, 1) at init on a probe point; "
                    "use a squashed critic",
                    RuntimeWarning,
                )
                break
    if direction == "max":
        iota = negate(iota)
    return _make_problem(
        f"gan[{kind},beta={beta},{direction}]",
        "gan",
        disc,
        data,
        integral_functional(iota, data),
        ball_radius,
    )


def analytic_certificates(problem: PrototypeProblem) -> MapCertificate:
    """Exact map constants for models that are linear in their parameters.

    A constant Jacobian makes the Gram spectrum global: K is the square
    root of the largest eigenvalue, the coercivity bound the smallest
    (dropped when not positive), and the Jacobian Lipschitz constant is
    exactly zero.
    """
    if not problem.model.linear_in_params:
        raise InvalidConfig(
            f"analytic certificates unavailable for nonlinear model "
            f"{problem.model.name!r}; use sampled certificates"
        )
    g = problem.gram()
    lam = None
    if g.lambda_min > 0:
        lam = CertValue(g.lambda_min, "analytic")
    return MapCertificate(
        K=CertValue(float(np.sqrt(max(g.lambda_max, 0.0))), "analytic"),
        L=CertValue(0.0, "analytic"),
        lam=lam,
    )


def sampled_certificates(
    problem: PrototypeProblem, n: int = 32, seed: int = 0
) -> MapCertificate:
    """Seeded sampling estimates of the map constants on the declared ball."""
    return certify(problem.F, problem.declared_ball, n=n, seed=seed)


def objective_with_estimated_lg(
    problem: PrototypeProblem, n_pairs: int = 32, seed: int = 0
) -> ScalarObjective:
    """The problem's objective, with a sampled L attached when none is known.

    The composition theory needs the gradient Lipschitz constant on the
    image of the trust region, so pairs are drawn in parameter space and
    pushed through the map before taking difference quotients.  Sampling
    is local (parameter radius capped at 1): log-scale outputs rarely
    admit the constant on very large regions, and a local sampled value
    is reported as such.  If even local evaluation overflows, the radius
    is shrunk; as a last resort the objective is returned unchanged.
    """
    f = problem.f
    if f.L is not None:
        return f
    rng = np.random.default_rng(seed)
    radius = min(problem.declared_ball.radius, 1.0)
    space = f.space
    for _ in range(6):
        try:
            ball = Ball(problem.theta0, radius)
            worst = 0.0
            for ta, tb in _sample_pairs(ball, n_pairs, rng):
                ha = problem.F.value(ta).coords
                hb = problem.F.value(tb).coords
                dh = space.norm(ha - hb)
                if dh < 1e-12:
                    continue
                worst = max(worst, space.norm(f.grad_fn(ha) - f.grad_fn(hb)) / dh)
            if worst == 0.0:
                return f
            return f.with_certs(L=CertValue(1.1 * worst, "sampled", n_pairs, 1.1))
        except NumericFailure:
            radius /= 10.0
    warnings.warn(
        "objective gradient not evaluable near the initial point; "
        "Lipschitz constant left unset",
        RuntimeWarning,
    )
    return f


def check_gradients(
    problem: PrototypeProblem, n_probes: int = 10, seed: int = 0, h: float = 1e-5
) -> float:
    """Worst finite-difference error of F and of the objective's gradient.

    Probes the initial point and random perturbations of it; assembled
    problems score below 1e-5 unless a Jacobian or gradient is wrong.
    """
    rng = np.random.default_rng(seed)
    theta0 = problem.theta0.coords
    worst = 0.0
    probes = [theta0] + [
        theta0 + 0.1 * rng.standard_normal(theta0.size) for _ in range(n_probes)
    ]
    f_as_map = problem.f.as_map()
    for th in probes:
        worst = max(worst, fd_check(problem.F, th, h=h))
        worst = max(worst, fd_check(f_as_map, problem.F.value(th).coords, h=h))
    return worst
