"""Fixed-step gradient descent on compositions with bound verification.

Runs ``x <- x - alpha * J_F(x)* grad_f(F(x))`` and checks the recorded
trajectory against the quantitative guarantees that the certified
constants imply:

* geometric decay of the optimality gap with factor
  ``q = 1 + L lam alpha^2 - 2 lam alpha``,
* per-step decay, step-norm decay ``alpha q^(i/2) K``, bounded path length
  and final distance from initialization ``alpha K / (1 - sqrt(q))``,
* the per-iterate composition inequalities (PL lower bound, quadratic
  upper bound on the gradient, Taylor bound on consecutive iterates),
* the closest-optimum distance bound when the optimum set is computable.

Each verdict distinguishes hypothesis failures (missing constants, ball
too small, sampled rather than analytic provenance) from genuine bound
violations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidConfig, MissingCertificate, NumericFailure
from .objective import ScalarObjective
from .smoothmap import CertValue, MapCertificate, SmoothMap
from .space import SpaceVec

#: relative slack granted to every monitored inequality
REL_TOL = 1e-9
#: absolute slack floor for norm-scale inequalities
ABS_TOL = 1e-12
#: abort when the gap exceeds this multiple of the initial gap
DIVERGENCE_FACTOR = 10.0


@dataclass(frozen=True)
class ConstantsLedger:
    """All constants entering the convergence guarantees, with provenance.

    ``K_F``, ``L_F``, ``lam_F`` certify the map; ``L_f``, ``lam_f`` the
    objective.  Derived fields follow the fixed formulas

        K_f    = sqrt(2 L_f (f(F(x0)) - f_star))
        L      = K_F^2 L_f + K_f L_F
        lam    = lam_F lam_f            (<= L)
        q      = 1 + L lam alpha^2 - 2 lam alpha     (in [0, 1))
        K      = sqrt(2 L (f(F(x0)) - f_star))
        radius_required = max(alpha K / (1 - sqrt q) + (1/L + alpha) K,
                              ||grad (f o F)(x0)|| / L)

    ``lam``-dependent fields are None when no coercivity certificate is
    available (descent still runs, gap-decay verdicts are then reported
    as hypothesis-unmet).  In minimal mode (no ``L_f`` or no ``f_star``,
    e.g. adversarial integrands) only ``alpha`` is populated.
    """

    alpha: float
    K_F: Optional[CertValue] = None
    L_F: Optional[CertValue] = None
    lam_F: Optional[CertValue] = None
    L_f: Optional[CertValue] = None
    lam_f: Optional[CertValue] = None
    f_star: Optional[float] = None
    K_f: Optional[float] = None
    L: Optional[float] = None
    lam: Optional[float] = None
    q: Optional[float] = None
    K: Optional[float] = None
    radius_required: Optional[float] = None
    initial_gap: Optional[float] = None
    grad0_norm: Optional[float] = None

    @property
    def mode(self) -> str:
        if self.q is not None:
            return "full"
        if self.L is not None:
            return "no-uc"
        return "minimal"

    @property
    def provenance(self) -> str:
        certs = [c for c in (self.K_F, self.L_F, self.lam_F, self.L_f, self.lam_f) if c is not None]
        return "analytic" if all(c.provenance == "analytic" for c in certs) else "sampled"

    def dist_bound(self) -> Optional[float]:
        """``alpha K / (1 - sqrt q)``, the distance-from-init guarantee."""
        if self.q is None or self.K is None:
            return None
        return self.alpha * self.K / (1.0 - math.sqrt(self.q))

    def as_dict(self) -> dict:
        def cert(c):
            return None if c is None else c.as_dict()

        return {
            "alpha": self.alpha,
            "K_F": cert(self.K_F),
            "L_F": cert(self.L_F),
            "lambda_F": cert(self.lam_F),
            "L_f": cert(self.L_f),
            "lambda_f": cert(self.lam_f),
            "f_star": self.f_star,
            "K_f": self.K_f,
            "L": self.L,
            "lambda": self.lam,
            "q": self.q,
            "K": self.K,
            "radius_required": self.radius_required,
            "initial_gap": self.initial_gap,
            "grad0_norm": self.grad0_norm,
            "mode": self.mode,
            "provenance": self.provenance,
        }


def composite_gradient(f_map: SmoothMap, obj: ScalarObjective, x) -> np.ndarray:
    """Coordinates of ``grad (obj o f_map)(x) = J(x)* grad obj(F(x))``."""
    fx = f_map.value(x)
    g = obj.grad_fn(fx.coords)
    return f_map.jacobian(x).adjoint_apply(g)


def build_ledger(
    f_map: SmoothMap,
    obj: ScalarObjective,
    x0,
    cert: MapCertificate,
    alpha="auto",
) -> ConstantsLedger:
    """Populate the ledger from certificates, the initial point and alpha.

    ``alpha="auto"`` selects 1/L (the optimal contraction).  Raises
    :class:`MissingCertificate` when the objective lacks the Lipschitz
    constant or infimum needed to size a step (pass a numeric alpha and a
    minimal ledger is produced instead via :func:`minimal_ledger`).
    """
    x0c = f_map.domain._coords(x0)
    if obj.L is None or obj.f_star is None:
        raise MissingCertificate(
            "full ledger requires the objective's L and f_star; "
            "use minimal_ledger with an explicit alpha otherwise"
        )
    l_f = obj.L.value
    gap0 = float(obj.value_fn(f_map.value(x0c).coords) - obj.f_star)
    if gap0 < 0 and gap0 > -1e-12:
        gap0 = 0.0
    if gap0 < 0:
        raise InvalidConfig(f"f(F(x0)) is below the declared infimum by {-gap0}")

    k_f = math.sqrt(2.0 * l_f * gap0)
    l_total = cert.K.value**2 * l_f + k_f * cert.L.value
    if l_total <= 0:
        raise InvalidConfig("composite Lipschitz constant is zero; nothing to descend")

    if alpha == "auto":
        alpha_val = 1.0 / l_total
    else:
        alpha_val = float(alpha)
        if not (0.0 < alpha_val < 2.0 / l_total):
            raise InvalidConfig(
                f"alpha must lie in (0, 2/L) = (0, {2.0 / l_total}); got {alpha_val}"
            )

    lam = None
    q = None
    if cert.lam is not None and obj.lam is not None:
        lam = cert.lam.value * obj.lam.value
        if lam > l_total * (1 + 1e-9):
            raise InvalidConfig(
                f"inconsistent constants: lambda={lam} exceeds L={l_total}"
            )
        lam = min(lam, l_total)
        q = 1.0 + l_total * lam * alpha_val**2 - 2.0 * lam * alpha_val
        q = min(max(q, 0.0), 1.0 - 1e-16)

    k_total = math.sqrt(2.0 * l_total * gap0)
    g0 = composite_gradient(f_map, obj, x0c)
    g0_norm = f_map.domain.norm(g0)

    radius = None
    if q is not None:
        radius = max(
            alpha_val * k_total / (1.0 - math.sqrt(q))
            + (1.0 / l_total + alpha_val) * k_total,
            g0_norm / l_total,
        )

    return ConstantsLedger(
        alpha=alpha_val,
        K_F=cert.K,
        L_F=cert.L,
        lam_F=cert.lam,
        L_f=obj.L,
        lam_f=obj.lam,
        f_star=obj.f_star,
        K_f=k_f,
        L=l_total,
        lam=lam,
        q=q,
        K=k_total,
        radius_required=radius,
        initial_gap=gap0,
        grad0_norm=g0_norm,
    )


def minimal_ledger(alpha: float) -> ConstantsLedger:
    """A ledger carrying only the step size (no guarantees monitored)."""
    if not alpha > 0:
        raise InvalidConfig("minimal ledger requires a positive numeric alpha")
    return ConstantsLedger(alpha=float(alpha))


def gd_step(f_map: SmoothMap, obj: ScalarObjective, x, alpha: float) -> SpaceVec:
    """One descent step ``x - alpha * J(x)* grad f(F(x))``."""
    if alpha < 0:
        raise InvalidConfig("alpha must be non-negative")
    xc = f_map.domain._coords(x)
    g = composite_gradient(f_map, obj, xc)
    if not np.all(np.isfinite(g)):
        bad = int(np.flatnonzero(~np.isfinite(g))[0])
        raise NumericFailure(f"non-finite composite gradient (coordinate {bad})")
    return SpaceVec(f_map.domain, xc - alpha * g)


@dataclass(eq=False)
class DescentTrace:
    """Recorded trajectory of one descent run.

    ``losses``, ``grad_norms`` and ``dist_from_init`` have one entry per
    iterate (including the last); ``step_norms`` has one entry per step.
    """

    iterates: list
    losses: np.ndarray
    grad_norms: np.ndarray
    step_norms: np.ndarray
    dist_from_init: np.ndarray
    stop_gap: float
    predicted_iters: Optional[int]
    diverged: bool = False

    @property
    def n_steps(self) -> int:
        return len(self.step_norms)


@dataclass
class Verdict:
    """Outcome of one monitored bound.

    ``passed`` is None when the bound could not be evaluated.  ``measured``
    and ``bound`` record the worst comparison (largest violation if any,
    else the tightest margin).  ``hypothesis_met`` is False when the
    theorem's preconditions were not established for this run, in which
    case a failure is reported but does not indicate a broken guarantee.
    """

    name: str
    passed: Optional[bool]
    measured: Optional[float] = None
    bound: Optional[float] = None
    hypothesis_met: bool = True
    certified: str = "analytic"
    n_checked: int = 0
    n_violations: int = 0
    worst_iter: Optional[int] = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "measured": self.measured,
            "bound": self.bound,
            "hypothesis_met": self.hypothesis_met,
            "certified": self.certified,
            "n_checked": self.n_checked,
            "n_violations": self.n_violations,
            "worst_iter": self.worst_iter,
            "detail": self.detail,
        }


@dataclass(eq=False)
class BoundVerdicts:
    """All verdicts of a run, addressable by name."""

    verdicts: dict = field(default_factory=dict)
    diverged: bool = False

    def add(self, v: Verdict):
        self.verdicts[v.name] = v

    def get(self, name: str) -> Verdict:
        return self.verdicts[name]

    def all(self) -> list:
        return list(self.verdicts.values())

    def violations(self, analytic_only: bool = False) -> list:
        """Failed verdicts whose hypotheses were met (genuine violations)."""
        out = [
            v
            for v in self.verdicts.values()
            if v.passed is False and v.hypothesis_met
        ]
        if analytic_only:
            out = [v for v in out if v.certified == "analytic"]
        return out

    def as_list(self) -> list:
        return [v.as_dict() for v in self.verdicts.values()]


@dataclass(frozen=True)
class MonitorRow:
    """One evaluated inequality: measured vs bound at an iteration."""

    name: str
    iteration: int
    measured: float
    bound: float
    kind: str  # "ub": measured <= bound, "lb": measured >= bound
    tol: float

    @property
    def holds(self) -> bool:
        if self.kind == "ub":
            return self.measured <= self.bound + self.tol
        return self.measured >= self.bound - self.tol


def predicted_iterations(ledger: ConstantsLedger, gap0: float, stop_gap: float) -> Optional[int]:
    """Iterations the ledger's q predicts to reach the stopping gap."""
    if ledger.q is None or gap0 <= 0:
        return None if ledger.q is None else 0
    if gap0 <= stop_gap:
        return 0
    if ledger.q == 0.0:
        return 1
    if stop_gap <= 0.0:
        return None  # a positive-q contraction never reaches an exact zero
    return int(math.ceil(math.log(stop_gap / gap0) / math.log(ledger.q)))


def monitor_rows(trace: DescentTrace, ledger: ConstantsLedger) -> list[MonitorRow]:
    """Evaluate every monitorable inequality along the recorded trajectory.

    This is the single source for both verdict aggregation and the
    bounds.csv export; nothing downstream recomputes a bound differently.
    """
    rows: list[MonitorRow] = []
    if ledger.f_star is None:
        return rows
    gaps = trace.losses - ledger.f_star
    gap0 = float(gaps[0])
    n = len(gaps)
    alpha = ledger.alpha
    loss_tol = REL_TOL * max(gap0, 0.0) + ABS_TOL

    if ledger.q is not None and ledger.K is not None:
        q, k_total = ledger.q, ledger.K
        sq = math.sqrt(q)
        dist_bound = ledger.dist_bound()
        cum = 0.0
        for i in range(n):
            rows.append(
                MonitorRow("q_decay", i, float(gaps[i]), (q**i) * gap0, "ub", loss_tol)
            )
        for i in range(trace.n_steps):
            rows.append(
                MonitorRow(
                    "per_step_decay", i, float(gaps[i + 1]), q * float(gaps[i]), "ub", loss_tol
                )
            )
            step_bound = alpha * (sq**i) * k_total
            rows.append(
                MonitorRow(
                    "step_norm",
                    i,
                    float(trace.step_norms[i]),
                    step_bound,
                    "ub",
                    REL_TOL * step_bound + ABS_TOL,
                )
            )
            cum += float(trace.step_norms[i])
            rows.append(
                MonitorRow(
                    "path_length", i, cum, dist_bound, "ub", REL_TOL * dist_bound + ABS_TOL
                )
            )

    if ledger.lam is not None:
        for i in range(n):
            rows.append(
                MonitorRow(
                    "composition_pl",
                    i,
                    0.5 * float(trace.grad_norms[i]) ** 2,
                    ledger.lam * float(gaps[i]),
                    "lb",
                    REL_TOL * ledger.lam * max(gap0, 0.0) + ABS_TOL,
                )
            )

    if ledger.L is not None:
        for i in range(n):
            rows.append(
                MonitorRow(
                    "composition_lg_bound",
                    i,
                    0.5 * float(trace.grad_norms[i]) ** 2,
                    ledger.L * float(gaps[i]),
                    "ub",
                    REL_TOL * ledger.L * max(gap0, 0.0) + ABS_TOL,
                )
            )
        # Taylor remainder on consecutive iterates; the descent direction
        # makes <grad_i, x_{i+1} - x_i> = -alpha ||grad_i||^2.
        for i in range(trace.n_steps):
            remainder = abs(
                float(trace.losses[i + 1])
                - float(trace.losses[i])
                + alpha * float(trace.grad_norms[i]) ** 2
            )
            rows.append(
                MonitorRow(
                    "taylor_bound",
                    i,
                    remainder,
                    0.5 * ledger.L * float(trace.step_norms[i]) ** 2,
                    "ub",
                    loss_tol,
                )
            )
    return rows


def _aggregate(rows: list[MonitorRow], name: str) -> Optional[Verdict]:
    mine = [r for r in rows if r.name == name]
    if not mine:
        return None
    violations = [r for r in mine if not r.holds]
    if violations:
        worst = max(
            violations,
            key=lambda r: (r.measured - r.bound) if r.kind == "ub" else (r.bound - r.measured),
        )
        passed = False
    else:
        worst = max(
            mine,
            key=lambda r: (r.measured - r.bound) if r.kind == "ub" else (r.bound - r.measured),
        )
        passed = True
    return Verdict(
        name=name,
        passed=passed,
        measured=worst.measured,
        bound=worst.bound,
        n_checked=len(mine),
        n_violations=len(violations),
        worst_iter=worst.iteration,
    )


def closest_optimum(f_map: SmoothMap, obj: ScalarObjective, x0) -> Optional[SpaceVec]:
    """Minimum-distance point of the optimum set, for computable families.

    Supported when the map is linear and the objective has a unique known
    minimizer h*: the optimum set is the affine solution set of
    ``A x = h*`` and the closest point is ``x0 + A*(A A*)^+ (h* - A x0)``
    in the weighted metrics.  Returns None otherwise, or when the optimum
    set is empty (h* not attainable).
    """
    if f_map.linear_op is None or obj.minimizer is None:
        return None
    x0c = f_map.domain._coords(x0)
    a = f_map.linear_op
    r = obj.minimizer - a.apply(x0c)
    mat_a = a.matrix()
    mat_adj = np.stack([a.adjoint_apply(e) for e in np.eye(a.codomain.dim)], axis=1)
    m_gram = mat_a @ mat_adj
    d_half = np.sqrt(a.codomain.weights)
    sym = (m_gram * d_half[:, None]) / d_half[None, :]
    sym = 0.5 * (sym + sym.T)
    y = (np.linalg.pinv(sym, rcond=1e-12) @ (d_half * r)) / d_half
    delta = mat_adj @ y
    residual = a.codomain.norm(mat_a @ delta - r)
    if residual > 1e-8 * (1.0 + a.codomain.norm(r)):
        return None  # optimum set empty: h* is not attainable by the map
    return SpaceVec(f_map.domain, x0c + delta)


def run(
    f_map: SmoothMap,
    obj: ScalarObjective,
    x0,
    ledger: ConstantsLedger,
    max_iter: int = 10000,
    stop_gap: Optional[float] = None,
    declared_radius: Optional[float] = None,
) -> tuple[DescentTrace, BoundVerdicts]:
    """Run descent and verify every applicable bound on the trajectory.

    Stops when the optimality gap falls to ``stop_gap`` (default
    1e-10 x initial gap), when ``max_iter`` steps were taken, or when the
    gap has grown past ten times its initial value (divergence guard;
    without a known infimum the guard watches the raw loss instead).
    """
    if max_iter < 1:
        raise InvalidConfig("max_iter must be >= 1")
    space = f_map.domain
    x = space._coords(x0).copy()
    x_init = x.copy()
    alpha = ledger.alpha

    f_star = ledger.f_star
    losses, grad_norms, step_norms, dists = [], [], [], []
    iterates = [x.copy()]
    diverged = False

    fx = f_map.value(x)
    loss = obj.value_fn(fx.coords)
    g = f_map.jacobian(x).adjoint_apply(obj.grad_fn(fx.coords))
    if not np.all(np.isfinite(g)) or not np.isfinite(loss):
        raise NumericFailure("non-finite loss or gradient at the initial point")
    losses.append(loss)
    grad_norms.append(space.norm(g))
    dists.append(0.0)

    gap0 = None if f_star is None else max(loss - f_star, 0.0)
    if stop_gap is None:
        stop_gap = 1e-10 * gap0 if gap0 is not None else 0.0

    for i in range(max_iter):
        if gap0 is not None:
            gap = losses[-1] - f_star
            if gap <= stop_gap:
                break
            if gap0 > 0 and gap > DIVERGENCE_FACTOR * gap0:
                diverged = True
                break
        elif abs(losses[-1]) > DIVERGENCE_FACTOR * (abs(losses[0]) + 1.0):
            diverged = True
            break

        x_next = x - alpha * g
        step_norms.append(space.norm(x_next - x))
        x = x_next
        iterates.append(x.copy())
        dists.append(space.norm(x - x_init))

        fx = f_map.value(x)
        loss = obj.value_fn(fx.coords)
        g = f_map.jacobian(x).adjoint_apply(obj.grad_fn(fx.coords))
        if not np.all(np.isfinite(g)) or not np.isfinite(loss):
            raise NumericFailure(f"non-finite loss or gradient at iteration {i + 1}")
        losses.append(loss)
        grad_norms.append(space.norm(g))

    trace = DescentTrace(
        iterates=iterates,
        losses=np.asarray(losses),
        grad_norms=np.asarray(grad_norms),
        step_norms=np.asarray(step_norms),
        dist_from_init=np.asarray(dists),
        stop_gap=stop_gap,
        predicted_iters=(
            None if gap0 is None else predicted_iterations(ledger, gap0, stop_gap)
        ),
        diverged=diverged,
    )
    verdicts = verify(trace, ledger, f_map, obj, declared_radius=declared_radius)
    return trace, verdicts


def verify(
    trace: DescentTrace,
    ledger: ConstantsLedger,
    f_map: SmoothMap,
    obj: ScalarObjective,
    declared_radius: Optional[float] = None,
) -> BoundVerdicts:
    """Aggregate per-iteration monitors and final bounds into verdicts."""
    out = BoundVerdicts(diverged=trace.diverged)
    certified = ledger.provenance

    # ball hypothesis: the required radius exists, is covered by the
    # declared region (when one was declared) and contained the trajectory
    radius = ledger.radius_required
    max_dist = float(trace.dist_from_init.max()) if len(trace.dist_from_init) else 0.0
    ball_ok = None
    if radius is not None:
        ball_ok = max_dist <= radius * (1 + REL_TOL) + ABS_TOL
    declared_ok = (
        True
        if declared_radius is None or radius is None
        else radius <= declared_radius * (1 + REL_TOL)
    )
    hyp_ball = bool(ball_ok) and declared_ok

    out.add(
        Verdict(
            name="ball",
            passed=ball_ok,
            measured=max_dist,
            bound=radius,
            hypothesis_met=radius is not None and declared_ok,
            certified=certified,
            n_checked=len(trace.dist_from_init),
            detail="trajectory distance from init vs required trust radius",
        )
    )

    rows = monitor_rows(trace, ledger)
    hyp_by_name = {
        "q_decay": ledger.q is not None and hyp_ball,
        "per_step_decay": ledger.q is not None and hyp_ball,
        "step_norm": ledger.q is not None and hyp_ball,
        "path_length": ledger.q is not None and hyp_ball,
        "composition_pl": ledger.lam is not None and hyp_ball,
        "composition_lg_bound": ledger.L is not None and hyp_ball,
        "taylor_bound": ledger.L is not None and hyp_ball,
    }
    for name, hyp in hyp_by_name.items():
        v = _aggregate(rows, name)
        if v is None:
            v = Verdict(name=name, passed=None, detail="constants unavailable")
            v.hypothesis_met = False
        else:
            v.hypothesis_met = hyp
        v.certified = certified
        if trace.diverged:
            v.detail = (v.detail + " (run diverged)").strip()
        out.add(v)

    # final distance from initialization
    dist_bound = ledger.dist_bound()
    final_dist = float(trace.dist_from_init[-1]) if len(trace.dist_from_init) else 0.0
    out.add(
        Verdict(
            name="dist_init",
            passed=(
                None
                if dist_bound is None
                else final_dist <= dist_bound * (1 + REL_TOL) + ABS_TOL
            ),
            measured=final_dist,
            bound=dist_bound,
            hypothesis_met=dist_bound is not None and hyp_ball,
            certified=certified,
            n_checked=1,
        )
    )

    # closest-optimum bound, evaluated only for computable optimum sets
    x_hat = closest_optimum(f_map, obj, trace.iterates[0])
    if (
        x_hat is not None
        and dist_bound is not None
        and ledger.K_F is not None
        and ledger.L is not None
        and ledger.L_f is not None
        and ledger.q is not None
    ):
        d_hat = f_map.domain.norm(x_hat.coords - trace.iterates[0])
        bound = (
            ledger.alpha
            * ledger.K_F.value
            * math.sqrt(ledger.L * ledger.L_f.value)
            * d_hat
            / (1.0 - math.sqrt(ledger.q))
        )
        out.add(
            Verdict(
                name="closest_opt",
                passed=final_dist <= bound * (1 + REL_TOL) + ABS_TOL,
                measured=final_dist,
                bound=bound,
                hypothesis_met=hyp_ball,
                certified=certified,
                n_checked=1,
                detail=f"distance to nearest optimum {d_hat}",
            )
        )
    else:
        out.add(
            Verdict(
                name="closest_opt",
                passed=None,
                hypothesis_met=False,
                certified=certified,
                detail="optimum set not computable for this family",
            )
        )

    # reaching the stopping gap is itself guaranteed on certified runs,
    # provided the iteration budget covered the predicted count
    if ledger.f_star is not None:
        final_gap = float(trace.losses[-1]) - ledger.f_star
        reached = final_gap <= trace.stop_gap * (1 + REL_TOL) + ABS_TOL
        budget_covered = (
            trace.predicted_iters is not None
            and trace.n_steps >= trace.predicted_iters
        )
        out.add(
            Verdict(
                name="converged",
                passed=bool(reached and not trace.diverged),
                measured=final_gap,
                bound=trace.stop_gap,
                hypothesis_met=ledger.q is not None
                and hyp_ball
                and (reached or budget_covered),
                certified=certified,
                n_checked=1,
                detail="final optimality gap vs stopping gap",
            )
        )
    return out


def trace_table(trace: DescentTrace, ledger: ConstantsLedger) -> list[dict]:
    """Per-iteration rows for the trace export (one dict per iterate)."""
    rows = []
    f_star = ledger.f_star
    gap0 = None if f_star is None else float(trace.losses[0]) - f_star
    dist_bound = ledger.dist_bound()
    for i in range(len(trace.losses)):
        gap = None if f_star is None else float(trace.losses[i]) - f_star
        q_bound = (
            None if (ledger.q is None or gap0 is None) else (ledger.q**i) * gap0
        )
        step = float(trace.step_norms[i]) if i < trace.n_steps else None
        step_bound = (
            None
            if (ledger.q is None or ledger.K is None or i >= trace.n_steps)
            else ledger.alpha * math.sqrt(ledger.q) ** i * ledger.K
        )
        rows.append(
            {
                "iter": i,
                "loss": float(trace.losses[i]),
                "gap": gap,
                "q_bound": q_bound,
                "grad_norm": float(trace.grad_norms[i]),
                "step_norm": step,
                "step_bound": step_bound,
                "dist_init": float(trace.dist_from_init[i]),
                "dist_bound": dist_bound,
            }
        )
    return rows
