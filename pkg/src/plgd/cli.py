"""Config-driven experiment harness: build, certify, descend, verify, report.

Commands
--------
``plgd run <config.json>``
    Build the problem, estimate or compute certificates, run descent and
    write ``trace.csv``, ``bounds.csv``, ``report.json`` (plus wall-clock
    ``timings.json``) into the output directory.
``plgd check <config.json>``
    Certificates and ledger only, no descent.
``plgd sweep <config.json> --axis width --values 2,8,32``
    One run per value in its own subdirectory plus a ``summary.csv``.

Exit codes: 0 when every evaluated verdict passes or is hypothesis-unmet;
1 on configuration or I/O errors; 2 on a gradient-oracle failure or a
bound violation under analytic certificates (violations under sampled
certificates are reported as warnings).

Config schema (JSON; unknown keys are rejected)
-----------------------------------------------
::

    {
      "problem": {
        "family": "supervised" | "vae" | "gan",
        "ball_radius": number | null,        # optional declared trust radius
        # supervised
        "model": {"kind": "linear"|"random_features"|"shallow",
                  "in_dim": int, "out_dim": int, "width": int, "seed": int},
        "dataset": {...},                    # see below
        "integrand": {"kind": "least_squares", "sigma": [...]}
                   | {"kind": "gaussian_nll"}
                   | {"kind": "softmax", "classes": int},
        # vae
        "encoder": {"width": int, "seed": int},
        "decoder": {"width": int, "seed": int},
        "latent_dim": int, "beta": number,
        "noise": {"count": int, "seed": int},
        "recon_sigma": [...],                # optional fixed variances
        # gan
        "disc": {"kind": "shallow"|"linear", "width": int, "seed": int,
                 "squash": bool},
        "gan_kind": "wgan_gp" | "r1", "beta": number,
        "direction": "max" | "min"
      },
      "certificates": {"mode": "analytic"|"sampled", "n_samples": int,
                       "seed": int,
                       "overrides": {"K_F": num, "L_F": num, "lambda_F": num}},
      "descent": {"alpha": "auto" | number, "max_iter": int,
                  "stop_gap": number | null},
      "output": {"dir": str, "formats": ["csv", "json"]}
    }

Dataset schema
--------------
Exactly one of:

* ``{"path": "file.json"}`` -- a JSON file with the inline schema below;
* ``{"inline": {"inputs": [[...], ...], "targets": [[...]...] | [int...],
  "weights": [...], "side": ["real"|"generated", ...]}}`` -- targets,
  weights (default uniform) and side labels (adversarial datasets only)
  are optional;
* ``{"synthetic": {"kind": "gaussian", "d": int, "in_dim": int,
  "target_dim": int, "seed": int}}``, ``{"kind": "classes", ...,
  "classes": int}``, ``{"kind": "orthonormal", "d": int, "in_dim": int,
  "targets": [...]}``, or for adversarial data ``{"kind":
  "two_gaussians", "n_real": int, "n_gen": int, "in_dim": int,
  "separation": number, "seed": int}``.

Report schema
-------------
``report.json`` carries: the normalized config echo, the gradient-oracle
result, the full constants ledger with provenance, the tangent-kernel
spectral range at the initial and final parameters, predicted vs actual
iteration counts, every verdict (measured value, bound value, hypothesis
status, provenance) and collected warnings.  Identical config and seed
reproduce the file byte for byte; wall-clock timings therefore live in
the separate ``timings.json``.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import descent as descent_mod
from .descent import build_ledger, minimal_ledger, monitor_rows, run, trace_table
from .errors import InvalidConfig, InvalidDataset, MissingCertificate, PlgdError
from .integrand import Dataset, SamplePoint, gaussian_nll, least_squares, softmax_ce
from .model import (
    linear_disc,
    linear_model,
    random_features,
    save_theta,
    shallow_disc,
    shallow_net,
)
from .problems import (
    PrototypeProblem,
    analytic_certificates,
    check_gradients,
    gan_discriminator,
    objective_with_estimated_lg,
    sampled_certificates,
    supervised,
    vae,
)
from .smoothmap import CertValue, MapCertificate

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VIOLATION = 2

FD_GATE = 1e-5


def _fmt(x) -> str:
    """CSV cell: '.'-decimal, 17 significant digits, empty for missing."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _to_py(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


# ---------------------------------------------------------------------------
# config validation


def _require_keys(d: dict, allowed: dict, path: str) -> dict:
    """Apply defaults and reject unknown keys; ``allowed`` maps key -> default
    (``...`` marks a required key)."""
    if not isinstance(d, dict):
        raise InvalidConfig(f"{path}: expected an object")
    unknown = set(d) - set(allowed)
    if unknown:
        raise InvalidConfig(f"{path}: unknown keys {sorted(unknown)}")
    out = {}
    for key, default in allowed.items():
        if key in d:
            out[key] = d[key]
        elif default is ...:
            raise InvalidConfig(f"{path}.{key}: required key missing")
        else:
            out[key] = default
    return out


def normalize_config(raw: dict) -> dict:
    """Validate a raw config dict and fill in documented defaults."""
    top = _require_keys(
        raw,
        {"problem": ..., "certificates": {}, "descent": {}, "output": {}},
        "config",
    )
    prob = top["problem"]
    if not isinstance(prob, dict) or "family" not in prob:
        raise InvalidConfig("config.problem.family: required key missing")
    family = prob["family"]

    if family == "supervised":
        prob = _require_keys(
            prob,
            {
                "family": ...,
                "model": ...,
                "dataset": ...,
                "integrand": ...,
                "ball_radius": None,
            },
            "config.problem",
        )
        prob["model"] = _require_keys(
            prob["model"],
            {"kind": ..., "in_dim": ..., "out_dim": 1, "width": None, "seed": 0},
            "config.problem.model",
        )
        if prob["model"]["kind"] not in ("linear", "random_features", "shallow"):
            raise InvalidConfig(
                f"config.problem.model.kind: unknown kind {prob['model']['kind']!r}"
            )
        prob["integrand"] = _require_keys(
            prob["integrand"],
            {"kind": ..., "sigma": None, "classes": None},
            "config.problem.integrand",
        )
        if prob["integrand"]["kind"] not in ("least_squares", "gaussian_nll", "softmax"):
            raise InvalidConfig(
                f"config.problem.integrand.kind: unknown kind {prob['integrand']['kind']!r}"
            )
    elif family == "vae":
        prob = _require_keys(
            prob,
            {
                "family": ...,
                "encoder": ...,
                "decoder": ...,
                "latent_dim": ...,
                "beta": ...,
                "noise": ...,
                "dataset": ...,
                "recon_sigma": None,
                "ball_radius": None,
            },
            "config.problem",
        )
        prob["encoder"] = _require_keys(
            prob["encoder"], {"width": ..., "seed": 0}, "config.problem.encoder"
        )
        prob["decoder"] = _require_keys(
            prob["decoder"], {"width": ..., "seed": 1}, "config.problem.decoder"
        )
        prob["noise"] = _require_keys(
            prob["noise"], {"count": ..., "seed": 2}, "config.problem.noise"
        )
        if not prob["beta"] > 0:
            raise InvalidConfig("config.problem.beta: must be positive")
    elif family == "gan":
        prob = _require_keys(
            prob,
            {
                "family": ...,
                "disc": ...,
                "gan_kind": ...,
                "beta": ...,
                "direction": "max",
                "dataset": ...,
                "ball_radius": None,
            },
            "config.problem",
        )
        prob["disc"] = _require_keys(
            prob["disc"],
            {"kind": ..., "width": None, "seed": 0, "squash": False},
            "config.problem.disc",
        )
        if prob["disc"]["kind"] not in ("shallow", "linear"):
            raise InvalidConfig(
                f"config.problem.disc.kind: unknown kind {prob['disc']['kind']!r}"
            )
        if prob["gan_kind"] not in ("wgan_gp", "r1"):
            raise InvalidConfig(
                f"config.problem.gan_kind: unknown kind {prob['gan_kind']!r}"
            )
        if prob["direction"] not in ("min", "max"):
            raise InvalidConfig("config.problem.direction: must be 'min' or 'max'")
    else:
        raise InvalidConfig(f"config.problem.family: unknown family {family!r}")

    prob["dataset"] = _require_keys(
        prob["dataset"],
        {"path": None, "inline": None, "synthetic": None},
        "config.problem.dataset",
    )
    given = [k for k in ("path", "inline", "synthetic") if prob["dataset"][k] is not None]
    if len(given) != 1:
        raise InvalidConfig(
            "config.problem.dataset: exactly one of path/inline/synthetic required"
        )

    certs = _require_keys(
        top["certificates"],
        {"mode": "sampled", "n_samples": 32, "seed": 0, "overrides": {}},
        "config.certificates",
    )
    if certs["mode"] not in ("analytic", "sampled"):
        raise InvalidConfig("config.certificates.mode: must be 'analytic' or 'sampled'")
    if certs["n_samples"] < 1:
        raise InvalidConfig("config.certificates.n_samples: must be >= 1")
    certs["overrides"] = _require_keys(
        certs["overrides"],
        {"K_F": None, "L_F": None, "lambda_F": None},
        "config.certificates.overrides",
    )

    desc = _require_keys(
        top["descent"],
        {"alpha": "auto", "max_iter": 10000, "stop_gap": None},
        "config.descent",
    )
    if desc["alpha"] != "auto" and not (isinstance(desc["alpha"], (int, float)) and desc["alpha"] > 0):
        raise InvalidConfig("config.descent.alpha: must be 'auto' or a positive number")
    if desc["max_iter"] < 1:
        raise InvalidConfig("config.descent.max_iter: must be >= 1")

    out = _require_keys(
        top["output"],
        {"dir": "out", "formats": ["csv", "json"]},
        "config.output",
    )
    for fmt in out["formats"]:
        if fmt not in ("csv", "json"):
            raise InvalidConfig(f"config.output.formats: unknown format {fmt!r}")

    return {"problem": prob, "certificates": certs, "descent": desc, "output": out}


# ---------------------------------------------------------------------------
# dataset and problem construction


def load_dataset_file(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InvalidConfig(f"dataset file not found: {path}")
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"dataset file {path}: invalid JSON at line {exc.lineno}")


def _dataset_from_inline(spec: dict) -> tuple[Dataset, list | None]:
    spec = _require_keys(
        spec,
        {"inputs": ..., "targets": None, "weights": None, "side": None},
        "dataset",
    )
    inputs = [np.asarray(x, dtype=float) for x in spec["inputs"]]
    n = len(inputs)
    if n == 0:
        raise InvalidDataset("dataset: inputs must be non-empty")
    weights = (
        np.full(n, 1.0 / n) if spec["weights"] is None else np.asarray(spec["weights"], float)
    )
    targets = spec["targets"]
    pts = []
    for i, x in enumerate(inputs):
        t = None
        if targets is not None:
            t = targets[i] if isinstance(targets[i], int) else np.asarray(targets[i], float)
        pts.append(SamplePoint(x=x, target=t))
    return Dataset(tuple(pts), weights), spec["side"]


def _dataset_synthetic(spec: dict) -> tuple[Dataset, list | None]:
    kind = spec.get("kind")
    if kind == "gaussian":
        spec = _require_keys(
            spec,
            {"kind": ..., "d": ..., "in_dim": ..., "target_dim": 0, "seed": 0},
            "dataset.synthetic",
        )
        rng = np.random.default_rng(spec["seed"])
        inputs = rng.standard_normal((spec["d"], spec["in_dim"]))
        targets = (
            None
            if spec["target_dim"] == 0
            else list(rng.standard_normal((spec["d"], spec["target_dim"])))
        )
        return Dataset.from_arrays(list(inputs), targets), None
    if kind == "classes":
        spec = _require_keys(
            spec,
            {"kind": ..., "d": ..., "in_dim": ..., "classes": ..., "seed": 0},
            "dataset.synthetic",
        )
        rng = np.random.default_rng(spec["seed"])
        inputs = rng.standard_normal((spec["d"], spec["in_dim"]))
        targets = [int(t) for t in rng.integers(1, spec["classes"] + 1, size=spec["d"])]
        return Dataset.from_arrays(list(inputs), targets), None
    if kind == "orthonormal":
        spec = _require_keys(
            spec,
            {"kind": ..., "d": ..., "in_dim": ..., "targets": None, "seed": 0},
            "dataset.synthetic",
        )
        if spec["d"] > spec["in_dim"]:
            raise InvalidConfig("dataset.synthetic: orthonormal needs d <= in_dim")
        inputs = list(np.eye(spec["in_dim"])[: spec["d"]])
        if spec["targets"] is not None:
            targets = [np.asarray(t, float) for t in spec["targets"]]
        else:
            rng = np.random.default_rng(spec["seed"])
            targets = list(rng.standard_normal((spec["d"], 1)))
        return Dataset.from_arrays(inputs, targets), None
    if kind == "two_gaussians":
        spec = _require_keys(
            spec,
            {"kind": ..., "n_real": ..., "n_gen": ..., "in_dim": ..., "separation": 2.0, "seed": 0},
            "dataset.synthetic",
        )
        rng = np.random.default_rng(spec["seed"])
        half = 0.5 * spec["separation"]
        real = rng.standard_normal((spec["n_real"], spec["in_dim"])) + half
        gen = rng.standard_normal((spec["n_gen"], spec["in_dim"])) - half
        data = Dataset.from_arrays(list(real) + list(gen))
        side = ["real"] * spec["n_real"] + ["generated"] * spec["n_gen"]
        return data, side
    raise InvalidConfig(f"dataset.synthetic.kind: unknown kind {kind!r}")


def build_dataset(ds_cfg: dict) -> tuple[Dataset, list | None]:
    if ds_cfg["path"] is not None:
        return _dataset_from_inline(load_dataset_file(ds_cfg["path"]))
    if ds_cfg["inline"] is not None:
        return _dataset_from_inline(ds_cfg["inline"])
    return _dataset_synthetic(ds_cfg["synthetic"])


def _target_dim(data: Dataset) -> int:
    t = data.points[0].target
    if t is None:
        raise InvalidConfig("dataset provides no targets for a supervised problem")
    if isinstance(t, (int, np.integer)):
        raise InvalidConfig("integer class targets need the softmax integrand")
    return np.asarray(t).size


def _build_supervised(prob: dict) -> PrototypeProblem:
    data, _side = build_dataset(prob["dataset"])
    icfg = prob["integrand"]
    if icfg["kind"] == "least_squares":
        k = _target_dim(data)
        sigma = icfg["sigma"]
        if sigma is not None and len(sigma) != k:
            raise InvalidConfig("integrand.sigma length must match the target dim")
        iota = least_squares(sigma=sigma, k=k)
        out_dim = k
    elif icfg["kind"] == "gaussian_nll":
        k = _target_dim(data)
        iota = gaussian_nll(k=k)
        out_dim = 2 * k
    else:  # softmax
        if icfg["classes"] is None:
            raise InvalidConfig("integrand.classes is required for softmax")
        iota = softmax_ce(icfg["classes"])
        out_dim = icfg["classes"]

    mcfg = prob["model"]
    in_dim = mcfg["in_dim"]
    if mcfg["kind"] == "linear":
        model = linear_model(in_dim, out_dim=out_dim)
    elif mcfg["kind"] == "random_features":
        if mcfg["width"] is None:
            raise InvalidConfig("model.width is required for random_features")
        model = random_features(in_dim, mcfg["width"], out_dim=out_dim, seed=mcfg["seed"])
    else:
        if mcfg["width"] is None:
            raise InvalidConfig("model.width is required for shallow")
        model = shallow_net(in_dim, mcfg["width"], out_dim=out_dim, seed=mcfg["seed"])
    if mcfg["out_dim"] not in (1, out_dim):
        raise InvalidConfig(
            f"model.out_dim {mcfg['out_dim']} conflicts with integrand dimension {out_dim}"
        )
    return supervised(model, data, iota, ball_radius=prob["ball_radius"])


def _build_vae(prob: dict) -> PrototypeProblem:
    data, _side = build_dataset(prob["dataset"])
    ys = [p.x for p in data.points]
    y_dim = ys[0].size
    l_z = prob["latent_dim"]
    encoder = shallow_net(y_dim, prob["encoder"]["width"], out_dim=2 * l_z, seed=prob["encoder"]["seed"])
    decoder = shallow_net(l_z, prob["decoder"]["width"], out_dim=y_dim, seed=prob["decoder"]["seed"])
    rng = np.random.default_rng(prob["noise"]["seed"])
    noise = list(rng.standard_normal((prob["noise"]["count"], l_z)))
    sigma = prob["recon_sigma"]
    ell = least_squares(sigma=sigma, k=y_dim)
    return vae(encoder, decoder, ys, noise, ell, prob["beta"], ball_radius=prob["ball_radius"])


def _build_gan(prob: dict) -> PrototypeProblem:
    data, side = build_dataset(prob["dataset"])
    if side is None:
        raise InvalidConfig("adversarial datasets must label points real/generated")
    real = [p.x for p, s in zip(data.points, side) if s == "real"]
    gen = [p.x for p, s in zip(data.points, side) if s == "generated"]
    in_dim = real[0].size if real else gen[0].size
    dcfg = prob["disc"]
    if dcfg["kind"] == "linear":
        disc = linear_disc(in_dim)
    else:
        if dcfg["width"] is None:
            raise InvalidConfig("disc.width is required for shallow critics")
        disc = shallow_disc(in_dim, dcfg["width"], seed=dcfg["seed"], squash=dcfg["squash"])
    return gan_discriminator(
        disc,
        real,
        gen,
        prob["gan_kind"],
        prob["beta"],
        direction=prob["direction"],
        ball_radius=prob["ball_radius"],
    )


def build_problem(cfg: dict) -> PrototypeProblem:
    family = cfg["problem"]["family"]
    if family == "supervised":
        return _build_supervised(cfg["problem"])
    if family == "vae":
        return _build_vae(cfg["problem"])
    return _build_gan(cfg["problem"])


# ---------------------------------------------------------------------------
# certificates and execution


def _apply_overrides(cert: MapCertificate, overrides: dict) -> MapCertificate:
    k = cert.K if overrides["K_F"] is None else CertValue(float(overrides["K_F"]), "analytic")
    l = cert.L if overrides["L_F"] is None else CertValue(float(overrides["L_F"]), "analytic")
    lam = cert.lam
    if overrides["lambda_F"] is not None:
        lam = CertValue(float(overrides["lambda_F"]), "analytic")
    return MapCertificate(K=k, L=l, lam=lam)


def make_certificates(problem: PrototypeProblem, cfg: dict):
    """Certificates plus (for sampled mode) a ball refined from a pre-ledger.

    Sampled mode estimates on the declared ball, builds a provisional
    ledger and, unless the user pinned a radius, re-declares the ball as
    ten times the predicted travel distance before the final estimate.
    Returns (problem, certificate, objective-with-L).
    """

    ccfg = cfg["certificates"]
    overrides = ccfg["overrides"]
    user_radius = cfg["problem"]["ball_radius"]

    if ccfg["mode"] == "analytic":
        cert = _apply_overrides(analytic_certificates(problem), overrides)
        return problem, cert, problem.f

    cert = _apply_overrides(
        sampled_certificates(problem, n=ccfg["n_samples"], seed=ccfg["seed"]), overrides
    )
    obj = objective_with_estimated_lg(problem, n_pairs=ccfg["n_samples"], seed=ccfg["seed"])
    if user_radius is None and obj.L is not None and obj.f_star is not None:
        try:
            pre = build_ledger(problem.F, obj, problem.theta0, cert, alpha="auto")
        except (MissingCertificate, InvalidConfig):
            pre = None
        if pre is not None and pre.dist_bound() is not None:
            problem = problem.with_ball(max(10.0 * pre.dist_bound(), 1e-6))
            cert = _apply_overrides(
                sampled_certificates(problem, n=ccfg["n_samples"], seed=ccfg["seed"]),
                overrides,
            )
            obj = objective_with_estimated_lg(
                problem, n_pairs=ccfg["n_samples"], seed=ccfg["seed"]
            )
    return problem, cert, obj


def _ntk_summary(problem: PrototypeProblem, theta) -> dict:
    g = problem.gram(theta)
    return {"lambda_min": g.lambda_min, "lambda_max": g.lambda_max}


def execute(problem: PrototypeProblem, cfg: dict, outdir: Path, do_descent: bool = True) -> dict:
    """Run the full pipeline on an assembled problem; returns the report."""
    t_start = time.perf_counter()
    warnings_list = []
    report = {"config": cfg, "problem": {"name": problem.name, "family": problem.family,
                                         "param_dim": problem.model.param_dim,
                                         "function_dim": problem.f.space.dim}}

    fd_err = check_gradients(problem, n_probes=3, seed=cfg["certificates"]["seed"])
    report["gradient_check"] = {
        "max_fd_error": fd_err,
        "threshold": FD_GATE,
        "passed": fd_err <= FD_GATE,
    }
    if fd_err > FD_GATE:
        report["exit_code"] = EXIT_VIOLATION
        report["warnings"] = [
            f"gradient oracle failed: finite-difference error {fd_err:.3e} exceeds {FD_GATE}"
        ]
        _write_report(report, cfg, outdir)
        _write_timings(outdir, t_start)
        return report

    problem, cert, obj = make_certificates(problem, cfg)
    report["declared_ball_radius"] = problem.declared_ball.radius

    alpha = cfg["descent"]["alpha"]
    try:
        ledger = build_ledger(problem.F, obj, problem.theta0, cert, alpha=alpha)
    except MissingCertificate as exc:
        if alpha == "auto":
            raise InvalidConfig(
                f"alpha='auto' needs a full ledger but: {exc}"
            ) from exc
        ledger = minimal_ledger(float(alpha))
        warnings_list.append(f"minimal ledger: {exc}")
    report["ledger"] = ledger.as_dict()
    report["ntk"] = {"theta0": _ntk_summary(problem, None)}

    if not do_descent:
        report["exit_code"] = EXIT_OK
        report["warnings"] = warnings_list
        _write_report(report, cfg, outdir)
        _write_timings(outdir, t_start)
        return report

    declared_radius = (
        None if cfg["certificates"]["mode"] == "analytic" else problem.declared_ball.radius
    )
    trace, verdicts = run(
        problem.F,
        obj,
        problem.theta0,
        ledger,
        max_iter=cfg["descent"]["max_iter"],
        stop_gap=cfg["descent"]["stop_gap"],
        declared_radius=declared_radius,
    )
    report["ntk"]["theta_star"] = _ntk_summary(problem, trace.iterates[-1])
    f_star = ledger.f_star
    report["iterations"] = {
        "predicted": trace.predicted_iters,
        "actual": trace.n_steps,
        "initial_gap": None if f_star is None else float(trace.losses[0]) - f_star,
        "final_gap": None if f_star is None else float(trace.losses[-1]) - f_star,
        "stop_gap": trace.stop_gap,
        "diverged": trace.diverged,
    }
    report["verdicts"] = verdicts.as_list()

    analytic_violations = verdicts.violations(analytic_only=True)
    sampled_violations = [
        v for v in verdicts.violations() if v.certified != "analytic"
    ]
    for v in sampled_violations:
        warnings_list.append(
            f"bound {v.name} violated under sampled certificates "
            f"(measured {v.measured}, bound {v.bound})"
        )
    report["warnings"] = warnings_list
    report["exit_code"] = EXIT_VIOLATION if analytic_violations else EXIT_OK

    if "csv" in cfg["output"]["formats"]:
        _write_trace_csv(outdir / "trace.csv", trace, ledger)
        _write_bounds_csv(outdir / "bounds.csv", trace, ledger)
    _write_report(report, cfg, outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    save_theta(outdir / "theta_star.json", trace.iterates[-1], problem.model.param_shapes)
    _write_timings(outdir, t_start)
    return report


# ---------------------------------------------------------------------------
# writers


def _write_report(report: dict, cfg: dict, outdir: Path) -> None:
    if "json" not in cfg["output"]["formats"]:
        return
    outdir.mkdir(parents=True, exist_ok=True)
    text = json.dumps(report, indent=2, sort_keys=True, default=_to_py) + "\n"
    (outdir / "report.json").write_text(text, encoding="utf-8")


def _write_timings(outdir: Path, t_start: float) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "timings.json").write_text(
        json.dumps({"wall_seconds": time.perf_counter() - t_start}) + "\n",
        encoding="utf-8",
    )


def _write_trace_csv(path: Path, trace, ledger) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [
        "iter", "loss", "gap", "q_bound", "grad_norm",
        "step_norm", "step_bound", "dist_init", "dist_bound",
    ]
    lines = [",".join(cols)]
    for row in trace_table(trace, ledger):
        lines.append(",".join(_fmt(row[c]) for c in cols))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_bounds_csv(path: Path, trace, ledger) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["inequality,iter,measured,bound,holds"]
    for r in monitor_rows(trace, ledger):
        lines.append(
            f"{r.name},{r.iteration},{_fmt(r.measured)},{_fmt(r.bound)},{r.holds}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# commands


def _load_config(path: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InvalidConfig(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"config {path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    return normalize_config(raw)


def _apply_cli_overrides(cfg: dict, out: str | None, seed: int | None) -> dict:
    if out is not None:
        cfg["output"]["dir"] = out
    if seed is not None:
        cfg["certificates"]["seed"] = seed
    return cfg


def run_experiment(config_path: str, out: str | None = None, seed: int | None = None) -> int:
    """Load config, run the pipeline, write artifacts; returns the exit code."""
    try:
        cfg = _apply_cli_overrides(_load_config(config_path), out, seed)
        problem = build_problem(cfg)
        report = execute(problem, cfg, Path(cfg["output"]["dir"]))
    except PlgdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for w in report.get("warnings", []):
        print(f"warning: {w}", file=sys.stderr)
    return int(report["exit_code"])


def check_experiment(config_path: str, out: str | None = None, seed: int | None = None) -> int:
    """Certificates and ledger only (no descent); returns the exit code."""
    try:
        cfg = _apply_cli_overrides(_load_config(config_path), out, seed)
        problem = build_problem(cfg)
        report = execute(problem, cfg, Path(cfg["output"]["dir"]), do_descent=False)
    except PlgdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return int(report["exit_code"])


SWEEP_AXES = ("width", "alpha", "beta", "datasize")


def _set_axis(cfg: dict, axis: str, value: float) -> dict:
    cfg = json.loads(json.dumps(cfg))  # deep copy, keeps plain types
    prob = cfg["problem"]
    if axis == "alpha":
        cfg["descent"]["alpha"] = float(value)
    elif axis == "beta":
        if "beta" not in prob:
            raise InvalidConfig(f"family {prob['family']} has no beta to sweep")
        prob["beta"] = float(value)
    elif axis == "width":
        if prob["family"] == "supervised":
            prob["model"]["width"] = int(value)
        elif prob["family"] == "gan":
            prob["disc"]["width"] = int(value)
        else:
            prob["encoder"]["width"] = int(value)
            prob["decoder"]["width"] = int(value)
    elif axis == "datasize":
        ds = prob["dataset"]
        if ds.get("synthetic") is None:
            raise InvalidConfig("datasize sweeps require a synthetic dataset")
        key = "n_real" if ds["synthetic"].get("kind") == "two_gaussians" else "d"
        ds["synthetic"][key] = int(value)
    else:
        raise InvalidConfig(f"unknown sweep axis {axis!r}; pick one of {SWEEP_AXES}")
    return cfg


def _one_sweep_run(cfg: dict, outdir: Path) -> tuple[int, dict]:
    problem = build_problem(cfg)
    report = execute(problem, cfg, outdir)
    return int(report["exit_code"]), report


def sweep(
    config_path: str,
    axis: str,
    values: list[float],
    out: str | None = None,
    seed: int | None = None,
) -> int:
    """Run one experiment per value, in parallel, and write a summary table."""
    try:
        base = _apply_cli_overrides(_load_config(config_path), out, seed)
        if axis not in SWEEP_AXES:
            raise InvalidConfig(f"unknown sweep axis {axis!r}; pick one of {SWEEP_AXES}")
        if not values:
            raise InvalidConfig("sweep requires at least one value")
        root = Path(base["output"]["dir"])
        configs = []
        for v in values:
            cfg = _set_axis(base, axis, v)
            sub = root / f"{axis}={v:g}"
            cfg["output"]["dir"] = str(sub)
            configs.append((v, cfg, sub))
    except PlgdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    results = []
    worst = EXIT_OK
    try:
        with ThreadPoolExecutor(max_workers=min(4, len(configs))) as pool:
            futures = [
                (v, pool.submit(_one_sweep_run, cfg, sub)) for v, cfg, sub in configs
            ]
            for v, fut in futures:
                code, report = fut.result()
                worst = max(worst, code)
                results.append((v, report))
    except PlgdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    lines = ["value,lambda_N,q,iterations,dist_from_init"]
    for v, report in results:
        lam_n = report.get("ntk", {}).get("theta0", {}).get("lambda_min")
        q = report.get("ledger", {}).get("q")
        iters = report.get("iterations", {}).get("actual")
        dist = None
        for verd in report.get("verdicts", []):
            if verd["name"] == "dist_init":
                dist = verd["measured"]
        lines.append(
            f"{_fmt(v)},{_fmt(lam_n)},{_fmt(q)},{_fmt(iters)},{_fmt(dist)}"
        )
    root.mkdir(parents=True, exist_ok=True)
    (root / "summary.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return worst


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plgd",
        description="certified gradient descent experiments: run, check, sweep",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full experiment: certify, descend, verify")
    p_check = sub.add_parser("check", help="certificates and ledger only")
    p_sweep = sub.add_parser("sweep", help="run one experiment per axis value")
    for p in (p_run, p_check, p_sweep):
        p.add_argument("config", help="path to the JSON experiment config")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--seed", type=int, default=None, help="override the certificate seed")
    p_sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p_sweep.add_argument(
        "--values", required=True, help="comma-separated numeric values for the axis"
    )

    args = parser.parse_args(argv)
    if args.command == "run":
        return run_experiment(args.config, out=args.out, seed=args.seed)
    if args.command == "check":
        return check_experiment(args.config, out=args.out, seed=args.seed)
    values = [float(v) for v in args.values.split(",") if v != ""]
    return sweep(args.config, args.axis, values, out=args.out, seed=args.seed)


if __name__ == "__main__":
    sys.exit(main())
