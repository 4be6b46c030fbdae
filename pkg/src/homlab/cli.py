"""Command-line experiment runner.

    homlab <subcommand> --config PATH [--out DIR] [--threads K] [--seed S]

Subcommands: validate-params, dissipation-sweep, hom-step, holder-track,
field-check.  Configs are INI files with sections [params], [solver],
[experiment] and [output]; unknown sections or keys are rejected.  Every
emitted file starts with a header carrying the config hash and an echo of
the parameters.

Exit codes: 0 ok, 1 acceptance failure (strict contexts), 2 usage or config
error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields as dc_fields
from typing import Optional

import numpy as np

from . import diag, grid
from .errors import ConfigError, HomlabError
from .fields import (VelocityHierarchy, check_gradPhi_identity, taylor_error_series,
                     velocity)
from .grid import GridField2D, spectral
from .homogen import two_scale_compare
from .params import AbsoluteParams, validate_constraints
from .pdesolver import SolverConfig, sample_umax, solve_batch, zero_velocity

__all__ = ["ExperimentConfig", "parse_config", "load_config", "config_hash",
           "run_validate_params", "run_dissipation_sweep", "run_hom_step",
           "run_holder_track", "run_field_check", "sweep", "main"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


# -- configuration ------------------------------------------------------------------

def _opt_float(s):
    return None if s.lower() in ("none", "") else float(s)


def _opt_int(s):
    return None if s.lower() in ("none", "") else int(s)


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    return [float(x) for x in s.replace(",", " ").split()]


def _ints(s):
    return [int(x) for x in s.replace(",", " ").split()]


def _float_or_word(*words):
    def conv(s):
        w = s.strip().lower()
        if w in words:
            return w
        return float(s)
    return conv


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


_PARAM_TYPES = {"beta": float, "b": float, "alpha0": float, "alpha_prime": float,
                "s": float, "gamma_I": float, "gamma_R": float, "gamma_S": float,
                "gamma": float, "e": _opt_float, "lambda0": int, "Nstar": int,
                "N": int, "Q": int, "mode": str}

# (converter, default)
_SOLVER = {
    "N": (int, 256),
    "cfl": (float, 0.4),
    "dt_max": (float, 2.5e-4),
    "mu_fraction": (float, 1.0 / 16.0),
    "u_scale": (_float_or_word("auto", "none"), "none"),
    "diff_number": (_opt_float, None),
    "min_ppw": (float, 6.0),
}

_EXPERIMENT = {
    "qmax": (int, 2),
    "q": (int, 0),
    "T": (float, 1.0),
    "kappas": (_float_or_word("schedule"), "schedule"),
    "kappa_list": (_floats, []),
    "datum": (str, "random"),
    "datum_alpha_prime": (_opt_float, None),
    "datum_nmax": (_opt_int, None),
    "seed": (int, 0),
    "snapshot_every": (float, 0.05),
    "mollify": (_bool, False),
    "mollify_c": (float, 0.1),
    "mollify_depth": (int, 2),
    "holder_alpha": (_opt_float, None),
    "lambdas": (_ints, [8, 16, 32, 64]),
    "mu_factor": (float, 0.125),
    "hom_kappa": (float, 0.02),
    "sqrt_delta": (_float_or_word("balanced"), "balanced"),
    "n_snap": (int, 16),
    "nstar_list": (_ints, [1, 2, 3, 4]),
    "beta0": (float, 0.25),
    "field_times": (int, 5),
    "strict": (_bool, False),
    "min_dissipation": (float, 0.05),
    "max_holder_ratio": (float, 3.0),
}

_OUTPUT = {"dir": (str, "out")}


@dataclass
class ExperimentConfig:
    """Parsed experiment configuration (all values typed, defaults filled)."""

    params: AbsoluteParams
    solver: dict = field(default_factory=dict)
    experiment: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["params"] = {k: _fmt(v) for k, v in self.params.to_dict().items()}
        cp["solver"] = {k: _fmt(self.solver[k]) for k in _SOLVER}
        cp["experiment"] = {k: _fmt(self.experiment[k]) for k in _EXPERIMENT}
        cp["output"] = {k: _fmt(self.output[k]) for k in _OUTPUT}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @property
    def hash(self) -> str:
        return config_hash(self)

    def solver_config(self, **kw) -> SolverConfig:
        s = self.solver
        base = dict(N=s["N"], cfl=s["cfl"], dt_max=s["dt_max"], mu_fraction=s["mu_fraction"],
                    diff_number=s["diff_number"])
        if isinstance(s["u_scale"], float):
            base["u_scale"] = s["u_scale"]
        base.update(kw)
        return SolverConfig(**base)


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(cfg.to_ini().encode()).hexdigest()[:16]


def parse_config(text: str) -> ExperimentConfig:
    """Parse INI text; raises ConfigError on unknown keys or bad values."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config: {exc}") from exc
    if not cp.sections():
        raise ConfigError("config is empty")
    known = {"params", "solver", "experiment", "output"}
    extra = set(cp.sections()) - known
    if extra:
        raise ConfigError(f"unknown section(s): {sorted(extra)}")

    def section(name, schema):
        out = {k: d for k, (_, d) in schema.items()}
        if name not in cp:
            return out
        for key, raw in cp[name].items():
            if key not in schema:
                raise ConfigError(f"unknown key [{name}] {key}")
            try:
                out[key] = schema[key][0](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for [{name}] {key}: {raw!r}") from exc
        return out

    pvals = {}
    if "params" in cp:
        for key, raw in cp["params"].items():
            if key not in _PARAM_TYPES:
                raise ConfigError(f"unknown key [params] {key}")
            try:
                pvals[key] = _PARAM_TYPES[key](raw.strip())
            except ValueError as exc:
                raise ConfigError(f"bad value for [params] {key}: {raw!r}") from exc
    try:
        params = AbsoluteParams(**pvals)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(params, section("solver", _SOLVER),
                            section("experiment", _EXPERIMENT), section("output", _OUTPUT))


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


# -- report emission ----------------------------------------------------------------

def _header(cfg: ExperimentConfig, what: str):
    p = cfg.params
    return [f"homlab {what}", f"config_hash={cfg.hash}",
            "params " + " ".join(f"{k}={_fmt(v)}" for k, v in p.to_dict().items()),
            "solver " + " ".join(f"{k}={_fmt(v)}" for k, v in cfg.solver.items())]


def _write_csv(path, cfg, what, columns, rows):
    with open(path, "w", newline="") as fh:
        for line in _header(cfg, what):
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in r])


def _write_json(path, cfg, what, payload):
    doc = {"header": {"tool": f"homlab {what}", "config_hash": cfg.hash,
                      "params": cfg.params.to_dict(), "solver": cfg.solver},
           **payload}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _write_dat(path, cfg, what, pairs):
    with open(path, "w") as fh:
        for line in _header(cfg, what):
            fh.write(f"# {line}\n")
        for x, y in pairs:
            fh.write(f"{x!r} {y!r}\n")


# -- experiments --------------------------------------------------------------------

def make_datum(cfg: ExperimentConfig, N: int) -> GridField2D:
    ex = cfg.experiment
    if ex["datum"] == "random":
        ap = ex["datum_alpha_prime"] or cfg.params.alpha_prime
        return diag.random_datum(N, ap, ex["seed"], ex["datum_nmax"])
    if ex["datum"] == "modes":
        x1, x2 = spectral(N).grid()
        return GridField2D(np.sin(2 * np.pi * x1) + np.sin(2 * np.pi * x2), 0.0, "modes")
    if ex["datum"] == "sin":
        x1, _ = spectral(N).grid()
        return GridField2D(np.sin(2 * np.pi * x1), 0.0, "sin")
    raise ConfigError(f"unknown datum {ex['datum']!r} (random, modes, sin)")


def mollify_datum(rho: GridField2D, hier: VelocityHierarchy, cfg: ExperimentConfig, T: float):
    """Mollify at scale r * ell with ell = ||rho||_2 / ||grad^s rho||_2.

    The admissible window for r^s ell^(s-1) is
    [c^-s ringLambda^((b gamma - 1) s) / ell, c (kappa T)^(1/2)] at q0 = 0.
    Both ends are reported; r is taken at the geometric mean when the window
    is non-empty and at the upper end otherwise, then r ell is clipped to the
    mollifier's domain.
    """
    p, ex = cfg.params, cfg.experiment
    s, c = p.s, ex["mollify_c"]
    ell = math.sqrt(float(np.mean(rho.values ** 2))) / diag.sobolev_norm(rho, s)
    g0 = hier.gens[0]
    lo = c ** (-s) * g0.ringLambda_q ** ((p.b * p.gamma - 1.0) * s) / ell
    hi = c * math.sqrt(g0.kappa_q * T)
    target = math.sqrt(lo * hi) if lo <= hi else hi
    r = (target / ell ** (s - 1.0)) ** (1.0 / s)
    scale = min(max(r * ell, 1e-6), 0.2499)
    info = dict(ell=ell, r=r, scale=scale, window_lo=lo, window_hi=hi, window_ok=lo <= hi)
    return diag.mollify(rho, scale, ex["mollify_depth"]), info


def sweep(cfg: ExperimentConfig):
    """Shared runs of dissipation-sweep and holder-track.

    Solves every diffusivity (scheduled kappa_q for q = 0..qmax, or an
    explicit list) under the top velocity u_qmax as one batch, and records
    the C^alpha0 estimate of each scalar at every snapshot.
    """
    ex = cfg.experiment
    N = cfg.solver["N"]
    qmax = ex["qmax"]
    hier = VelocityHierarchy(cfg.params, N, qmax, min_ppw=cfg.solver["min_ppw"]) \
        if qmax >= 1 else VelocityHierarchy(cfg.params, N, 0)
    rho = make_datum(cfg, N)
    moll = None
    if ex["mollify"]:
        rho, moll = mollify_datum(rho, hier, cfg, ex["T"])
    if ex["kappa_list"]:
        kappas = list(ex["kappa_list"])
    elif ex["kappas"] == "schedule":
        kappas = [hier.gens[q].kappa_q for q in range(qmax + 1)]
    else:
        kappas = [float(ex["kappas"])]
    vel = zero_velocity(N) if qmax == 0 else hier.velocity_field(qmax, "u")
    extra = {}
    if cfg.solver["u_scale"] == "auto" and qmax >= 1:
        extra["u_scale"] = sample_umax(vel, 0.0, ex["T"])
    mu_active = hier.gens[qmax].mu_q if qmax >= 1 else None
    sc = cfg.solver_config(mu_active=mu_active, snapshot_every=ex["snapshot_every"], **extra)
    alpha = ex["holder_alpha"] or cfg.params.alpha0
    holder = [[] for _ in kappas]
    sp = spectral(N)

    def observe(t, spectra):
        for b in range(spectra.shape[0]):
            est = diag.holder_norm(GridField2D(sp.ifft(spectra[b]), t), alpha)
            holder[b].append((t, est.value))

    finals, traces = solve_batch(rho, vel, kappas, ex["T"], sc, observers=[observe])
    l2in = float(np.mean(rho.values ** 2) - np.mean(rho.values) ** 2)
    rows = []
    for q, (k, tr) in enumerate(zip(kappas, traces)):
        rows.append(dict(q=q, kappa=k, D=diag.dissipation(tr), D_over_l2in=diag.dissipation(tr) / l2in,
                         l2_final=tr.l2sq[-1], residual=abs(0.5 * tr.l2sq[-1] + tr.D - 0.5 * tr.l2sq[0])
                         / (0.5 * tr.l2sq[0]), holder_max=max(v for _, v in holder[q]),
                         steps=tr.steps))
    return dict(hier=hier, rho=rho, kappas=kappas, traces=traces, holder=holder,
                rows=rows, l2in=l2in, alpha=alpha, mollify=moll)


def _ensure(out):
    os.makedirs(out, exist_ok=True)
    return out


def run_validate_params(cfg: ExperimentConfig, out: str):
    rep = validate_constraints(cfg.params, max(1, cfg.experiment["qmax"]))
    _ensure(out)
    _write_json(os.path.join(out, "constraints.json"), cfg, "validate-params", rep.to_dict())
    _write_csv(os.path.join(out, "constraints.csv"), cfg, "validate-params",
               ["name", "left", "op", "right", "satisfied", "margin"],
               [(c.name, c.left, c.op, c.right, c.satisfied, c.margin) for c in rep.entries])
    code = EXIT_OK if (rep.overall or cfg.params.mode == "desk") else EXIT_FAIL
    return rep, code


def run_dissipation_sweep(cfg: ExperimentConfig, out: str, result=None):
    res = result or sweep(cfg)
    _ensure(out)
    rows = res["rows"]
    _write_csv(os.path.join(out, "sweep.csv"), cfg, "dissipation-sweep",
               ["q", "kappa", "D", "D_over_l2in", "l2_final", "residual", "steps"],
               [(r["q"], r["kappa"], r["D"], r["D_over_l2in"], r["l2_final"], r["residual"],
                 r["steps"]) for r in rows])
    for r, tr in zip(rows, res["traces"]):
        tr.to_csv(os.path.join(out, f"trace_q{r['q']}.csv"), _header(cfg, "dissipation-sweep"))
    _write_dat(os.path.join(out, "sweep.dat"), cfg, "dissipation-sweep",
               [(r["kappa"], r["D_over_l2in"]) for r in rows])
    kap = res["kappas"]
    drop = kap[0] / kap[-1] if kap[-1] > 0 else float("inf")
    ok = all(r["D_over_l2in"] >= cfg.experiment["min_dissipation"] for r in rows)
    _write_json(os.path.join(out, "sweep.json"), cfg, "dissipation-sweep",
                dict(rows=rows, kappa_drop=drop, l2in=res["l2in"], pass_=ok,
                     mollify=res["mollify"]))
    code = EXIT_FAIL if cfg.experiment["strict"] and not ok else EXIT_OK
    return res, code


def run_holder_track(cfg: ExperimentConfig, out: str, result=None):
    res = result or sweep(cfg)
    _ensure(out)
    rows = []
    for q, series in enumerate(res["holder"]):
        for t, v in series:
            rows.append((q, t, v))
    _write_csv(os.path.join(out, "holder.csv"), cfg, "holder-track", ["q", "t", "holder"], rows)
    maxima = [max(v for _, v in s) for s in res["holder"]]
    ratio = max(maxima) / min(maxima)
    _write_dat(os.path.join(out, "holder.dat"), cfg, "holder-track",
               [(q, m) for q, m in enumerate(maxima)])
    ok = ratio <= cfg.experiment["max_holder_ratio"]
    _write_json(os.path.join(out, "holder.json"), cfg, "holder-track",
                dict(alpha=res["alpha"], max_per_q=maxima, ratio=ratio, pass_=ok))
    code = EXIT_FAIL if cfg.experiment["strict"] and not ok else EXIT_OK
    return dict(maxima=maxima, ratio=ratio, result=res), code


def run_hom_step(cfg: ExperimentConfig, out: str, threads: int = 1):
    ex = cfg.experiment
    N = cfg.solver["N"]
    rho = make_datum(cfg, N)
    sd = None if ex["sqrt_delta"] == "balanced" else float(ex["sqrt_delta"])
    sc = cfg.solver_config()

    def one(lam):
        return two_scale_compare(ex["q"], ex["hom_kappa"], rho, ex["T"], [lam],
                                 mu_factor=ex["mu_factor"], sqrt_delta=sd, config=sc,
                                 params=cfg.params, n_snap=ex["n_snap"])

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        parts = list(pool.map(one, ex["lambdas"]))
    rep = parts[0]
    for p in parts[1:]:
        rep.rows.extend(p.rows)
    rep.fit()
    _ensure(out)
    rep.to_json(os.path.join(out, "hom_step.json"),
                extra={"header": {"tool": "homlab hom-step", "config_hash": cfg.hash,
                                  "params": cfg.params.to_dict()}})
    rep.to_csv(os.path.join(out, "hom_step.csv"), _header(cfg, "hom-step"))
    _write_dat(os.path.join(out, "hom_step.dat"), cfg, "hom-step",
               [(1.0 / r.lam, r.e1) for r in rep.rows])
    ok = (rep.order_e1 >= 0.7 if len(rep.rows) >= 2 else True)
    code = EXIT_FAIL if ex["strict"] and not ok else EXIT_OK
    return rep, code


def level_holder_table(hier: VelocityHierarchy, beta0: float, times):
    """max over ``times`` of the C^beta0 estimate of each level increment perp_grad psibar_q."""
    rows = []
    for q in range(1, hier.qmax + 1):
        best = 0.0
        for t in times:
            P = hier._psibar_hat(q, t)
            if P is None:
                continue
            sp = hier.sp
            for comp in (sp.d2 * P, -sp.d1 * P):
                best = max(best, diag.holder_norm(GridField2D.from_hat(comp * sp.nonyq, sp.N),
                                                  beta0).value)
        rows.append((q, best))
    return rows


def run_field_check(cfg: ExperimentConfig, out: str):
    ex = cfg.experiment
    N = cfg.solver["N"]
    qmax = max(1, ex["qmax"])
    hier = VelocityHierarchy(cfg.params, N, qmax, min_ppw=cfg.solver["min_ppw"])
    mu_top = hier.gens[qmax].mu_q
    times = [(k + 0.5) / (ex["field_times"] * mu_top) * 2.0 for k in range(ex["field_times"])]
    div_rows = []
    for q in range(1, qmax + 1):
        for t in times:
            div_rows.append((q, t, velocity(hier, q, "u", t).divergence_ratio()))
    _, t_tay, errs = taylor_error_series(hier, 1, ex["nstar_list"])
    tay_rows = list(zip(ex["nstar_list"], errs))
    r_rows = []
    for q in range(1, qmax):
        for t in times:
            r_rows.append((q, t, check_gradPhi_identity(hier, q, t, "u")))
    lev = level_holder_table(hier, ex["beta0"], times)
    _ensure(out)
    _write_csv(os.path.join(out, "divergence.csv"), cfg, "field-check", ["q", "t", "ratio"], div_rows)
    _write_csv(os.path.join(out, "taylor.csv"), cfg, "field-check", ["Nstar", "sup_error"], tay_rows)
    _write_csv(os.path.join(out, "gradphi.csv"), cfg, "field-check", ["q", "t", "r"], r_rows)
    _write_csv(os.path.join(out, "level_holder.csv"), cfg, "field-check", ["q", "holder_beta0"], lev)
    _write_dat(os.path.join(out, "taylor.dat"), cfg, "field-check", tay_rows)
    div_max = max(r[2] for r in div_rows)
    mono = all(b < a for a, b in zip(errs, errs[1:]))
    summary = dict(divergence_max=div_max, taylor_t=t_tay, taylor_errors=errs,
                   taylor_monotone=mono, gradphi=r_rows, level_holder=lev)
    _write_json(os.path.join(out, "field_check.json"), cfg, "field-check", summary)
    ok = div_max <= 1e-10 and mono
    code = EXIT_FAIL if ex["strict"] and not ok else EXIT_OK
    return summary, code


# -- entry point --------------------------------------------------------------------

_COMMANDS = ("validate-params", "dissipation-sweep", "hom-step", "holder-track", "field-check")


def build_parser():
    ap = argparse.ArgumentParser(prog="homlab", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=_COMMANDS)
    ap.add_argument("--config", required=True, help="INI experiment config")
    ap.add_argument("--out", help="output directory (overrides [output] dir)")
    ap.add_argument("--threads", type=int, default=1, help="FFT and sweep workers")
    ap.add_argument("--seed", type=int, help="datum seed (overrides [experiment] seed)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"homlab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None:
        cfg.experiment["seed"] = args.seed
    out = args.out or cfg.output["dir"]
    grid.set_threads(args.threads)
    try:
        if args.command == "validate-params":
            rep, code = run_validate_params(cfg, out)
            print(f"overall={'pass' if rep.overall else 'fail'} failed={len(rep.failed())}")
        elif args.command == "dissipation-sweep":
            res, code = run_dissipation_sweep(cfg, out)
            for r in res["rows"]:
                print(f"q={r['q']} kappa={r['kappa']:.4g} D/|rho_in|^2={r['D_over_l2in']:.4f}")
        elif args.command == "holder-track":
            res, code = run_holder_track(cfg, out)
            print(f"holder max per q={['%.4g' % m for m in res['maxima']]} ratio={res['ratio']:.3f}")
        elif args.command == "hom-step":
            rep, code = run_hom_step(cfg, out, args.threads)
            print(f"order e0={rep.order_e0:.3f} e1={rep.order_e1:.3f} threshold={rep.threshold}")
        else:
            res, code = run_field_check(cfg, out)
            print(f"divergence max={res['divergence_max']:.3g} taylor={res['taylor_errors']}")
    except ConfigError as exc:
        print(f"homlab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HomlabError as exc:
        print(f"homlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"homlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return code


if __name__ == "__main__":
    sys.exit(main())
