"""Command line driver: ``ietlab <subcommand> [--config path] [flags]``.

Settings are resolved as defaults, then flags, then the config file, so a
config file always wins.  Reports are canonical JSON (sorted keys, big
integers as decimal strings); wall-clock data and output paths go to
``<out>.meta.json`` so equal configs give byte-identical reports.

Exit codes: 0 success, 1 an instance failed for another reason, 2 invalid
configuration, 3 budget exhausted.  Reports are written for codes 0, 1 and 3.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from importlib import resources

import jsonschema
import numpy as np

from .diagnostics import (RectSet, centered_tail_analysis, fit_exponential_tail, resonant_mixing_scan,
                          shearing_report, svg_histogram, svg_log_survival, tightness_report, write_samples_csv,
                          build_flow)
from .errors import (DepthExceeded, IETLabError, SearchBudgetExceeded, StepBudgetExceeded, UndefinedStep,
                     ValidationError)
from .iet import make_iet, random_iet, rotation
from .rauzy import induction_trace, lyapunov_estimate, rauzy_class_enumerate
from .rigidity import (VERIFY_BUDGET, coexistence_search, detect_rigid_towers, resonant_times, rigid_columns,
                       roth_distortion_report, verify_certificate, _safe_trace)
from .roof import make_roof, random_symlog_roof, rescale_to_mean_one

EXPERIMENTS = ("induct", "towers", "resonance", "tails", "mixing", "lyapunov", "rauzy-class", "roth")
STOCHASTIC = ("tails", "mixing", "lyapunov")
BUDGET_ERRORS = (StepBudgetExceeded, DepthExceeded, SearchBudgetExceeded)
BIG = 2**53
PATH_KEYS = ("out", "csv", "svg")

DEFAULTS = {
    "normalize": True,
    "mode": "rauzy",
    "steps": 100,
    "max_depth": 4000,
    "max_height": 10**7,
    "samples": 2000,
    "ensemble": 32,
    "k_max": 4,
    "certs": 3,
    "verify_budget": VERIFY_BUDGET,
    "floor_budget": 4 * 10**6,
    "step_budget": 10**6,
    "epsilon": 0.25,
    "epsilon_schedule": [0.45, 0.4, 0.35, 0.3],
    "positivity_window": 60,
    "source": "coexistence",
    "r2_min": 0.9,
    "growth_factor": 2.0,
    "shearing": False,
    "threads": 1,
    "roof": {"random": True, "g_level": 0.5, "mean_one": True},
    "pairs": [{"A": [[0.1, 0.3, 0.0, 0.5]], "B": [[0.2, 0.6, 0.2, 0.9]]}],
}

GOLDEN = (math.sqrt(5) - 1) / 2


# -- configuration --------------------------------------------------------------

def load_schema():
    return json.loads(resources.files("ietlab").joinpath("schemas/config.schema.json").read_text())


def _csv_ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _csv_values(text):
    out = []
    for v in text.split(","):
        v = v.strip()
        if not v:
            continue
        out.append(v if "/" in v else float(v))
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="ietlab", description="Interval exchange experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="JSON config; its values override flags")
    p.add_argument("--perm", type=_csv_ints)
    p.add_argument("--lengths", type=_csv_values)
    p.add_argument("--normalize", dest="normalize", action="store_true", default=None)
    p.add_argument("--no-normalize", dest="normalize", action="store_false")
    p.add_argument("--exact", action="store_true", default=None)
    p.add_argument("--alpha", help="rotation number: float, p/q or 'golden'")
    p.add_argument("--sample-perm", type=_csv_ints)
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("rauzy", "zorich", "roth"))
    for name in ("steps", "max-depth", "max-height", "samples", "ensemble", "k-max", "certs",
                 "verify-budget", "floor-budget", "step-budget", "positivity-window"):
        p.add_argument(f"--{name}", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--epsilon-schedule", type=_csv_values)
    p.add_argument("--source", choices=("coexistence", "rigid"))
    p.add_argument("--r2-min", type=float)
    p.add_argument("--growth-factor", type=float)
    p.add_argument("--shearing", action="store_true", default=None)
    p.add_argument("--out")
    p.add_argument("--csv", help="directory for CSV sample dumps")
    p.add_argument("--svg", help="directory for SVG plots")
    p.add_argument("--threads", type=int)
    return p


def _flags_to_config(ns):
    cfg = {"experiment": ns.experiment}
    for key, val in vars(ns).items():
        if key in ("experiment", "config", "sample_perm", "count") or val is None:
            continue
        cfg[key] = val
    if ns.sample_perm is not None or ns.count is not None:
        cfg["sample"] = {"perm": ns.sample_perm or [], "count": ns.count or 1}
    return cfg


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve_config(argv=None):
    """Parse flags and the optional config file into one validated dict."""
    ns = build_parser().parse_args(argv)
    flags = _flags_to_config(ns)
    env_threads = os.environ.get("IETLAB_THREADS")
    base = dict(DEFAULTS)
    if env_threads:
        try:
            base["threads"] = int(env_threads)
        except ValueError:
            raise ValidationError("IETLAB_THREADS must be an integer", "threads")
    cfg = _merge(base, flags)
    if ns.config:
        if not os.path.exists(ns.config):
            raise ValidationError(f"config file {ns.config} does not exist", "config")
        try:
            with open(ns.config) as fh:
                filecfg = json.load(fh)
        except json.JSONDecodeError as err:
            raise ValidationError(f"config is not valid JSON: {err}", "config")
        if not isinstance(filecfg, dict):
            raise ValidationError("config must be a JSON object", "config")
        filecfg.setdefault("experiment", ns.experiment)
        if filecfg["experiment"] != ns.experiment:
            raise ValidationError("config experiment differs from the subcommand", "experiment")
        cfg = _merge(cfg, filecfg)
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as err:
        path = ".".join(str(p) for p in err.absolute_path) or "config"
        raise ValidationError(err.message, path)
    exp = cfg["experiment"]
    if "lengths" in cfg:
        if "perm" not in cfg:
            raise ValidationError("lengths given without perm", "perm")
        if not cfg.get("normalize", True):
            vals = [Fraction(v) if isinstance(v, str) else Fraction(v).limit_denominator(10**15)
                    for v in cfg["lengths"]]
            if abs(sum(vals) - 1) > Fraction(1, 10**12):
                raise ValidationError("lengths must sum to 1 when normalize is false", "lengths")
    needs_iet = exp not in ("lyapunov", "rauzy-class")
    sources = [k for k in ("lengths", "alpha", "sample") if k in cfg]
    if needs_iet and len(sources) != 1:
        raise ValidationError("give exactly one of lengths, alpha or sample", "lengths")
    if exp in ("lyapunov", "rauzy-class") and "perm" not in cfg and "sample" not in cfg:
        raise ValidationError("a permutation is required", "perm")
    stochastic = exp in STOCHASTIC or "sample" in cfg
    if stochastic and "seed" not in cfg:
        raise ValidationError("a seed is required for stochastic experiments", "seed")
    for key in ("out", "csv", "svg"):
        if key in cfg:
            parent = os.path.dirname(os.path.abspath(cfg[key])) if key == "out" else os.path.abspath(cfg[key])
            if not os.path.isdir(parent):
                raise ValidationError(f"directory {parent} does not exist", key)
    return cfg


# -- instances ---------------------------------------------------------------------

def _alpha(val):
    if isinstance(val, str):
        if val == "golden":
            return GOLDEN
        return Fraction(val)
    return float(val)


def instances(cfg):
    """``(label, IET, rng)`` for every base transformation in the config.

    Sampled instance ``i`` uses the ``i``-th child of ``SeedSequence(seed)``
    for both its lengths and its random roof.
    """
    seed = cfg.get("seed")
    if "sample" in cfg:
        spec = cfg["sample"]
        kids = np.random.SeedSequence(seed).spawn(spec["count"])
        out = []
        for i, kid in enumerate(kids):
            rng = np.random.default_rng(kid)
            out.append((f"sample{i}", random_iet(spec["perm"], rng, exact=spec.get("exact", False)), rng))
        return out
    rng = np.random.default_rng(seed) if seed is not None else None
    if "alpha" in cfg:
        return [("rotation", rotation(_alpha(cfg["alpha"])), rng)]
    lengths = cfg["lengths"]
    exact = cfg.get("exact")
    if exact:
        lengths = [Fraction(v) if isinstance(v, str) else Fraction(v).limit_denominator(10**15) for v in lengths]
    return [("explicit", make_iet(cfg["perm"], lengths, normalize=cfg.get("normalize", True), exact=exact), rng)]


def roof_for(cfg, T, rng):
    spec = cfg.get("roof", {})
    if "c_plus" in spec or "c_minus" in spec:
        f = make_roof(T, spec.get("c_plus", []), spec.get("c_minus", []), spec.get("g"))
    else:
        if rng is None:
            raise ValidationError("a random roof needs a seed", "seed")
        f = random_symlog_roof(T, rng, g_level=spec.get("g_level", 0.5))
    return rescale_to_mean_one(f) if spec.get("mean_one", True) else f


# -- experiments ----------------------------------------------------------------------

def run_induct(cfg, T, rng, ctx):
    try:
        trace = induction_trace(T, cfg["steps"], mode=cfg["mode"])
    except UndefinedStep as err:
        trace = err.partial
        trace.stopped = trace.stopped or f"undefined step: {err}"
    return {"trace": trace.to_dict()}


def run_towers(cfg, T, rng, ctx):
    eps = cfg["epsilon"]
    trace = _safe_trace(T, cfg["steps"])
    certs = detect_rigid_towers(trace, eps) if eps < 0.5 else rigid_columns(trace, eps)
    out = []
    for c in certs:
        ver = verify_certificate(T, c, cfg["verify_budget"])
        out.append({"certificate": c.to_dict(),
                    "verified_shift": None if ver is None else [float(ver[0]), float(ver[1])]})
    return {"certificates": out, "trace_steps": len(trace)}


def run_resonance(cfg, T, rng, ctx):
    res = resonant_times(T, cfg["epsilon"], cfg["k_max"], cfg["max_depth"], max_height=cfg["max_height"],
                         verify_budget=cfg["verify_budget"])
    return {"resonances": [r.to_dict() for r in res]}


def tail_certificates(cfg, T, f):
    """The ``certs`` tallest certified rigidity towers for the tails experiment."""
    Tf = T.as_float()
    if cfg["source"] == "coexistence":
        recs = coexistence_search(Tf, f, cfg["epsilon_schedule"], cfg["positivity_window"], cfg["max_depth"],
                                  max_height=cfg["max_height"])
        by_height = {}
        for r in recs:
            by_height.setdefault(r.certificate.height, r.certificate)
        certs = [by_height[h] for h in sorted(by_height)]
    else:
        eps = cfg["epsilon"]
        trace = _safe_trace(Tf, cfg["max_depth"], max_height=cfg["max_height"])
        certs = sorted(rigid_columns(trace, eps, area_floor=1 - eps), key=lambda c: c.height)
    if not certs:
        raise DepthExceeded(cfg["max_height"], None, partial=[],
                            message=f"no certified rigidity tower below max_height {cfg['max_height']}")
    return certs[-cfg["certs"]:]


def run_tails(cfg, T, rng, ctx):
    f = roof_for(cfg, T, rng)
    certs = tail_certificates(cfg, T, f)
    seed = int(rng.integers(2**62))
    pairs = centered_tail_analysis(T.as_float(), f, certs, cfg["samples"], seed, r2_min=cfg["r2_min"])
    sets = []
    for sset, rep in pairs:
        sets.append({"set": sset.to_dict(), "tail": rep.to_dict()})
        stem = f"{ctx['label']}_h{sset.rigidity_time}"
        if "csv" in cfg:
            write_samples_csv(sset, os.path.join(cfg["csv"], stem + ".csv"))
        if "svg" in cfg:
            svg_histogram(sset.samples, os.path.join(cfg["svg"], stem + "_hist.svg"))
            svg_log_survival(sset.samples, os.path.join(cfg["svg"], stem + "_survival.svg"), rep)
    tight = tightness_report([p[0] for p in pairs], cfg["growth_factor"]).to_dict() if len(pairs) >= 3 else None
    ok = bool(pairs) and all(p[1].passed for p in pairs) and (tight is None or tight["pass"])
    return {"roof": f.to_dict(), "sample_seed": seed, "sets": sets, "tightness": tight, "pass": ok}


def run_mixing(cfg, T, rng, ctx):
    f = roof_for(cfg, T, rng)
    Tf = T.as_float()
    res = resonant_times(Tf, cfg["epsilon"], cfg["k_max"], cfg["max_depth"], max_height=cfg["max_height"],
                         verify_budget=cfg["verify_budget"])
    if not res:
        return {"roof": f.to_dict(), "resonances": [], "scan": None}
    q = max(r.q for r in res)
    chosen = [r for r in res if r.q == q]
    pairs = [(RectSet(p["A"]), RectSet(p["B"])) for p in cfg["pairs"]]
    engine = build_flow(Tf, f, floor_budget=cfg["floor_budget"])

    def flow(x, s, t):
        return engine.flow(x, s, t, pass_budget=cfg["step_budget"])

    seed = int(rng.integers(2**62))
    scan = resonant_mixing_scan(Tf, f, chosen, pairs, max(cfg["samples"], 10**4), seed, flow=flow)
    out = {"roof": f.to_dict(), "resonances": [r.to_dict() for r in chosen], "scan": scan.to_dict(),
           "sample_seed": seed}
    if cfg["shearing"]:
        out["shearing"] = [shearing_report(Tf, f, float(r.r), samples=64, seed=seed, tower=r, engine=engine).to_dict()
                           for r in chosen]
    return out


def run_lyapunov(cfg, T, rng, ctx):
    perm = cfg.get("perm") or cfg["sample"]["perm"]
    return {"estimate": lyapunov_estimate(perm, cfg["ensemble"], cfg["steps"], cfg["seed"]).to_dict()}


def run_rauzy_class(cfg, T, rng, ctx):
    g = rauzy_class_enumerate(cfg.get("perm") or cfg["sample"]["perm"])
    return {"vertex_count": len(g.vertices), "graph": g.to_dict()}


def run_roth(cfg, T, rng, ctx):
    try:
        trace = induction_trace(T, cfg["steps"], mode="roth", store_matrices=False)
    except UndefinedStep as err:
        trace = err.partial
    return {"report": roth_distortion_report(trace, cfg["epsilon"]).to_dict()}


RUNNERS = {"induct": run_induct, "towers": run_towers, "resonance": run_resonance, "tails": run_tails,
           "mixing": run_mixing, "lyapunov": run_lyapunov, "rauzy-class": run_rauzy_class, "roth": run_roth}


# -- output ---------------------------------------------------------------------

def canonical(obj):
    """JSON-ready copy: big integers and fractions become strings, numpy scalars become Python values."""
    if isinstance(obj, dict):
        return {str(k): canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [canonical(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        v = int(obj)
        return str(v) if abs(v) >= BIG else v
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def dumps(report) -> str:
    return json.dumps(canonical(report), sort_keys=True, indent=2) + "\n"


def execute(cfg):
    """Run the configured experiment; returns ``(report, exit_code)``."""
    exp = cfg["experiment"]
    runner = RUNNERS[exp]
    if exp in ("lyapunov", "rauzy-class"):
        jobs = [("perm", None, None)]
    else:
        jobs = instances(cfg)

    def one(job):
        label, T, rng = job
        try:
            return {"label": label, "status": "ok", "result": runner(cfg, T, rng, {"label": label})}
        except BUDGET_ERRORS as err:
            partial = getattr(err, "partial", None)
            return {"label": label, "status": "budget_exhausted", "error": str(err),
                    "partial": partial if isinstance(partial, (dict, list, str, int, float)) else None}
        except ValidationError:
            raise
        except IETLabError as err:
            return {"label": label, "status": "error", "error": f"{type(err).__name__}: {err}"}

    with ThreadPoolExecutor(max_workers=cfg["threads"]) as pool:
        results = list(pool.map(one, jobs))
    statuses = {r["status"] for r in results}
    code = 3 if "budget_exhausted" in statuses else (1 if "error" in statuses else 0)
    echo = {k: v for k, v in cfg.items() if k not in PATH_KEYS}
    report = {"experiment": exp, "config": echo, "results": results,
              "status": {0: "ok", 1: "error", 3: "budget_exhausted"}[code]}
    return report, code


def write_report(report, out, meta):
    text = dumps(report)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
        with open(out + ".meta.json", "w") as fh:
            fh.write(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    started = time.time()
    out = None
    try:
        cfg = resolve_config(argv)
        out = cfg.get("out")
        report, code = execute(cfg)
    except ValidationError as err:
        field = err.field or "config"
        sys.stderr.write(f"error: {field}: {err}\n")
        return 2
    except IETLabError as err:
        sys.stderr.write(f"error: {err}\n")
        return 2
    meta = {"started": started, "finished": time.time(), "threads": cfg["threads"],
            "paths": {k: cfg[k] for k in PATH_KEYS if k in cfg}}
    write_report(report, out, meta)
    return code


if __name__ == "__main__":
    sys.exit(main())
