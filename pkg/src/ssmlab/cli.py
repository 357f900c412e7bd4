"""ssm-lab: command-line front end writing CSV/JSON/PNG artifacts and a one-line JSON summary."""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .config import (
    ConfigError,
    load_json,
    measure_source,
    model_from_dict,
    plan_from_dict,
    scan_from_dict,
)
from .fourier import ConfigError as SystemConfigError
from .ifs import DEFAULT_BUDGET, BudgetError, self_similar_truncation
from .measure import DiscreteMeasure
from .model import (
    Bernoulli,
    Explicit,
    PrefixTooShortError,
    delta_n,
    eta_truncated,
    model_sdim,
    rotation_report,
    verify_convolution_decomposition,
    verify_dynamic_self_similarity,
)

EXIT_OK, EXIT_INVALID, EXIT_BUDGET = 0, 1, 2
SUBCOMMANDS = ("render", "entropy", "dim", "fourier", "model-sim", "disintegrate", "ek-scan", "verify")

SUMMARY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ssm-lab run summary",
    "type": "object",
    "required": ["subcommand", "status"],
    "properties": {
        "subcommand": {"enum": list(SUBCOMMANDS)},
        "status": {"enum": ["ok", "invalid", "budget"]},
        "error": {"type": "string"},
        "outputs": {"type": "array", "items": {"type": "string"}},
        "seed": {"type": ["integer", "null"]},
        "dynamic_self_similarity": {"type": "boolean"},
        "convolution_decomposition": {"type": "boolean"},
        "disintegration": {"type": "boolean"},
        "split": {"type": "boolean"},
        "atoms": {"type": "integer", "minimum": 0},
        "sigma": {"type": "number"},
        "slope": {"type": "number"},
        "satdim": {"enum": [0, 1, 2]},
        "bad_fractions": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
    },
    "allOf": [
        {"if": {"properties": {"status": {"const": "ok"}}},
         "then": {"required": ["outputs"]},
         "else": {"required": ["error"]}},
    ],
}


class ValidationFailure(ValueError):
    pass


class UsageParser(argparse.ArgumentParser):
    """argparse with exit code 1 (validation failure) instead of 2 on bad usage."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def parse_levels(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(".."))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"levels must look like A..B, got {text!r}") from exc
    if a < 1 or b < a:
        raise argparse.ArgumentTypeError("levels need 1 <= A <= B")
    return a, b


def _positive(text: str) -> int:
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = UsageParser(prog="ssm-lab", description="Planar self-similar measure laboratory.")
    p.add_argument("--version", action="version", version=f"ssm-lab {__version__}")
    sub = p.add_subparsers(dest="subcommand", metavar="{" + ",".join(SUBCOMMANDS) + "}", parser_class=UsageParser)
    helps = {
        "render": "PNG heat map of a truncated measure",
        "entropy": "normalized dyadic entropy H_n per level (CSV)",
        "dim": "entropy-dimension slope, local dimension and satdim",
        "fourier": "Fourier decay fit over dyadic bands",
        "model-sim": "draw omega and truncate eta^(omega)",
        "disintegrate": "verify the block disintegration and the split identity",
        "ek-scan": "bad-set scan over a theta grid, optionally with the trace suite",
        "verify": "exact identity checks for an IFS, model or plan config",
    }
    for name in SUBCOMMANDS:
        s = sub.add_parser(name, help=helps[name])
        s.add_argument("--config", type=Path, required=name != "ek-scan")
        s.add_argument("--out", type=Path, default=Path("ssm-lab-out"))
        s.add_argument("--seed", type=int)
        s.add_argument("--depth", type=_positive)
        s.add_argument("--levels", type=parse_levels)
        s.add_argument("--grid", type=_positive)
        s.add_argument("--budget", type=_positive, default=DEFAULT_BUDGET)
        s.add_argument("--tolerance", type=float)
        if name in ("model-sim", "render", "entropy", "dim", "fourier", "verify"):
            s.add_argument("--prefix", help="comma-separated labels pinning the start of omega")
        if name == "dim":
            s.add_argument("--scale", type=_positive, default=4, help="saturation scale m")
            s.add_argument("--component-level", type=int, default=2, help="component level k")
        if name == "fourier":
            s.add_argument("--pisot", type=int, default=0, help="also report |mu^(theta^n)| for n <= N, theta = 1/lambda")
        if name == "ek-scan":
            s.add_argument("--traces", type=int, default=0, help="also run the trace suite on this many traces")
    return p


# helpers ------------------------------------------------------------------------

def _labels(model, prefix: str | None) -> tuple:
    if not prefix:
        return ()
    lookup = {str(l): l for l in model.labels}
    out = []
    for tok in prefix.split(","):
        tok = tok.strip()
        if tok not in lookup:
            raise ValidationFailure(f"prefix label {tok!r} is not one of {sorted(lookup)}")
        out.append(lookup[tok])
    return tuple(out)


def _deterministic(model) -> bool:
    sel = model.selection
    return isinstance(sel, Explicit) or (isinstance(sel, Bernoulli) and sum(1 for v in sel.q.values() if v > 0) == 1)


def load_measure(args, default_depth: int = 10) -> tuple[DiscreteMeasure, dict]:
    """Truncated measure from an IFS or model config at --depth, honouring --prefix and --seed.

    Without --depth the truncation is default_depth levels, shortened to fit the budget.
    """
    doc = load_json(args.config)
    kind = measure_source(doc)
    depth = args.depth or default_depth
    if kind == "plan":
        raise ValidationFailure("this subcommand needs an IFS or model config")
    model = model_from_dict(doc, args.seed)
    prefix = _labels(model, getattr(args, "prefix", None)) or tuple(doc.get("prefix", ()))
    if not _deterministic(model) and len(prefix) < depth and args.seed is None:
        raise ValidationFailure("--seed is required for a random selection")
    omega = model.omega(depth, prefix)
    if not args.depth:
        # without an explicit --depth, stop at the deepest level whose word count fits the budget
        words, keep = 1, 0
        for s in omega:
            words *= model.systems[s].k
            if words > args.budget:
                break
            keep += 1
        depth, omega = max(1, keep), omega[: max(1, keep)]
    if kind == "ifs":
        mu = self_similar_truncation(model.systems["A"], depth, args.budget)
    else:
        mu = eta_truncated(model, omega, args.budget)
    return mu, {"kind": kind, "depth": depth, "model": model, "omega": omega}


def _write(out: Path, name: str, data, outputs: list) -> None:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    if isinstance(data, bytes):
        path.write_bytes(data)
    else:
        path.write_text(data)
    outputs.append(str(path))


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _omega_text(omega) -> str:
    return ",".join(str(s) for s in omega)


# subcommands ----------------------------------------------------------------------

def cmd_render(args) -> dict:
    from .render import occupancy_fraction, render_measure

    mu, info = load_measure(args)
    res = args.grid or 512
    png = render_measure(mu, res)
    outputs: list = []
    _write(args.out, "render.png", png, outputs)
    return {"outputs": outputs, "atoms": len(mu), "resolution": res,
            "occupancy": occupancy_fraction(mu, res), "sha256": hashlib.sha256(png).hexdigest()}


def cmd_entropy(args) -> dict:
    from .dimension import entropy_dimension_curve

    mu, info = load_measure(args)
    a, b = args.levels or (1, 10)
    rep = entropy_dimension_curve(mu, range(a, b + 1))
    rows = ["level,H_n,trusted"] + [f"{n},{h!r},{int(t)}" for n, h, t in zip(rep.levels, rep.entropies, rep.trusted)]
    outputs: list = []
    _write(args.out, "entropy.csv", "\n".join(rows) + "\n", outputs)
    return {"outputs": outputs, "atoms": len(mu), "levels": [a, b], "H_last": rep.entropies[-1],
            "slope": rep.slope, "resolution_level": rep.resolution_level}


def cmd_dim(args) -> dict:
    from .dimension import entropy_dimension_curve, local_dimension_samples, satdim_report

    mu, info = load_measure(args)
    a, b = args.levels or (1, 10)
    rep = entropy_dimension_curve(mu, range(a, b + 1))
    eps = 0.1 if args.tolerance is None else args.tolerance
    seed = 0 if args.seed is None else args.seed
    radii = 2.0 ** -np.arange(0, max(b, 9) + 1, dtype=float)
    radii = radii[radii >= 2.0 ** -rep.resolution_level] if math.isfinite(rep.resolution_level) else radii
    local = []
    if len(mu) > 1 and radii.size >= 2 and radii.max() / radii.min() >= 100:
        local = [s for _, s in local_dimension_samples(mu, radii, 64, seed)]
    sat = satdim_report(mu, eps, args.scale, args.component_level, args.grid)
    outputs: list = []
    _write(args.out, "entropy_curve.csv", rep.to_csv(), outputs)
    report = {"curve": rep.as_dict(), "local_dimension": local, "satdim": sat.as_dict()}
    _write(args.out, "dim.json", _dump(report), outputs)
    return {"outputs": outputs, "atoms": len(mu), "slope": rep.slope,
            "local_dimension_median": float(np.median(local)) if local else None, "satdim": sat.satdim}


def cmd_fourier(args) -> dict:
    from .fourier import decay_exponent, fourier

    mu, info = load_measure(args)
    band = args.levels or (1, 8)
    fit = decay_exponent(mu, (band[0], band[1]), per_band=args.grid or 256)
    outputs: list = []
    _write(args.out, "decay.csv", fit.to_csv(), outputs)
    summary = {"outputs": outputs, "atoms": len(mu), "sigma": fit.sigma, "bands": list(band), "flags": fit.flags}
    if args.pisot:
        lam = info["model"].lam(info["model"].labels[0])
        theta = 1 / lam
        vals = np.abs(fourier(mu, [theta**n for n in range(1, args.pisot + 1)]))
        rows = ["n,abs_fourier"] + [f"{n},{v!r}" for n, v in enumerate(vals, 1)]
        _write(args.out, "pisot.csv", "\n".join(rows) + "\n", outputs)
        summary["pisot_min"] = float(vals.min())
    return summary


def cmd_model_sim(args) -> dict:
    if args.seed is None:
        raise ValidationFailure("model-sim needs --seed")
    doc = load_json(args.config)
    if measure_source(doc) == "plan":
        raise ValidationFailure("model-sim needs an IFS or model config")
    model = model_from_dict(doc, args.seed)
    depth = args.depth or 8
    prefix = _labels(model, args.prefix) or tuple(doc.get("prefix", ()))
    omega = model.omega(depth, prefix)
    mu = eta_truncated(model, omega, args.budget)
    outputs: list = []
    _write(args.out, "measure.csv", mu.to_csv(), outputs)
    report = {
        "omega": [str(s) for s in omega],
        "atoms": len(mu),
        "sdim": model_sdim(model),
        "delta_n": delta_n(model, omega, args.budget),
        "support_radius": model.support_radius(),
        "rotation": rotation_report(model),
    }
    _write(args.out, "model.json", _dump(report), outputs)
    return {"outputs": outputs, "atoms": len(mu), "omega": _omega_text(omega), "sdim": report["sdim"],
            "delta_n": report["delta_n"]}


def _plan_checks(doc: dict, args) -> dict:
    from .disintegrate import (
        block_sdim_closed_form,
        build_block_model,
        nondegeneracy_check,
        similarity_dimension_mp,
        verify_disintegration,
        verify_split,
    )

    plan, lam = plan_from_dict(doc)
    if lam is None:
        raise ValidationFailure("plan config needs lambda")
    m = args.depth or 2
    dis = verify_disintegration(plan, lam, m, args.budget)
    s = plan.s or 2
    block = build_block_model(plan, lam, seed=0 if args.seed is None else args.seed, budget=args.budget)
    omega = block.omega(s * m)
    split = verify_split(plan, lam, omega, s, args.budget)
    report = {
        "disintegration": dis.as_dict(),
        "split": split.as_dict(),
        "block_sdim": float(block_sdim_closed_form(plan, lam)),
        "sdim": float(similarity_dimension_mp(plan, lam)),
        "nondegeneracy": nondegeneracy_check(plan, lam).as_dict(),
    }
    return {"disintegration": bool(dis), "split": bool(split), "report": report}


def cmd_disintegrate(args) -> dict:
    doc = load_json(args.config)
    if measure_source(doc) != "plan":
        raise ValidationFailure("disintegrate needs a plan config")
    res = _plan_checks(doc, args)
    outputs: list = []
    _write(args.out, "disintegrate.json", _dump(res["report"]), outputs)
    r = res["report"]
    return {"outputs": outputs, "disintegration": res["disintegration"], "split": res["split"],
            "max_atom_mismatch": max(r["disintegration"]["max_atom_mismatch"], r["split"]["max_atom_mismatch"]),
            "weight_residue": r["disintegration"]["weight_residue"], "block_sdim": r["block_sdim"]}


def cmd_verify(args) -> dict:
    doc = load_json(args.config)
    kind = measure_source(doc)
    outputs: list = []
    if kind == "plan":
        res = _plan_checks(doc, args)
        _write(args.out, "verify.json", _dump(res["report"]), outputs)
        return {"outputs": outputs, "disintegration": res["disintegration"], "split": res["split"]}
    model = model_from_dict(doc, args.seed)
    depth = args.depth or 6
    prefix = _labels(model, args.prefix) or tuple(doc.get("prefix", ()))
    if not _deterministic(model) and len(prefix) < depth and args.seed is None:
        raise ValidationFailure("--seed is required for a random selection")
    omega = model.omega(depth, prefix)
    dss = verify_dynamic_self_similarity(model, omega, 1, args.budget)
    conv = verify_convolution_decomposition(model, omega, depth // 2, args.budget)
    _write(args.out, "verify.json", _dump({"dynamic_self_similarity": dss.as_dict(),
                                           "convolution_decomposition": conv.as_dict()}), outputs)
    return {"outputs": outputs, "dynamic_self_similarity": bool(dss), "convolution_decomposition": bool(conv)}


def cmd_ek_scan(args) -> dict:
    from .badset import bad_set_scan, thread_count
    from .ek import random_blocks, trace_suite
    from .render import render_grid

    settings = scan_from_dict(load_json(args.config) if args.config else {})
    if args.seed is None:
        raise ValidationFailure("ek-scan needs --seed (omega is random)")
    grid = args.grid or 200
    outputs: list = []
    jobs = []
    for d in range(settings["draws"]):
        blocks = random_blocks(np.random.default_rng([args.seed, d]), max(settings["M"]) + 1, float(settings["q1"]))
        jobs += [(d, M, blocks[: M + 1]) for M in settings["M"]]

    def scan(job):
        return bad_set_scan(job[2], settings["betas"], settings["rho"], settings["delta"], settings["annulus"],
                            grid_size=grid, quantifier=settings["quantifier"])

    # scans are independent; results are written in job order so outputs do not depend on scheduling
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        reports = list(pool.map(scan, jobs))
    fractions, per_draw = [], [[] for _ in range(settings["draws"])]
    for (d, M, _), rep in zip(jobs, reports):
        _write(args.out, f"scan_d{d}_M{M}.csv", rep.to_csv(), outputs)
        img = np.where(rep.inside, rep.bad.astype(float), np.nan).reshape(grid, grid)
        _write(args.out, f"scan_d{d}_M{M}.png", render_grid(img), outputs)
        per_draw[d].append(rep.summary())
        fractions.append(rep.bad_fraction)
    report = {"settings": {k: (v.__dict__ if k == "annulus" else v) for k, v in settings.items()}, "scans": per_draw}
    summary = {"bad_fractions": fractions}
    if args.traces:
        suite = trace_suite(args.traces, args.seed, settings["annulus"])
        report["trace_suite"] = suite.as_dict()
        summary["trace_suite_ok"] = all([suite.eps_ok, suite.approx_ok, suite.unique_ok, suite.count_ok, suite.bound_ok])
    _write(args.out, "ek_scan.json", _dump(report), outputs)
    summary["outputs"] = outputs
    return summary


COMMANDS = {
    "render": cmd_render,
    "entropy": cmd_entropy,
    "dim": cmd_dim,
    "fourier": cmd_fourier,
    "model-sim": cmd_model_sim,
    "disintegrate": cmd_disintegrate,
    "ek-scan": cmd_ek_scan,
    "verify": cmd_verify,
}


def _emit(summary: dict) -> None:
    summary = json.loads(json.dumps(summary, default=_json_default))
    jsonschema.validate(summary, SUMMARY_SCHEMA)
    print(json.dumps(summary, sort_keys=True, separators=(",", ":")))


def run(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in SUBCOMMANDS and not argv[0].startswith("-"):
        parser.print_usage(sys.stderr)
        if argv:
            print(f"ssm-lab: error: unknown subcommand {argv[0]!r}", file=sys.stderr)
        return EXIT_INVALID
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        return EXIT_INVALID
    base = {"subcommand": args.subcommand, "seed": args.seed}
    try:
        result = COMMANDS[args.subcommand](args)
    except BudgetError as exc:
        print(f"ssm-lab: budget exhausted: {exc}", file=sys.stderr)
        _emit({**base, "status": "budget", "error": str(exc)})
        return EXIT_BUDGET
    except (ConfigError, SystemConfigError, ValidationFailure, PrefixTooShortError, ValueError) as exc:
        print(f"ssm-lab: {exc}", file=sys.stderr)
        _emit({**base, "status": "invalid", "error": str(exc)})
        return EXIT_INVALID
    _emit({**base, "status": "ok", **result})
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
