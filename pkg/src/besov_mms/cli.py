"""besov-mms command line front end.

Every command reads a space-description JSON (``--input``) and writes
``<command>.json`` (summary) and ``<command>.csv`` (one row per sample) into
``--out``.  The exit code is 0 iff every exact invariant checked by the
command holds; otherwise the first failing invariant is named on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import examples
from .besov import (besov_energy_dyadic, besov_energy_integral, envelope_bracket,
                    inhomogeneous_norm)
from .chains import boundary_chain, mesh_step, proximity_graph, verify_chain
from .core import BesovParams, DomainWithBoundary, load_space
from .hyperfill import (EPSILON, FillingParams, build_filling, composed_trace,
                        default_samples, verify_filling)
from .nets import maximal_separated_net, verify_whitney, whitney_cover
from .partition import PartitionOfUnity, verify_partition
from .trace import (ParameterWindowError, check_extension_window, check_trace_window,
                    fractional_maximal, log_lambda_grid, operator_norm_report,
                    roundtrip_check, trace, weak11_check, whitney_extension)

SCHEMA = "# besov-mms schema v1"
DIGITS = 12


# ---------------------------------------------------------------------------
# output


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), f".{DIGITS}g")
    return "" if x is None else str(x)


def _clean(obj):
    """JSON-ready copy with floats rounded to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return str(v)
        return float(format(v, f".{DIGITS}g"))
    return obj


def write_json(path: Path, doc, rounded: bool = True) -> None:
    """Sorted-key JSON; reports are rounded, generated spaces keep full precision."""
    path.write_text(json.dumps(_clean(doc) if rounded else doc, sort_keys=True, indent=2) + "\n")


def write_csv(path: Path, rows: list[dict], columns: list[str] | None = None) -> None:
    columns = columns or sorted({k for r in rows for k in r})
    with path.open("w", newline="") as fh:
        fh.write(SCHEMA + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c)) for c in columns])


@dataclass
class Outcome:
    summary: dict
    rows: list[dict]
    columns: list[str] | None = None
    checks: list[tuple[str, bool]] = field(default_factory=list)

    @property
    def failing(self) -> str | None:
        for name, ok in self.checks:
            if not ok:
                return name
        return None


# ---------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    command: str
    input: str | None
    out: Path
    alpha: float
    p: float
    q: float
    theta: float
    beta: float | None
    levels: int | None
    aest: float
    subdiv: int
    scales: list[float] | None
    samples: int
    seed: int
    function: str
    size: int | None = None
    example: str | None = None

    @property
    def params(self) -> BesovParams:
        return BesovParams(self.alpha, self.p, self.q, self.theta)


def _domain(space, domain) -> DomainWithBoundary:
    if domain is None:
        raise SystemExit("this command needs a space with a boundary")
    return domain


def _coordinate(space, idx: np.ndarray) -> np.ndarray:
    if space.coords is not None:
        return space.coords[idx, 0].astype(float)
    return idx.astype(float) / max(space.n - 1, 1)


def _named_function(name: str, space, idx: np.ndarray) -> np.ndarray:
    if name == "x":
        return _coordinate(space, idx)
    if name == "constant":
        return np.ones(idx.size)
    if name == "indicator":
        x = _coordinate(space, idx)
        return (x >= np.median(x)).astype(float)
    raise SystemExit(f"unknown function {name!r}; choose x, constant or indicator")


def random_functions(space, idx: np.ndarray, count: int, seed: int) -> dict[str, np.ndarray]:
    """Seeded random trigonometric polynomials of the coordinates (Gaussian values without coords)."""
    rng = np.random.default_rng(seed)
    out = {}
    for j in range(count):
        if space.coords is None:
            vals = rng.normal(size=idx.size)
        else:
            x = space.coords[idx]
            vals = np.zeros(idx.size)
            for k in range(1, 5):
                v = rng.normal(size=x.shape[1])
                vals += rng.normal() / k * np.cos(np.pi * k * (x @ v) + rng.uniform(0, 2 * np.pi))
        out[f"f{j:03d}"] = vals
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_net(cfg, space, domain) -> Outcome:
    r = cfg.scales[0] if cfg.scales else space.diameter / 4
    net = maximal_separated_net(space, r, 0)
    members = np.asarray(net.members)
    d = space.block(members, members)
    np.fill_diagonal(d, np.inf)
    separated = bool(d.min() >= r) if members.size > 1 else True
    maximal = bool(np.all(space.block(np.arange(space.n), members).min(axis=1) < r))
    rows = [{"order": k, "point": int(c)} for k, c in enumerate(net.members)]
    summary = {"separation": r, "size": len(net.members), "separated": separated, "maximal": maximal}
    return Outcome(summary, rows, ["order", "point"], [("separation", separated), ("maximality", maximal)])


def _cover_rows(cover) -> list[dict]:
    return [{"i": b.level, "j": b.index, "center": b.center, "radius": b.radius, "anchor": b.anchor,
             "shadow_size": len(b.shadow)} for b in cover.balls]


def cmd_whitney(cfg, space, domain) -> Outcome:
    domain = _domain(space, domain)
    cover = whitney_cover(domain)
    rep = verify_whitney(cover, domain)
    summary = {"balls": len(cover.balls), "checks": rep.rows(), "passed": rep.passed}
    return Outcome(summary, _cover_rows(cover), ["i", "j", "center", "radius", "anchor", "shadow_size"],
                   [(c.name, c.passed) for c in rep.checks])


def cmd_partition_verify(cfg, space, domain) -> Outcome:
    domain = _domain(space, domain)
    cover = whitney_cover(domain)
    part = PartitionOfUnity.from_cover(space, cover)
    pts = domain.interior
    rep = verify_partition(part, pts)
    sums = part.weights(pts).sum(axis=1)
    rows = [{"point": int(x), "sum": float(s)} for x, s in zip(pts, sums)]
    summary = {"max_sum_deviation": rep.max_sum_deviation, "support_ok": rep.support_ok,
               "lipschitz_max": rep.lipschitz_max, "balls": len(part)}
    return Outcome(summary, rows, ["point", "sum"],
                   [("sum_to_one", rep.max_sum_deviation <= 1e-9), ("support", rep.support_ok)])


def cmd_energy(cfg, space, domain) -> Outcome:
    idx = np.arange(space.n)
    u = _named_function(cfg.function, space, idx)
    params = cfg.params
    dy = besov_energy_dyadic(space, u, params)
    summary = {"dyadic": dy.value, "k_range": list(dy.k_range), "tail": dy.tail,
               "inhomogeneous": inhomogeneous_norm(space, u, params)}
    checks = []
    if not math.isinf(params.q):
        summary["integral"] = besov_energy_integral(space, u, params).value
        br = envelope_bracket(space, u, params)
        summary["envelope"] = {"lower": br.lower, "value": br.value, "upper": br.upper}
        checks.append(("envelope_bracket", br.holds))
    const = besov_energy_dyadic(space, np.ones(space.n), params).value
    checks.append(("constant_energy_zero", const == 0.0))
    return Outcome(summary, dy.table, ["k", "E", "contribution"], checks)


def _check_constant_trace(domain, params, scales) -> bool:
    tr = trace(domain, np.full(domain.n_interior, 3.0), params, scales)
    return bool(np.all(tr.values == 3.0))


def cmd_trace(cfg, space, domain) -> Outcome:
    domain = _domain(space, domain)
    u = _named_function(cfg.function, space, domain.interior)
    tr = trace(domain, u, cfg.params, cfg.scales)
    rows = []
    for k, r in enumerate(tr.scales):
        rows.append({"k": k, "r": r,
                     "cauchy_diff": tr.cauchy_diffs[k - 1] if k else None,
                     "cauchy_ratio": tr.cauchy_ratios[k - 1] if k else None,
                     "residual_max": float(np.max(tr.residuals[k]))})
    summary = {"values": tr.values, "boundary": domain.boundary, "decay_slope": tr.decay_slope,
               "residual_root": tr.residual_root, "exponent": tr.exponent}
    return Outcome(summary, rows, ["k", "r", "cauchy_diff", "cauchy_ratio", "residual_max"],
                   [("trace_of_constant", _check_constant_trace(domain, cfg.params, cfg.scales))])


def cmd_extend(cfg, space, domain) -> Outcome:
    domain = _domain(space, domain)
    f = _named_function(cfg.function, space, domain.boundary)
    ext = whitney_extension(domain, f)
    const = whitney_extension(domain, np.full(domain.n_boundary, 3.0), ext.cover).values
    hull = bool(np.all(ext.values >= f.min()) and np.all(ext.values <= f.max()))
    rows = [{"point": int(x), "value": float(v)} for x, v in zip(domain.interior, ext.values)]
    summary = {"balls": len(ext.cover.balls), "min": float(ext.values.min()), "max": float(ext.values.max())}
    return Outcome(summary, rows, ["point", "value"],
                   [("extension_of_constant", bool(np.all(const == 3.0))), ("convex_hull", hull)])


def cmd_roundtrip(cfg, space, domain) -> Outcome:
    domain = _domain(space, domain)
    f = _named_function(cfg.function, space, domain.boundary)
    rep = roundtrip_check(domain, f, cfg.params, cfg.scales)
    e = rep.extension.values
    hull_e = bool(np.all(e >= f.min()) and np.all(e <= f.max()))
    hull_t = bool(np.all(rep.trace.values >= e.min()) and np.all(rep.trace.values <= e.max()))
    rows = [{"point": int(b), "f": float(a), "trace": float(t), "deviation": float(d)}
            for b, a, t, d in zip(domain.boundary, f, rep.trace.values, rep.deviation)]
    summary = {"max_deviation": rep.max_deviation, "lp_deviation": rep.lp_deviation}
    checks = [("extension_hull", hull_e), ("trace_hull", hull_t)]
    if np.all(f == f[0]):
        checks.append(("constant_roundtrip", rep.max_deviation == 0.0))
    return Outcome(summary, rows, ["point", "f", "trace", "deviation"], checks)


def _radius(cfg, domain) -> float:
    return cfg.scales[0] if cfg.scales else domain.space.diameter


def cmd_maximal(cfg, space, domain) -> Outcome:
    domain = _domain(space, domain)
    if cfg.function == "x":
        f = random_functions(space, domain.interior, 1, cfg.seed)["f000"]
    else:
        f = _named_function(cfg.function, space, domain.interior)
    R = _radius(cfg, domain)
    m = fractional_maximal(domain, f, cfg.theta, R)
    rows = [{"point": int(b), "maximal": float(v)} for b, v in zip(domain.boundary, m)]
    return Outcome({"R": R, "theta": cfg.theta, "max": float(m.max())}, rows, ["point", "maximal"],
                   [("finite", bool(np.all(np.isfinite(m))))])


def cmd_weak11(cfg, space, domain) -> Outcome:
    domain = _domain(space, domain)
    R = _radius(cfg, domain)
    fs = random_functions(space, domain.interior, cfg.samples, cfg.seed)
    rows, maxima = [], {}
    for name, f in sorted(fs.items()):
        m = fractional_maximal(domain, f, cfg.theta, R)
        table = weak11_check(domain, f, cfg.theta, R, log_lambda_grid(m))
        maxima[name] = table.max_normalized
        rows += [{"function": name, **r} for r in table.rows()]
    summary = {"R": R, "theta": cfg.theta, "max_by_function": maxima,
               "max": max(maxima.values()) if maxima else 0.0}
    return Outcome(summary, rows, ["function", "lambda", "nu_level", "normalized"],
                   [("finite", all(math.isfinite(v) for v in maxima.values()))])


def cmd_chain(cfg, space, domain) -> Outcome:
    domain = _domain(space, domain)
    b = domain.boundary
    z, w = (int(b[len(b) // 4]), int(b[(3 * len(b)) // 4])) if len(b) >= 4 else (int(b[0]), int(b[-1]))
    graph = proximity_graph(domain, mesh_step(domain))
    chain = boundary_chain(domain, z, w, graph, a_est=cfg.aest)
    rep = verify_chain(chain, domain)
    rows = [{"k": int(k), "center": c, "radius": r, "level": lv}
            for k, c, r, lv in zip(chain.signed_index, chain.centers, chain.radii, chain.levels)]
    return Outcome({"chain": chain.to_json(), "report": rep.to_json()}, rows,
                   ["k", "center", "radius", "level"],
                   [("eight_dilate_inside", rep.eight_dilate_inside), ("half_balls_meet", rep.half_balls_meet)])


def _filling_params(cfg) -> FillingParams:
    beta = EPSILON if cfg.beta is None else cfg.beta
    return FillingParams(5 if cfg.levels is None else cfg.levels, beta)


def cmd_fill(cfg, space, domain) -> Outcome:
    filling = build_filling(space, _filling_params(cfg))
    doc = filling.to_json()
    rows = [{"vertex": k, **v} for k, v in enumerate(doc["vertices"])]
    summary = {"vertices": filling.n_vertices, "edges": filling.n_edges, "scale": filling.scale,
               "total_measure": filling.total_measure, "filling": doc}
    return Outcome(summary, rows, ["vertex", "z", "n", "d_X", "mu_hat"], [("connected", True)])


def cmd_fill_verify(cfg, space, domain) -> Outcome:
    fp = _filling_params(cfg)
    filling = build_filling(space, fp)
    rep = verify_filling(filling, default_samples(filling))
    summary = {"sigma": rep.sigma, "doubling": rep.doubling, "codimension": [rep.codim_min, rep.codim_max],
               "bilipschitz": [rep.bilip_min, rep.bilip_max], "L": rep.bilip_L, "truncation": rep.truncation}
    return Outcome(summary, rep.rows, ["check", "vertex", "r", "value", "upper"],
                   [("sigma_is_beta_over_log2", rep.sigma == fp.beta / EPSILON)])


def cmd_composed_trace(cfg, space, domain) -> Outcome:
    domain = _domain(space, domain)
    u = _named_function(cfg.function, space, domain.interior)
    res = composed_trace(domain, u, cfg.params, levels=cfg.levels, m=cfg.subdiv, scales=cfg.scales)
    const = composed_trace(domain, np.full(domain.n_interior, 3.0), cfg.params, levels=cfg.levels,
                           m=cfg.subdiv, scales=cfg.scales)
    rows = [{"point": int(b), "value": float(v), "residual_root": float(r)}
            for b, v, r in zip(domain.boundary, res.values, res.residual_root)]
    summary = {"beta": res.beta, "sigma": res.sigma, "levels": res.filling.params.levels,
               "stage_params": [res.stage_params.alpha, res.stage_params.p, res.stage_params.q,
                                res.stage_params.theta]}
    return Outcome(summary, rows, ["point", "value", "residual_root"],
                   [("composed_trace_of_constant", bool(np.all(const.values == 3.0)))])


def cmd_norms(cfg, space, domain) -> Outcome:
    domain = _domain(space, domain)
    ui = random_functions(space, domain.interior, cfg.samples, cfg.seed)
    fb = random_functions(space, domain.boundary, cfg.samples, cfg.seed + 1)
    rep = operator_norm_report(domain, cfg.params, ui, fb, cfg.scales)
    rows = [{"family": r.family, "function": r.function, "lhs": r.lhs, "rhs": r.rhs, "ratio": r.ratio}
            for r in rep.rows]
    finite = all(r.ratio is None or math.isfinite(r.ratio) for r in rep.rows)
    return Outcome({"family_max": rep.family_max()}, rows, ["family", "function", "lhs", "rhs", "ratio"],
                   [("finite_ratios", finite)])


COMMANDS = {
    "net": cmd_net,
    "whitney": cmd_whitney,
    "partition-verify": cmd_partition_verify,
    "energy": cmd_energy,
    "trace": cmd_trace,
    "extend": cmd_extend,
    "roundtrip": cmd_roundtrip,
    "maximal": cmd_maximal,
    "weak11": cmd_weak11,
    "chain": cmd_chain,
    "fill": cmd_fill,
    "fill-verify": cmd_fill_verify,
    "composed-trace": cmd_composed_trace,
    "norms": cmd_norms,
}


def validate_windows(cfg: RunConfig) -> None:
    """Parameter windows of the dispatched pipeline, checked before any work."""
    params = cfg.params
    if cfg.command in ("trace", "roundtrip", "composed-trace"):
        check_trace_window(params)
    if cfg.command == "norms":
        check_trace_window(params)
        check_extension_window(params.alpha - params.theta / params.p, params)
    if cfg.command == "composed-trace" and not params.theta / params.p < params.alpha < 1:
        raise ParameterWindowError("composed trace theorem needs theta/p < alpha < 1")
    if cfg.command in ("fill", "fill-verify") and cfg.beta is not None and not cfg.beta > 0:
        raise ParameterWindowError("hyperbolic filling theorem needs beta > 0")


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="besov-mms", description="Besov trace and extension on finite metric measure spaces")
    ap.add_argument("command", choices=["gen"] + sorted(COMMANDS))
    ap.add_argument("example", nargs="?", help="example name for gen")
    ap.add_argument("--input")
    ap.add_argument("--out", default=".")
    ap.add_argument("--size", type=int)
    ap.add_argument("--alpha", type=float, default=0.75)
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--q", type=float, default=2.0)
    ap.add_argument("--theta", type=float, default=1.0)
    ap.add_argument("--beta", type=float)
    ap.add_argument("--levels", type=int)
    ap.add_argument("--aest", type=float, default=4.0)
    ap.add_argument("--subdiv", type=int, default=2)
    ap.add_argument("--scales", type=lambda s: [float(v) for v in s.split(",") if v])
    ap.add_argument("--samples", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--function", default="x", help="x, constant or indicator")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    if args.command == "gen":
        if not args.example:
            print("gen needs an example name", file=sys.stderr)
            return 2
        try:
            doc = examples.generate(args.example, args.size)
        except ValueError as exc:
            print(str(exc), file=sys.stderr)
            return 2
        target = out if out.suffix == ".json" else out / f"{args.example}.json"
        target.parent.mkdir(parents=True, exist_ok=True)
        write_json(target, doc, rounded=False)
        return 0

    cfg = RunConfig(
        command=args.command, input=args.input, out=out, alpha=args.alpha, p=args.p, q=args.q,
        theta=args.theta, beta=args.beta, levels=args.levels, aest=args.aest, subdiv=args.subdiv,
        scales=args.scales, samples=args.samples, seed=args.seed, function=args.function,
    )
    if not cfg.input:
        print("--input is required", file=sys.stderr)
        return 2
    try:
        validate_windows(cfg)
    except ParameterWindowError as exc:
        print(f"parameter window: {exc}", file=sys.stderr)
        return 2
    space, domain, _ = load_space(cfg.input)
    try:
        outcome = COMMANDS[cfg.command](cfg, space, domain)
    except (ValueError, ArithmeticError) as exc:
        print(f"{cfg.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    out.mkdir(parents=True, exist_ok=True)
    summary = dict(outcome.summary)
    summary["invariants"] = {name: ok for name, ok in outcome.checks}
    write_json(out / f"{cfg.command}.json", summary)
    write_csv(out / f"{cfg.command}.csv", outcome.rows, outcome.columns)
    bad = outcome.failing
    if bad:
        print(f"invariant failed: {bad}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
