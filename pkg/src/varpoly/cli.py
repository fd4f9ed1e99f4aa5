"""Command line entry point: ``varpoly <command> <file>``.

Exit codes: 0 success, 2 unreadable or invalid problem file, 3 refused
precondition (named on stderr), 4 internal consistency or solver failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict

import numpy as np

from . import __version__
from .config import ConsistencyError, LPError, PreconditionError, SolveError
from .epi_oracle import (
    QuotientGrid,
    epi_convergence_probe,
    sampled_d2,
    sampled_strict_d2,
    write_quotient_csv,
)
from .geneq import GeneralizedEquation, localization_jacobian, localization_probe, stability_report
from .polyhedral import member
from .problem_file import ParseError, ProblemFile, load, serialize
from .prox import (
    ProxProblem,
    envelope_fd_gradient,
    is_origin_indicator,
    manifold_projection_jacobian,
    moreau_gradient,
    prox_c1_check,
    prox_details,
    prox_jacobian,
)
from .report import dumps, report
from .second_order import (
    analyze,
    critical_cone_g,
    graph_regularity_report,
    second_subderivative,
    strict_second_subderivative,
)
from .smooth import CompositeProblem, PolyMap

DEFAULT_R = (0.1, 0.5, 1.0)


def _base(pf: ProblemFile, cp: CompositeProblem):
    if cp.x_bar is None or cp.v_bar is None:
        raise ParseError("[points] needs 'x' and 'v' for this command")
    return cp.x_bar, cp.v_bar


def _directions(pf: ProblemFile):
    if "w" in pf.params:
        return [np.array(w) for w in pf.params["w"]]
    E = np.eye(pf.n)
    return [s * e for e in E for s in (1.0, -1.0)]


def cmd_analyze(pf: ProblemFile, tol, seed: int) -> tuple[dict, list]:
    cp = pf.problem(tol)
    x, v = _base(pf, cp)
    rep = analyze(cp, x, v)
    lam = rep.lam.representative()
    if "lambda" in pf.points:
        lam = pf.point("lambda")
        if not member(rep.lam.description, lam):
            raise PreconditionError("lambda_is_multiplier", f"lambda={lam.tolist()} is not a multiplier for v")
    verdicts = {
        "soqc": rep.soqc,
        "bcq": rep.bcq,
        "nondegenerate": rep.nondegenerate,
        "unique_multiplier": rep.lam.is_singleton,
        "tilt_stable": "inconclusive" if rep.tilt_stable is None and rep.soqc and rep.lam.is_singleton
        else rep.tilt_stable,
    }
    certs = {
        "multipliers": rep.lam.description,
        "multiplier": lam,
        "soqc_certificate": rep.soqc_certificate,
        "critical_cone_g": critical_cone_g(cp, x, lam),
        "critical_cone_phi": rep.critical_cone,
        "gamma_bar": rep.gamma_bar,
    }
    if rep.soqc and rep.lam.is_singleton:
        gr = graph_regularity_report(cp, x, v, seed=seed)
        verdicts["graph_regular"] = gr.equal
        certs["graph_regularity"] = asdict(gr)
    return {"verdicts": verdicts, "certificates": certs}, []


def _grid(pf: ProblemFile, n: int, seed: int) -> QuotientGrid:
    levels = pf.params.get("levels", (1e-1, 1e-4))
    grid = QuotientGrid.default(n, t_max=max(levels), t_min=min(levels), seed=seed)
    if "base_count" in pf.params:
        grid = QuotientGrid(grid.t_values, grid.levels, grid.ball, grid.strict_steps, pf.params["base_count"])
    return grid


def _agrees(formula: float, sampled: float) -> bool:
    if np.isinf(formula):
        return sampled > 1e3
    return abs(sampled - formula) <= 1e-3


def cmd_subderiv(pf: ProblemFile, tol, seed: int) -> tuple[dict, list]:
    cp = pf.problem(tol)
    x, v = _base(pf, cp)
    grid = _grid(pf, cp.n, seed)
    # the strict sampler takes base pairs near (x, v) without asking phi(x) to be near phi(x_bar).
    # Under SOQC that is harmless; otherwise the formulas are unavailable and only samples are reported.
    soqc = analyze(cp, x, v).soqc
    rows, records = [], []
    ok = True if soqc else None
    for w in _directions(pf):
        s1 = sampled_d2(cp, x, v, w, grid)
        s2 = sampled_strict_d2(cp, x, v, w, grid, seed=seed)
        d2 = ds = a1 = a2 = None
        if soqc:
            d2 = second_subderivative(cp, x, v, w)
            ds = strict_second_subderivative(cp, x, v, w)
            a1, a2 = _agrees(d2, s1.value), _agrees(ds, s2.value)
            ok = ok and a1 and a2
        rows.append({"w": w, "d2": d2, "d2_sampled": s1.value, "d2_level_minima": s1.level_minima,
                     "strict": ds, "strict_sampled": s2.value, "strict_level_minima": s2.level_minima,
                     "d2_agrees": a1, "strict_agrees": a2})
        records.extend(s1.records)
    verdicts = {"all_agree": ok, "value_closeness_assumed": not soqc}
    return {"verdicts": verdicts, "tables": {"directions": rows, "levels": list(grid.levels)}}, records


def cmd_geneq(pf: ProblemFile, tol, seed: int) -> tuple[dict, list]:
    cp = pf.problem(tol, base=False)
    ge = GeneralizedEquation(pf.f_map(), cp, pf.point("u"))
    x = pf.point("x")
    rep = stability_report(ge, x)
    verdicts = {"nondegenerate": rep.nondegenerate, "mr": rep.mr, "smr": rep.smr}
    certs = {"A": rep.A if rep.nondegenerate else None, "B": rep.B, "K_bar": rep.K_bar,
             "criteria": rep.criteria, "sigma_jacobian": rep.sigma_jacobian}
    tables = {}
    if rep.mr:
        probe = localization_probe(ge, x, pf.params.get("radius", 1e-3), pf.params.get("count", 8), seed)
        tables["probe"] = {"radius": probe.radius, "fd_jacobian": probe.fd_jacobian,
                           "deviation": probe.deviation, "lipschitz": probe.lipschitz}
    return {"verdicts": verdicts, "certificates": certs, "tables": tables}, []


def cmd_prox(pf: ProblemFile, tol, seed: int) -> tuple[dict, list]:
    cp = pf.problem(tol)
    x, v = _base(pf, cp)
    rho = pf.params.get("rho_user", 1.0)
    rs = [r for r in pf.params.get("r", DEFAULT_R) if r > 0 and (rho <= 0 or r < 1.0 / rho)]
    if not rs:
        raise PreconditionError("prox_parameter", f"no r value lies in (0, 1/{rho})")
    rows = []
    for r in rs:
        pp = ProxProblem(cp, r, rho_user=rho, radius=pf.params.get("radius"))
        c = pp.center
        det = prox_details(pp, c)
        grad = moreau_gradient(pp, c)
        fd = envelope_fd_gradient(pp, c)
        c1 = prox_c1_check(pp, seed=seed)
        row = {"r": r, "center": c, "prox": det.point, "global_differs_from_local": det.global_differs,
               "moreau_gradient": grad, "envelope_fd_gradient": fd,
               "moreau_deviation": float(np.abs(grad - fd).max()),
               "verdict": c1.verdict, "probe_status": c1.status, "probe_discontinuity": c1.discontinuity,
               "jump_location": c1.jump_location, "prox_jacobian": None}
        if c1.verdict == "C1":
            J = prox_jacobian(pp)
            ge = GeneralizedEquation(PolyMap.identity(cp.n), pp.scaled, c)
            row["prox_jacobian"] = J
            row["geneq_jacobian_deviation"] = float(np.abs(J - localization_jacobian(ge, x)).max())
        rows.append(row)
    certs = {}
    if is_origin_indicator(cp.g) and not np.any(v):
        certs["manifold_projection_jacobian"] = manifold_projection_jacobian(cp, x)
    return {"verdicts": {"C1": [row["verdict"] == "C1" for row in rows]}, "certificates": certs,
            "tables": {"r_values": rows}}, []


def cmd_epi(pf: ProblemFile, tol, seed: int) -> tuple[dict, list]:
    cp = pf.problem(tol)
    x, v = _base(pf, cp)
    levels = pf.params.get("levels", (1e-1, 1e-2, 1e-3, 1e-4))
    probe = epi_convergence_probe(cp, x, v, rho=pf.params.get("rho", 1.0), levels=levels,
                                  base_count=pf.params.get("base_count", 8), seed=seed)
    return {"verdicts": {"status": probe.status, "pattern": probe.pattern, "ri_verdict": probe.ri_verdict},
            "tables": {"t_levels": probe.t_levels, "distances": probe.distances}}, probe.records


COMMANDS = {
    "analyze": cmd_analyze,
    "subderiv": cmd_subderiv,
    "geneq": cmd_geneq,
    "prox": cmd_prox,
    "epi": cmd_epi,
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="varpoly", description="Second-order analysis of g(Phi(x)) problems.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("file")
    p.add_argument("--out", help="write the JSON report here instead of standard output")
    p.add_argument("--csv", help="write sampled quotients (t, w_prime, quotient) here")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--tol", action="append", default=[], metavar="KEY=VAL",
                   help="override a tolerance, e.g. --tol act=1e-8 (repeatable)")
    return p


def _tol_overrides(items) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ParseError(f"--tol expects KEY=VAL, got {item!r}")
        k, val = item.split("=", 1)
        try:
            out[k.strip()] = float(val)
        except ValueError:
            raise ParseError(f"--tol value for {k!r} is not a number") from None
    return out


def _write(text: str, path: str | None):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    inputs: dict = {"file": args.file}
    provenance = {"seed": args.seed, "version": __version__}
    status, body, records, error = 0, {}, [], None
    try:
        try:
            pf = load(args.file)
        except OSError as exc:
            raise ParseError(f"cannot read {args.file}: {exc.strerror}") from None
        inputs["problem"] = serialize(pf).splitlines()
        try:
            tol = pf.tolerances(_tol_overrides(args.tol))
        except KeyError as exc:
            raise ParseError(str(exc.args[0])) from None
        provenance["tolerances"] = asdict(tol)
        # overflow shows up as a reported failure below, not as a numpy warning
        with np.errstate(over="ignore", invalid="ignore"):
            body, records = COMMANDS[args.command](pf, tol, args.seed)
    except ParseError as exc:
        status, error = 2, {"kind": "parse", "message": str(exc)}
    except PreconditionError as exc:
        status, error = 3, {"kind": "precondition", "precondition": exc.precondition, "message": str(exc)}
    except (ConsistencyError, LPError, SolveError) as exc:
        status, error = 4, {"kind": type(exc).__name__, "message": str(exc)}
    doc = report(args.command, inputs, body.get("verdicts", {}), body.get("certificates"), body.get("tables"),
                 provenance, status)
    if error:
        doc["error"] = error
        label = f"precondition failed: {error['precondition']}" if status == 3 else error["message"]
        print(f"varpoly: {label}", file=sys.stderr)
    _write(dumps(doc), args.out)
    if args.csv and not error:
        write_quotient_csv(args.csv, records)
    return status


if __name__ == "__main__":
    sys.exit(main())
