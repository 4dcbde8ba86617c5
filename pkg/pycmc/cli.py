"""Command line entry points: ``pycmc delaunay|verify|dress``.

Every run writes ``<out-dir>/<command>/log.txt``, the command's artifacts
and a JSON summary holding the resolved config. Exit codes: 0 when every
acceptance threshold passes, 1 on a numerical failure or a failed
threshold, 2 on an invalid config.
"""

import argparse
import logging
import os
import sys
from typing import Dict, List

import jsonschema
import numpy as np
import pandas as pd

from pycmc.config import ExperimentConfig, load_config
from pycmc.delaunay import DelaunayResidue, growth_measure, iwasawa_positive_factory, necksize, profile, tau_grid
from pycmc.dressing import SimpleFactor, extract_simple_factors, factor_product
from pycmc.dressing.simple_factor import unitarity_residual
from pycmc.exceptions import ConfigError, PycmcError
from pycmc.loopcore import LoopFunction, MatrixLoop, circle_points
from pycmc.potential import Potential, frame_convergence, gauge_pipeline
from pycmc.surface import (
    DelaunaySource,
    DressedSource,
    PotentialSource,
    build_mesh,
    end_asymptotics,
    fit_cylinder,
    screw_periodicity_check,
)
from pycmc.utils import complex_from_pair, save_json, set_logger, set_seed

SCREW_TOL = 1e-6
CYLINDER_TOL = 1e-6
UNITARITY_TOL = 1e-9
ROUND_TRIP_TOL = 1e-7
END_TOL = 1e-3


def _residue(config: ExperimentConfig) -> DelaunayResidue:
    return DelaunayResidue(config.a, config.b, config.c)


def _write_csv(df: pd.DataFrame, path: str):
    df.to_csv(path, float_format="%.17g", index=False)
    logging.info(f"wrote {path}")


def _tau_points(m: int = 64, radii=(0.25, 0.5, 0.75), m_inner: int = 16) -> np.ndarray:
    """S¹ (starting at λ = 1) and a few inner circles."""
    inner = [circle_points(r, m_inner, offset=0.5) for r in radii]
    return np.concatenate([circle_points(1.0, m)] + inner)


def cmd_delaunay(config: ExperimentConfig, exp_path: str, verbose: bool = True) -> Dict:
    """Closed-form Delaunay mesh, τ table and profile data."""
    res = _residue(config)
    prof = profile(res)
    source = DelaunaySource(res, route="closed", tol=config.tolerances)
    mesh = build_mesh(source, config.grid, config.lam_sym, config.H, verbose=verbose)
    mesh.to_obj(os.path.join(exp_path, config.outputs["obj"]))
    _write_csv(tau_grid(res, _tau_points(), prof, config.tolerances), os.path.join(exp_path, config.outputs["csv"]))

    xs = np.linspace(config.grid["x_min"], config.grid["x_max"], 3)
    screw = screw_periodicity_check(source, prof.rho, xs, mesh.ys, config.lam_sym, config.H)
    summary = {
        "residue": {"a": res.a, "b": res.b, "c": res.c},
        "profile": prof.to_dict(),
        "necksize": list(necksize(prof)),
        "mesh": mesh.to_dict(),
        "screw": {k: screw[k] for k in ("angle", "pitch", "residual", "relative_residual")},
    }
    passed = bool(mesh.failures.sum() == 0 and screw["relative_residual"] < SCREW_TOL)
    if res.is_vacuum:
        cyl = fit_cylinder(mesh.points, mesh.normals)
        summary["cylinder"] = cyl
        passed = passed and cyl["rel_variance"] < CYLINDER_TOL
    summary["passed"] = passed
    return summary


def _potential(config: ExperimentConfig, res: DelaunayResidue) -> Potential:
    return Potential.from_config(res, config.perturbation, radius=config.r)


def _growth_points(r: float, n: int) -> np.ndarray:
    n_outer = (n + 1) // 2
    return np.concatenate([circle_points(r, n_outer, offset=0.5), circle_points(0.5 * r, n - n_outer, offset=0.25)])


def cmd_verify(config: ExperimentConfig, exp_path: str, verbose: bool = True) -> Dict:
    """Frame convergence, end asymptotics and growth of a perturbed potential."""
    res = _residue(config)
    tol = config.tolerances
    opts = config.verify
    xi = _potential(config, res)
    summary: Dict = {"potential": xi.to_dict(), "validation": xi.validate(tol)}
    if xi.terms and xi.order is not None and xi.order < opts["n_target"]:
        pipeline = gauge_pipeline(xi, opts["n_target"], tol=tol)
        summary["gauge_pipeline"] = pipeline.to_dict()
        xi = pipeline.xi
    source = PotentialSource(xi, tol=tol)
    closing = source.closing_report(config.lam_sym)
    summary["closing"] = closing
    if not closing["unitary"]:
        logging.error(f"verify: monodromy is not unitary on C_r ({closing['unitarity']:.3e}), nothing to compare")
        summary["passed"] = False
        return summary
    z_seq = np.geomspace(opts["z_max"], opts["z_min"], opts["n_z"])

    conv = frame_convergence(xi, z_seq, res=res, tol=tol, verbose=verbose)
    conv.to_csv(os.path.join(exp_path, "convergence.csv"))
    summary["frame_convergence"] = conv.to_dict()

    reference = DelaunaySource(res, tol=tol)
    mesh = build_mesh(source, config.grid, config.lam_sym, config.H, verbose=verbose)
    ref_mesh = build_mesh(reference, config.grid, config.lam_sym, config.H, verbose=verbose)
    end = end_asymptotics(mesh, ref_mesh, reference.period, windows=opts["windows"], verbose=verbose)
    end.to_csv(os.path.join(exp_path, config.outputs["csv"]))
    mesh.to_obj(os.path.join(exp_path, config.outputs["obj"]))
    summary["end_asymptotics"] = end.to_dict()
    summary["mesh"] = mesh.to_dict()

    holo = source.holomorphic
    factory = iwasawa_positive_factory(lambda z: MatrixLoop.from_samples(holo.at(z), radius=xi.radius), xi.radius, tol)
    growth = growth_measure(factory, res, z_seq, _growth_points(xi.radius, opts["growth_lambdas"]), verbose=verbose)
    _write_csv(growth, os.path.join(exp_path, "growth.csv"))
    summary["growth"] = {
        "ok_tau": bool(growth["ok_tau"].all()),
        "max_excess": float((growth["slope"] - growth["tau"]).max()),
    }

    summary["passed"] = bool(conv.passed and end.passed(END_TOL) and summary["growth"]["ok_tau"])
    return summary


def _factors(config: ExperimentConfig) -> List[SimpleFactor]:
    return [
        SimpleFactor.normalized(complex_from_pair(f["lam0"]), [complex_from_pair(e) for e in f["line"]])
        for f in config.factors
    ]


def _round_trip(res: DelaunayResidue, factors: List[SimpleFactor], tol) -> Dict:
    """Extracts the factors back from C₊ = g₁g₂···."""
    if not factors:
        return {"skipped": True, "passed": True}
    # C_r sits below every factor; resonance points under it are ignored
    r = 0.5 * min(abs(g.lam0) for g in factors)
    c_plus = LoopFunction(lambda lam: factor_product(factors, lam), radius=r, tag="positive", name="C+")
    try:
        result = extract_simple_factors(c_plus, res, r=r, tol=tol)
    except PycmcError as e:
        logging.warning(f"dress: extraction round trip failed: {e}")
        return {"error": str(e), "passed": False}
    found = sorted(abs(lam) for lam in result.poles)
    expected = sorted(abs(g.lam0) for g in factors)
    same = len(found) == len(expected) and np.allclose(found, expected, rtol=1e-8)
    return {
        "r": r,
        "poles": result.poles,
        "reconstruction_residual": result.reconstruction_residual,
        "structure_residual": result.structure_residual,
        "monodromy_unitarity": result.monodromy_unitarity,
        "passed": bool(
            same
            and result.reconstruction_residual < ROUND_TRIP_TOL
            and result.structure_residual < ROUND_TRIP_TOL
        ),
    }


def cmd_dress(config: ExperimentConfig, exp_path: str, verbose: bool = True) -> Dict:
    """Bubbleton mesh plus unitarity and extraction round-trip reports."""
    res = _residue(config)
    tol = config.tolerances
    factors = _factors(config)
    source = DressedSource(res, factors)
    mesh = build_mesh(source, config.grid, config.lam_sym, config.H, verbose=verbose)
    mesh.to_obj(os.path.join(exp_path, config.outputs["obj"]))

    s1 = circle_points(1.0, 64, offset=0.5)
    rows = []
    for x in np.linspace(config.grid["x_min"], config.grid["x_max"], 5):
        for y in (0.0, np.pi / 2):
            rows.append({"x": x, "y": y, "unitarity": unitarity_residual(source.dressed.unitary(x, y), s1)})
    rows = pd.DataFrame(rows)
    _write_csv(rows, os.path.join(exp_path, config.outputs["csv"]))
    round_trip = _round_trip(res, factors, tol)
    max_unitarity = float(rows["unitarity"].max())
    return {
        "factors": [g.to_dict() for g in factors],
        "mesh": mesh.to_dict(),
        "unitarity": max_unitarity,
        "round_trip": round_trip,
        "passed": bool(max_unitarity < UNITARITY_TOL and round_trip["passed"] and mesh.failures.sum() == 0),
    }


COMMANDS = {"delaunay": cmd_delaunay, "verify": cmd_verify, "dress": cmd_dress}


def construct_args(argv=None):
    parser = argparse.ArgumentParser(prog="pycmc", description="CMC surfaces with Delaunay ends")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=str, required=True, help="JSON experiment config")
    parser.add_argument("--out-dir", type=str, default="./output")
    parser.add_argument("--threads", type=int, default=1, help="threads for the BLAS backends")
    parser.add_argument("--seed", type=int, default=0, help="seed of randomized checks")
    parser.add_argument("--log-level", type=str, default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--quiet", action="store_true", help="disable progress bars")
    return parser.parse_args(argv)


def run(args) -> int:
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(args.threads))
    exp_path = set_logger(args.out_dir, args.command, level=getattr(logging, args.log_level))
    set_seed(args.seed)
    try:
        config = load_config(args.config)
    except (ConfigError, jsonschema.ValidationError) as e:
        logging.error(f"invalid config {args.config}: {e}")
        return 2
    summary = {"command": args.command, "config": config.to_dict()}
    try:
        summary.update(COMMANDS[args.command](config, exp_path, verbose=not args.quiet))
    except ConfigError as e:
        logging.error(f"invalid config {args.config}: {e}")
        return 2
    except PycmcError as e:
        logging.error(f"{args.command} failed: {type(e).__name__}: {e}")
        summary.update({"passed": False, "error": {"type": type(e).__name__, "message": str(e)}})
        for attr in ("lam", "z"):
            if hasattr(e, attr):
                summary["error"][attr] = getattr(e, attr)
    except Exception as e:
        logging.exception(f"{args.command} failed with an unexpected {type(e).__name__}")
        summary.update({"passed": False, "error": {"type": type(e).__name__, "message": str(e)}})
    save_json(summary, os.path.join(exp_path, config.outputs["json"]))
    logging.info(f"{args.command}: passed = {summary['passed']}")
    return 0 if summary["passed"] else 1


def main(argv=None):
    sys.exit(run(construct_args(argv)))


if __name__ == "__main__":
    main()
