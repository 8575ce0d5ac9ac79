"""Command-line driver.

``travelwave --mode MODE --config run.json --out DIR [--seed N] [--jobs N] [--quiet]``

Exit status 0 on success, 2 on invalid configuration, 3 when a solver does
not converge or a certification check fails.  Errors are printed to stderr
as one JSON object.
"""
import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .errors import ConfigError, NumericError, TravelWaveError
from .fields import WaveContext, em_energy, maxwell_residual, synthesize_B
from .grid import Grid2D, load_field_binary, save_field_binary, save_field_csv
from .operators import discrete_frequency, symbol_L
from .orlicz import check_assumptions, check_delta2, check_nabla2, nonlinearity_from_config
from .te_ode import ShootingProblem, find_nodal
from .variational import (PermittivityProfile, SolverSettings, VariationalProblem, certify,
                          higher_state_search)

log = logging.getLogger("travelwave")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


@dataclass
class RunConfig:
    mode: str
    config: Path
    out: Path
    seed: int = None
    jobs: int = 1
    quiet: bool = False

    def __post_init__(self):
        if self.mode not in cfgmod.MODES:
            raise ConfigError("unknown mode", mode=self.mode, allowed=list(cfgmod.MODES))
        if self.jobs < 1:
            raise ConfigError("--jobs must be positive", jobs=self.jobs)


# -- output helpers ---------------------------------------------------------------

def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def write_json(path, payload):
    """Atomic JSON write (temp file in the target directory, then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(_to_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _atomic(path, writer, *args):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    os.close(fd)
    writer(tmp, *args)
    os.replace(tmp, path)


def _profile_csv(path, prof):
    _atomic(path, lambda p: prof.to_csv(p))


# -- problem assembly ---------------------------------------------------------------

def build_problem(cfg):
    grid = Grid2D.square(cfg["grid"]["n"], cfg["grid"]["R"])
    V = PermittivityProfile.from_config(cfg["V"])
    F = nonlinearity_from_config(cfg["nonlinearity"], omega=cfg["omega"])
    return VariationalProblem(grid, float(cfg["k"]), V, F, cfg.get("symmetry", "tm"))


def boundary_amplitude(u, grid):
    """``max|u|`` on the outermost grid ring relative to ``max|u|``."""
    mag = np.sqrt(np.sum(u * u, axis=0))
    edge = np.concatenate([mag[0], mag[-1], mag[:, 0], mag[:, -1]])
    return float(edge.max() / max(mag.max(), 1e-300))


def certification_numbers(u, prob, settings, cfg):
    """Every number that ``verify`` recomputes."""
    cp = certify(u, prob, settings)
    ctx = WaveContext(prob.k, cfg["omega"], n_x3=cfg["energy"]["n_x3"])
    B, branch = synthesize_B(cp.u, ctx, prob.grid, return_branch=True)
    Bfull = [synthesize_B(cp.u, ctx, prob.grid, z=z, return_branch=False) for z in (0.0, np.pi / (2 * prob.k))]
    Bmax = max(float(np.max(np.abs(b))) for b in Bfull)
    B3 = max(float(np.max(np.abs(b[2]))) for b in Bfull)
    energies = []
    for tp in cfg["energy"]["t_periods"]:
        for a in cfg["energy"]["a"]:
            rep = em_energy(cp.u, prob.V, prob.F, ctx, prob.grid, t=tp * ctx.period, a=a)
            energies.append(rep.to_dict())
    return cp, {
        "action": cp.action, "grad_norm": cp.grad_norm, "cerami_residual": cp.cerami_residual,
        "maxwell_residual": maxwell_residual(cp.u, prob.V, prob.F, prob.k, prob.grid),
        "tau_fraction": cp.tau_fraction, "pointwise_tau_fraction": cp.pointwise_tau_fraction,
        "B3_over_Bmax": B3 / max(Bmax, 1e-300), "B_branch": branch,
        "boundary_amplitude": boundary_amplitude(cp.u, prob.grid),
        "symmetry_residual": prob.symmetry_residual(cp.u),
        "v_divergence_residual": cp.state.divergence_residual(),
        "energy": energies,
    }


# -- modes -----------------------------------------------------------------------------

def _te_one(args):
    n, te = args
    prob = ShootingProblem(r_max=te["r_max"], rtol=te["rtol"], atol=te["atol"], max_step=te["max_step"],
                           n_scan=te["n_scan"], printed_form=te["printed_form"])
    return find_nodal(n, prob)


def run_te_shoot(cfg, out, jobs):
    tasks = [(n, cfg["te"]) for n in cfg["te"]["n"]]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            sols = list(pool.map(_te_one, tasks))
    else:
        sols = [_te_one(t) for t in tasks]
    summaries = []
    for sol in sols:
        path = out / f"te_n{sol.n}.csv"

        def write(p, sol=sol):
            r = sol.profile.r
            np.savetxt(p, np.column_stack([r, sol.profile.value, sol.dprofile.value]), delimiter=",",
                       header="r,beta,dbeta", comments="", fmt="%.17g")

        _atomic(path, write)
        summaries.append(sol.summary())
        log.info("te n=%d slope=%.12f residual=%.2e", sol.n, sol.slope_star, sol.residual)
    return {"te": summaries}


def run_tm_solve(cfg, out, jobs):
    prob = build_problem(cfg)
    settings = SolverSettings.from_config(cfg["solver"])
    points, search_log = higher_state_search(prob, settings)
    states = []
    for i, cp in enumerate(points):
        d = out / f"state{i}"
        _, numbers = certification_numbers(cp.u, prob, settings, cfg)
        _atomic(d / "field.bin", save_field_binary, cp.u, prob.grid, prob.k)
        _atomic(d / "field.csv", save_field_csv, cp.u, prob.grid, prob.k)
        for name, prof in cp.profiles.items():
            _profile_csv(d / f"profile_{name}.csv", prof)
        write_json(d / "energy.json", numbers["energy"])
        write_json(d / "summary.json", {**numbers, "state": i, "meta": cp.meta})
        states.append({"state": i, **{k: v for k, v in numbers.items() if k != "energy"}})
    result = {"states": states, "search_log": search_log}
    if len(points) < settings.states:
        result["warning"] = f"found {len(points)} of {settings.states} requested states"
    bad = [s for s in states if not s["maxwell_residual"] < 1e-5]
    if bad:
        raise NumericError("states failed certification", states=[s["state"] for s in bad])
    return result


def run_verify(cfg, out, jobs):
    src = cfg.get("verify", {}).get("input")
    if not src:
        raise ConfigError("verify mode needs verify.input (a tm-solve output directory)")
    src = Path(src)
    prob = build_problem(cfg)
    settings = SolverSettings.from_config(cfg["solver"])
    dirs = sorted(p for p in src.glob("state*") if p.is_dir())
    if not dirs:
        raise ConfigError("no stored states found", input=str(src))
    rows = []
    ok = True
    for d in dirs:
        u, grid, k = load_field_binary(d / "field.bin")
        if grid != prob.grid or k != prob.k:
            raise ConfigError("stored field does not match the configuration", state=d.name)
        stored = json.loads((d / "summary.json").read_text())
        _, numbers = certification_numbers(u, prob, settings, cfg)
        diffs = {}
        for key, val in numbers.items():
            if isinstance(val, float) and isinstance(stored.get(key), float):
                diffs[key] = abs(val - stored[key]) / max(abs(stored[key]), 1e-300)
        match = max(diffs.values(), default=0.0)
        certified = numbers["maxwell_residual"] < 1e-5
        ok &= certified and match <= 1e-12
        rows.append({"state": d.name, "certified": certified, "max_relative_change": match, **numbers})
    if not ok:
        raise NumericError("verification failed", states=[(r["state"], r["certified"], r["max_relative_change"])
                                                           for r in rows])
    return {"verified": rows}


def spectrum_table(k, h, n_xi):
    """Rows ``(ξ1, ξ2, ξd1, ξd2, eig1..eig6, |ξd|²+k²)`` over an ``n_xi²`` frequency grid."""
    xi = np.linspace(-np.pi / h, np.pi / h, n_xi, endpoint=False)
    X1, X2 = np.meshgrid(xi, xi, indexing="ij")
    xd = np.stack([discrete_frequency(X1, h), discrete_frequency(X2, h)], axis=-1)
    eig = np.linalg.eigvalsh(symbol_L(xd, k))
    expected = np.sum(xd**2, axis=-1) + k * k
    rows = np.column_stack([X1.ravel(), X2.ravel(), xd[..., 0].ravel(), xd[..., 1].ravel(),
                            eig.reshape(-1, 6), expected.ravel()])
    ref = np.concatenate([np.zeros((*expected.shape, 2)), np.repeat(expected[..., None], 4, -1)], -1)
    err = float(np.max(np.abs(eig - ref) / np.maximum(1.0, ref)))
    return rows, err


def run_spectrum(cfg, out, jobs):
    k = float(cfg["k"])
    grid = Grid2D.square(cfg["grid"]["n"], cfg["grid"]["R"])
    rows, err = spectrum_table(k, grid.h, cfg["spectrum"]["n_xi"])

    def write(p):
        np.savetxt(p, rows, delimiter=",", fmt="%.17g", comments="",
                   header="xi1,xi2,xid1,xid2,eig1,eig2,eig3,eig4,eig5,eig6,xid2_plus_k2")

    _atomic(out / "spectrum.csv", write)
    if err > 1e-9:
        raise NumericError("symbol eigenvalues deviate from the expected spectrum", max_error=err)
    return {"spectrum": {"rows": len(rows), "max_relative_error": err, "k": k, "h": grid.h}}


def run_orlicz_check(cfg, out, jobs):
    F = nonlinearity_from_config(cfg["nonlinearity"], omega=cfg["omega"])
    oc = cfg["orlicz"]
    t = np.logspace(np.log10(oc["t_min"]), np.log10(oc["t_max"]), oc["samples"])
    d2 = check_delta2(F.phi, t)
    n2 = check_nabla2(F.phi, t)
    report = {"nonlinearity": F.to_dict(), "delta2": d2._asdict(), "nabla2": n2._asdict(),
              "assumptions": check_assumptions(F, seed=cfg["solver"].get("seed", 0))}
    if not (d2.holds and n2.holds):
        raise ConfigError("N-function fails the growth conditions", **report)
    return report


MODES = {"te-shoot": run_te_shoot, "tm-solve": run_tm_solve, "verify": run_verify,
         "spectrum": run_spectrum, "orlicz-check": run_orlicz_check}


def run(rc):
    """Execute one run; returns the exit status."""
    cfg = cfgmod.load(rc.config)
    if rc.seed is not None:
        cfg["solver"]["seed"] = rc.seed
    cfg["solver"].setdefault("seed", 0)
    if cfg["V"] is not None and rc.mode in ("tm-solve", "verify"):
        PermittivityProfile.from_config(cfg["V"]).validate(cfg["k"])
    out = Path(rc.out)
    out.mkdir(parents=True, exist_ok=True)
    result = MODES[rc.mode](cfg, out, rc.jobs)
    write_json(out / "summary.json", {"mode": rc.mode, "config": cfg, "result": result})
    return EXIT_OK


def parse_args(argv=None):
    ap = argparse.ArgumentParser(prog="travelwave", description=__doc__.splitlines()[0])
    ap.add_argument("--mode", required=True, choices=cfgmod.MODES)
    ap.add_argument("--config", required=True, type=Path)
    ap.add_argument("--out", required=True, type=Path)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--quiet", action="store_true")
    return ap.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rc = RunConfig(args.mode, args.config, args.out, args.seed, args.jobs, args.quiet)
        return run(rc)
    except ConfigError as exc:
        print(json.dumps(_to_jsonable(exc.to_dict())), file=sys.stderr)
        return EXIT_CONFIG
    except TravelWaveError as exc:
        print(json.dumps(_to_jsonable(exc.to_dict())), file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
