"""Command-line driver: scans over (N, phi, n), phase portraits, complex
trajectory dumps, the crossover criterion, and spectrum dumps.

Scan points are independent work items; they run on a process pool sized by
the RESOTUNNEL_WORKERS environment variable and the result rows are ordered
by (N, phi, n) before writing, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import classical, complexpath, quantum, semiclassics
from .errors import ConfigError, ResotunnelError
from .model import ModelParams, eval_H, read_config

TWO_PI = 2.0 * math.pi
METHODS = ("exact", "cpath", "direct", "rat", "unpert")

CSV_HEADER = ("N,phi,b_mod,n,E_n,dE_exact,dE_cpath,dE_direct,dE_rat,"
              "dE_unpert,sigma_c,sigma_tilde,Sigma,S_in,S_out,denom,flags")


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{float(x):.12e}"


@dataclass
class ScanSpec:
    """One scan over grids of N, phi and level index n."""

    params: ModelParams
    N_list: list
    phi_list: list
    n_list: list
    methods: frozenset = frozenset(("exact", "cpath"))
    output_dir: Path = Path("scan_out")

    def __post_init__(self):
        self.N_list = [int(N) for N in self.N_list]
        self.phi_list = [float(p) for p in self.phi_list]
        self.n_list = [int(n) for n in self.n_list]
        self.methods = frozenset(self.methods)
        self.output_dir = Path(self.output_dir)
        if not self.N_list or any(N < 2 for N in self.N_list):
            raise ConfigError("N_list must be non-empty with all N >= 2")
        if any(n < 0 for n in self.n_list) or not self.n_list:
            raise ConfigError("n_list must be non-empty with all n >= 0")
        if not self.phi_list:
            raise ConfigError("phi_list must be non-empty")
        unknown = self.methods.difference(METHODS)
        if unknown:
            raise ConfigError(f"unknown methods: {sorted(unknown)}")


def compute_record(params: ModelParams, N: int, n: int,
                   methods) -> semiclassics.SplittingRecord:
    """Evaluate the requested prediction methods at one (params, N, n) point.

    Method failures are recorded as flags, never raised, so scans always
    complete.
    """
    hbar = math.pi / (2.0 * N)
    rec = semiclassics.SplittingRecord(N=N, hbar=hbar, n=n, phi=params.phi,
                                       b_mod=params.b_mod)

    if "exact" in methods:
        try:
            grid = quantum.TorusGrid(N)
            res = quantum.exact_splitting(n, grid, params)
            rec.dE_exact = res.delta_e
            rec.flags |= res.flags
        except ResotunnelError as exc:
            rec.flags.add(f"exact_error:{type(exc).__name__}")

    if "cpath" in methods:
        try:
            sub = semiclassics.resonance_assisted_splitting(n, hbar, params)
            rec.E_n = sub.E_n
            rec.dE_complex_path = sub.dE_complex_path
            rec.diagnostics.update(sub.diagnostics)
            rec.flags |= sub.flags
        except ResotunnelError as exc:
            rec.flags.add(f"cpath_error:{type(exc).__name__}")

    if "direct" in methods:
        try:
            rec.dE_direct = semiclassics.direct_splitting(n, hbar, params)
            E_n = classical.ebk_energy(n, hbar, classical.INNER, params)
            rec.E_n = E_n
            rec.diagnostics["Sigma"] = complexpath.direct_sigma(params, E_n).sigma
        except ResotunnelError as exc:
            rec.flags.add(f"direct_error:{type(exc).__name__}")

    if "rat" in methods:
        try:
            rec.dE_rat = semiclassics.rat_splitting(n, hbar, params)
        except ResotunnelError as exc:
            rec.flags.add(f"rat_error:{type(exc).__name__}")

    if "unpert" in methods:
        try:
            rec.dE_unpert = semiclassics.unperturbed_splitting_quad(
                n, hbar, params.replace(b_mod=0.0))
        except ResotunnelError as exc:
            rec.flags.add(f"unpert_error:{type(exc).__name__}")

    if math.isnan(rec.E_n) and methods.isdisjoint({"cpath", "direct"}):
        # no method filled the quantized energy; try it for the record
        try:
            rec.E_n = classical.ebk_energy(n, hbar, classical.INNER, params)
        except ResotunnelError:
            pass
    return rec


def _record_row(rec: semiclassics.SplittingRecord) -> str:
    d = rec.diagnostics
    cols = [
        str(int(rec.N)), _fmt(rec.phi), _fmt(rec.b_mod), str(rec.n),
        _fmt(rec.E_n), _fmt(rec.dE_exact), _fmt(rec.dE_complex_path),
        _fmt(rec.dE_direct), _fmt(rec.dE_rat), _fmt(rec.dE_unpert),
        _fmt(d.get("sigma_c", math.nan)), _fmt(d.get("sigma_tilde", math.nan)),
        _fmt(d.get("Sigma", math.nan)), _fmt(d.get("S_in", math.nan)),
        _fmt(d.get("S_out", math.nan)), _fmt(d.get("denom", math.nan)),
        ";".join(sorted(rec.flags)),
    ]
    return ",".join(cols)


def _scan_worker(task):
    params_dict, N, n, methods = task
    params = ModelParams(**params_dict)
    rec = compute_record(params, N, n, frozenset(methods))
    return rec


def _n_workers():
    env = os.environ.get("RESOTUNNEL_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def run_scan(spec: ScanSpec):
    """Execute the scan and write the master CSV plus per-point JSON files.

    Returns (records, any_flagged).
    """
    spec.output_dir.mkdir(parents=True, exist_ok=True)
    points_dir = spec.output_dir / "points"
    points_dir.mkdir(exist_ok=True)
    tasks = []
    for phi in spec.phi_list:
        params = spec.params.replace(phi=phi)
        pd = dict(a1=params.a1, a2=params.a2, b_mod=params.b_mod,
                  phi=params.phi, ell=params.ell)
        for N in spec.N_list:
            for n in spec.n_list:
                tasks.append((pd, N, n, tuple(sorted(spec.methods))))
    workers = min(_n_workers(), len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_scan_worker, tasks, chunksize=1))
    else:
        records = [_scan_worker(t) for t in tasks]
    records.sort(key=lambda r: (r.N, r.phi, r.n))
    csv_path = spec.output_dir / "splittings.csv"
    with open(csv_path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for rec in records:
            fh.write(_record_row(rec) + "\n")
    for rec in records:
        name = f"N{int(rec.N):03d}_phi{rec.phi:.6f}_n{rec.n}.json"
        payload = {
            "N": int(rec.N), "hbar": rec.hbar, "n": rec.n, "phi": rec.phi,
            "b_mod": rec.b_mod, "E_n": _nan_none(rec.E_n),
            "dE_exact": _nan_none(rec.dE_exact),
            "dE_cpath": _nan_none(rec.dE_complex_path),
            "dE_direct": _nan_none(rec.dE_direct),
            "dE_rat": _nan_none(rec.dE_rat),
            "dE_unpert": _nan_none(rec.dE_unpert),
            "diagnostics": {k: _nan_none(v) for k, v in
                            sorted(rec.diagnostics.items())},
            "flags": sorted(rec.flags),
        }
        with open(points_dir / name, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
    any_flagged = any(rec.flags for rec in records)
    return records, any_flagged


def _nan_none(x):
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf"
    return x


# ----------------------------------------------------------------------
# phase portraits and trajectory dumps


def dump_phase_portrait(params: ModelParams, energies, path, resolution=512):
    """Level-set polylines of H on the full torus, by marching squares.

    CSV columns: E,piece,p,q.
    """
    from skimage import measure

    axis = np.linspace(-math.pi, math.pi, resolution)
    P, Q = np.meshgrid(axis, axis, indexing="ij")
    H = eval_H(P, Q, params)
    step = axis[1] - axis[0]
    with open(path, "w") as fh:
        fh.write("E,piece,p,q\n")
        for E in energies:
            contours = measure.find_contours(H, float(E))
            for piece, contour in enumerate(contours):
                ps = -math.pi + contour[:, 0] * step
                qs = -math.pi + contour[:, 1] * step
                for p, q in zip(ps, qs):
                    fh.write(f"{_fmt(E)},{piece},{_fmt(p)},{_fmt(q)}\n")


def dump_complex_traces(params: ModelParams, E: float, outdir):
    """Emit the chain, separatrix and direct crossing legs plus the four
    real tori involved, as CSV files in `outdir`."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    shots = {
        "chain": lambda: complexpath.shoot_chain_crossing(E, params),
        "separatrix": lambda: complexpath.shoot_separatrix_crossing(
            E, params, thorough=True),
        "direct": lambda: complexpath.shoot_direct(E, params),
    }
    sources = {"chain": classical.INNER, "separatrix": classical.OUTER,
               "direct": classical.INNER}
    written = {}
    for name, shot in shots.items():
        res = shot()
        tor = classical.torus(params, E, sources[name])
        shooter = complexpath._TorusShooter(tor, params, escape_bound=32.0)
        sol = shooter.leg(res.launch_phase, res.half_period_imag, dense=True)
        ts = np.linspace(0.0, sol.t[-1], 600)
        ys = sol.sol(ts)
        traj = complexpath.ComplexTrajectory(
            s=ts, p=ys[0] + 1j * ys[1], q=ys[2] + 1j * ys[3],
            sigma=ys[4], s_real=ys[5], energy=eval_H(*tor.launch, params))
        path = outdir / f"trace_{name}.csv"
        complexpath.dump_trajectory_csv(traj, path)
        written[name] = (path, res)
    half = math.pi / 2
    for label, branch, center in (
            ("inner", classical.INNER, (half, half)),
            ("outer", classical.OUTER, (half, half)),
            ("inner_partner", classical.INNER, (half, -half)),
            ("outer_partner", classical.OUTER, (half, -half))):
        tor = classical.find_torus(E, branch, params, center=center)
        classical.dump_torus_csv(tor, outdir / f"torus_{label}.csv")
    return written


# ----------------------------------------------------------------------
# argument parsing


def _add_model_args(sub):
    sub.add_argument("--config", type=str, default=None,
                     help="key=value model file; flags override it")
    sub.add_argument("--a1", type=float, default=None)
    sub.add_argument("--a2", type=float, default=None)
    sub.add_argument("--b", type=float, default=None, dest="b_mod",
                     help="perturbation modulus |b|")
    sub.add_argument("--phi", type=float, default=None)
    sub.add_argument("--ell", type=int, default=None)


def _params_from_args(args) -> ModelParams:
    params = read_config(args.config) if args.config else ModelParams()
    override = {}
    for key in ("a1", "a2", "b_mod", "phi", "ell"):
        val = getattr(args, key, None)
        if val is not None:
            override[key] = val
    return params.replace(**override) if override else params


def _parse_n_values(args) -> list:
    out = []
    if args.N:
        out.extend(int(tok) for tok in str(args.N).split(","))
    if args.N_range:
        parts = [int(tok) for tok in args.N_range.split(":")]
        if len(parts) == 2:
            lo, hi, step = parts[0], parts[1], 1
        elif len(parts) == 3:
            lo, hi, step = parts
        else:
            raise ConfigError("--N-range expects lo:hi or lo:hi:step")
        out.extend(range(lo, hi + 1, step))
    if not out:
        raise ConfigError("need --N or --N-range")
    return sorted(set(out))


def _parse_phi_grid(tok, fallback_phi) -> list:
    if tok is None:
        return [fallback_phi]
    if "," in tok:
        return [float(t) for t in tok.split(",")]
    try:
        count = int(tok)
    except ValueError:
        return [float(tok)]
    return list(np.linspace(0.0, TWO_PI, count, endpoint=False))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="resotunnel",
        description="Resonance-chain tunneling: exact and semiclassical splittings")
    subs = ap.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("spectrum", help="diagonalize and dump one spectrum")
    _add_model_args(sp)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--levels", type=str, default="0")
    sp.add_argument("--out", type=str, default="spectrum_out")

    sc = subs.add_parser("split-scan", help="splitting scan over N, phi, n")
    _add_model_args(sc)
    sc.add_argument("--N", type=str, default=None, help="comma list of N")
    sc.add_argument("--N-range", type=str, default=None, dest="N_range")
    sc.add_argument("--phi-grid", type=str, default=None, dest="phi_grid",
                    help="comma list of phases, or an integer count over [0, 2pi)")
    sc.add_argument("--levels", type=str, default="0")
    sc.add_argument("--methods", type=str, default="exact,cpath")
    sc.add_argument("--out", type=str, default="scan_out")

    po = subs.add_parser("portrait", help="marching-squares phase portrait")
    _add_model_args(po)
    po.add_argument("--energies", type=str, required=True)
    po.add_argument("--out", type=str, default="portrait.csv")
    po.add_argument("--resolution", type=int, default=512)

    tr = subs.add_parser("trace", help="dump complex crossing trajectories")
    _add_model_args(tr)
    tr.add_argument("--E", type=float, required=True)
    tr.add_argument("--out", type=str, default="traces")

    cr = subs.add_parser("criterion", help="crossover Planck constant per level")
    _add_model_args(cr)
    cr.add_argument("--levels", type=str, default="0")
    cr.add_argument("--out", type=str, default=None, help="optional CSV path")

    rc = subs.add_parser("rat-compare",
                         help="exact vs perturbative vs complex-path scan")
    _add_model_args(rc)
    rc.add_argument("--N", type=str, default=None)
    rc.add_argument("--N-range", type=str, default=None, dest="N_range")
    rc.add_argument("--levels", type=str, default="0")
    rc.add_argument("--out", type=str, default="rat_compare_out")

    args = ap.parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    params = _params_from_args(args)

    if args.command == "spectrum":
        return _cmd_spectrum(args, params)

    if args.command in ("split-scan", "rat-compare"):
        methods = frozenset(args.methods.split(",")) \
            if args.command == "split-scan" \
            else frozenset(("exact", "rat", "cpath", "unpert"))
        spec = ScanSpec(
            params=params,
            N_list=_parse_n_values(args),
            phi_list=_parse_phi_grid(getattr(args, "phi_grid", None), params.phi),
            n_list=[int(t) for t in args.levels.split(",")],
            methods=methods,
            output_dir=Path(args.out),
        )
        _, any_flagged = run_scan(spec)
        print(f"wrote {spec.output_dir / 'splittings.csv'}")
        return 2 if any_flagged else 0

    if args.command == "portrait":
        energies = [float(t) for t in args.energies.split(",")]
        dump_phase_portrait(params, energies, args.out,
                            resolution=args.resolution)
        print(f"wrote {args.out}")
        return 0

    if args.command == "trace":
        try:
            written = dump_complex_traces(params, args.E, args.out)
        except ResotunnelError as exc:
            print(f"trace failed: {exc}", file=sys.stderr)
            return 2
        for name, (path, res) in written.items():
            print(f"{name}: sigma={res.sigma:.6e} -> {path}")
        return 0

    if args.command == "criterion":
        rows = []
        status = 0
        for n in (int(t) for t in args.levels.split(",")):
            try:
                res = semiclassics.hbar_res(n, params)
            except ResotunnelError as exc:
                print(f"n={n}: failed ({exc})", file=sys.stderr)
                status = 2
                continue
            rows.append((n, res))
            print(f"n={n}: N_peak={res.N_peak:.4f} N_res={res.N_res:.4f} "
                  f"hbar_res={res.hbar_res:.6e}")
        if args.out:
            with open(args.out, "w") as fh:
                fh.write("n,hbar_peak,N_peak,hbar_res,N_res\n")
                for n, res in rows:
                    fh.write(f"{n},{_fmt(res.hbar_peak)},{_fmt(res.N_peak)},"
                             f"{_fmt(res.hbar_res)},{_fmt(res.N_res)}\n")
        return status

    raise ConfigError(f"unknown command {args.command!r}")


def _cmd_spectrum(args, params) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    grid = quantum.TorusGrid(args.N)
    spec = quantum.diagonalize(quantum.build_hamiltonian(params, grid), grid)
    levels = [int(t) for t in args.levels.split(",")]
    quartets = {}
    status = 0
    for n in levels:
        try:
            res = quantum.exact_splitting(n, grid, params, spectrum=spec)
        except ResotunnelError as exc:
            print(f"n={n}: failed ({exc})", file=sys.stderr)
            status = 2
            continue
        quartets[n] = res
    payload = {
        "N": grid.N,
        "hbar": grid.hbar,
        "params": dict(a1=params.a1, a2=params.a2, b_mod=params.b_mod,
                       phi=params.phi, ell=params.ell),
        "energies": [float(e) for e in spec.energies],
        "parities": [int(p) for p in spec.parity],
        "quartets": {
            str(n): {label: {"index": int(idx), "energy": e, "overlap2": ov}
                     for label, (idx, e, ov) in res.picks.items()}
            for n, res in quartets.items()
        },
    }
    with open(outdir / f"spectrum_N{grid.N:03d}.json", "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
    csv_path = outdir / "splittings.csv"
    new = not csv_path.exists()
    with open(csv_path, "a") as fh:
        if new:
            fh.write("N,phi,b_mod,n,dE_exact,confidence\n")
        for n, res in sorted(quartets.items()):
            conf = "low" if res.low_confidence else "ok"
            fh.write(f"{grid.N},{_fmt(params.phi)},{_fmt(params.b_mod)},"
                     f"{n},{_fmt(res.delta_e)},{conf}\n")
    print(f"wrote {outdir}")
    return status


if __name__ == "__main__":
    sys.exit(main())
