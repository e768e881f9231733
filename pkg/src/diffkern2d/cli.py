"""Command-line front end.

    diffkern2d <verify|rho|deconv|reconstruct> --config <path>
               [--out <dir>] [--sizes 8,16,32] [--seed N]
               [--tol-override key=value] [--input image]

Exit codes: 0 all contracts pass, 1 contract failure, 2 usage/config
error.  Reports are deterministic for a fixed (config, seed): sorted JSON
keys, shortest round-trip float repr, no timestamps.  DIFFKERN2D_THREADS
caps the worker count for the rho-table sweep.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import fileio
from .config import RunConfig, load_config
from .errors import (
    DiffKernError,
    InvalidArgumentError,
    PoleProximityError,
    UnsupportedEvaluationError,
)
from .grid import normalize_kernel, sample_kernel
from .inversion import (
    build_rho_evaluator,
    check_difference_kernel,
    g_symmetry_residual,
    compute_g_blocks,
    inverse_from_rho,
    pair_flip_transform,
    rho_direct,
    rho_structured,
    solve_array,
)
from .operators import (
    DENSE_GUARD,
    ConvOperator,
    assemble_pi,
    displacement_identity_residual,
    displacement_rank,
    m4_identity_residual,
)

SCHEMA = "diffkern2d-report-1"


def _thread_count() -> int:
    raw = os.environ.get("DIFFKERN2D_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def fit_order(sizes, residuals, exact_tol: float) -> dict:
    """Least-squares slope of log2(residual) against log2(n).

    Residuals at or below ``exact_tol`` short-circuit to an exact pass
    (the identity-kernel case is satisfied to roundoff, where no order
    can be fitted).
    """
    res = np.asarray(residuals, dtype=float)
    if np.all(res <= exact_tol):
        return {"exact": True, "order": None, "residuals": list(res)}
    res = np.maximum(res, 1e-300)
    slope = np.polyfit(np.log2(np.asarray(sizes, dtype=float)), np.log2(res), 1)[0]
    return {"exact": False, "order": float(-slope), "residuals": list(res)}


def _build_samples(cfg: RunConfig, n: int):
    grid = cfg.make_grid(n, n)
    samples = sample_kernel(cfg.build_model(), grid)
    if cfg.normalize:
        samples = normalize_kernel(samples)
    return samples


def _require_dense(points: int) -> None:
    if points > DENSE_GUARD:
        raise InvalidArgumentError(
            f"grid with {points} points exceeds the dense guard "
            f"({DENSE_GUARD}); this command needs dense assembly, "
            f"keep n1*n2 <= {DENSE_GUARD}"
        )


# --------------------------------------------------------------------------
# verify
# --------------------------------------------------------------------------


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    tol = cfg.tolerances
    sizes = cfg.sizes
    _require_dense(max(int(n) * int(n) for n in sizes))
    rng = np.random.default_rng(cfg.seed)

    per_size = {}
    series = {"displacement_k1": [], "displacement_k2": [],
              "side_i2_k1": [], "side_i1_k2": [], "g_symmetry": []}
    contracts = []

    for n in sizes:
        samples = _build_samples(cfg, n)
        S = ConvOperator(samples)
        pis = {1: assemble_pi(samples, 1), 2: assemble_pi(samples, 2)}

        r_k1 = displacement_identity_residual(S, pis[1], 1)
        r_k2 = displacement_identity_residual(S, pis[2], 2)
        r_21 = m4_identity_residual(samples, 2, 1)
        r_12 = m4_identity_residual(samples, 1, 2)

        g12, g21 = compute_g_blocks(S, samples)
        gsym = g_symmetry_residual(g12, g21)
        invol = float(
            np.linalg.norm(pair_flip_transform(pair_flip_transform(g12)).mat - g12.mat)
            / np.linalg.norm(g12.mat)
        )

        ranks = {k: displacement_rank(S, k, rel_tol=tol["rank_rel"]) for k in (1, 2)}
        bounds = {1: 2 * S.grid.n2 + 2, 2: 2 * S.grid.n1 + 2}

        agree = 0.0
        for _ in range(5):
            f = rng.standard_normal(S.grid.size) + 1j * rng.standard_normal(S.grid.size)
            diff = np.linalg.norm(S.apply_fft(f) - S.apply_dense(f))
            agree = max(agree, diff / np.linalg.norm(S.apply_dense(f)))

        per_size[str(n)] = {
            "displacement_k1": r_k1, "displacement_k2": r_k2,
            "side_i2_k1": r_21, "side_i1_k2": r_12,
            "g_symmetry": gsym, "involution": invol,
            "rank_k1": ranks[1], "rank_k2": ranks[2],
            "rank_bound_k1": bounds[1], "rank_bound_k2": bounds[2],
            "fft_dense_agreement": agree,
        }
        series["displacement_k1"].append(r_k1)
        series["displacement_k2"].append(r_k2)
        series["side_i2_k1"].append(r_21)
        series["side_i1_k2"].append(r_12)
        series["g_symmetry"].append(gsym)

        contracts.append(("rank_k1_within_bound_n%d" % n, ranks[1] <= bounds[1],
                          ranks[1], bounds[1]))
        contracts.append(("rank_k2_within_bound_n%d" % n, ranks[2] <= bounds[2],
                          ranks[2], bounds[2]))
        contracts.append(("involution_n%d" % n, invol <= tol["involution"],
                          invol, tol["involution"]))
        contracts.append(("fft_dense_agreement_n%d" % n, agree <= tol["agreement"],
                          agree, tol["agreement"]))

    orders = {}
    for name, vals in series.items():
        fit = fit_order(sizes, vals, tol["exact"])
        orders[name] = fit
        ok = fit["exact"] or (len(sizes) >= 2 and fit["order"] >= tol["min_order"])
        contracts.append((f"order_{name}", bool(ok),
                          "exact" if fit["exact"] else fit["order"], tol["min_order"]))

    overall = all(ok for _, ok, _, _ in contracts)
    report = {
        "schema": SCHEMA,
        "command": "verify",
        "config": cfg.echo(),
        "per_size": per_size,
        "orders": orders,
        "contracts": [
            {"name": nm, "pass": ok, "value": val, "threshold": thr}
            for nm, ok, val, thr in contracts
        ],
        "overall_pass": overall,
    }
    fileio.write_json_report(out / "verify_report.json", report)
    fileio.write_convergence_csv(out / "convergence.csv", sizes, series)
    fileio.write_convergence_svg(out / "convergence.svg", sizes, series)
    for nm, ok, val, thr in contracts:
        if not ok:
            print(f"FAIL {nm}: {val} vs {thr}", file=sys.stderr)
    return 0 if overall else 1


# --------------------------------------------------------------------------
# rho tables
# --------------------------------------------------------------------------


def cmd_rho(cfg: RunConfig, out: Path) -> int:
    tol = cfg.tolerances
    _require_dense(cfg.n1 * cfg.n2)
    grid = cfg.make_grid()
    samples = sample_kernel(cfg.build_model(), grid)
    if cfg.normalize:
        samples = normalize_kernel(samples)
    S = ConvOperator(samples)
    ev = build_rho_evaluator(S, samples, symmetry_tol=tol["symmetry"])

    lams = [(l1, l2) for l2 in cfg.rho_lambda2 for l1 in cfg.rho_lambda1]
    mus = [(m1, m2) for m2 in cfg.rho_mu2 for m1 in cfg.rho_mu1]
    pairs = [(lam, mu) for lam in lams for mu in mus]

    def eval_pair(pair):
        lam, mu = pair
        d = rho_direct(S, lam, mu)
        try:
            s_val = rho_structured(ev, lam, mu)
            return (lam, mu, d, s_val, None)
        except (PoleProximityError, UnsupportedEvaluationError) as exc:
            return (lam, mu, d, None, str(exc))

    workers = _thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(eval_pair, pairs))
    else:
        results = [eval_pair(p) for p in pairs]

    rows_direct, rows_struct, skipped = [], [], []
    errs = []
    for lam, mu, d, s_val, reason in results:
        rows_direct.append((lam, mu, d))
        rows_struct.append((lam, mu, s_val))
        if s_val is None:
            skipped.append({"lam": list(lam), "mu": list(mu), "reason": reason})
        else:
            errs.append(abs(s_val - d) / max(abs(d), 1e-300))

    evaluated = len(errs)
    max_err = max(errs) if errs else None
    ok = evaluated > 0 and max_err <= tol["rho_max_rel_err"]
    report = {
        "schema": SCHEMA,
        "command": "rho",
        "config": cfg.echo(),
        "pairs_total": len(pairs),
        "pairs_evaluated": evaluated,
        "pairs_skipped": len(skipped),
        "skipped": skipped,
        "max_rel_diff": max_err,
        "bound": tol["rho_max_rel_err"],
        "overall_pass": bool(ok),
        "explanation": (None if evaluated else
                        "every (lam, mu) pair coincides in both coordinates; "
                        "no admissible one-axis form exists"),
    }
    fileio.write_rho_csv(out / "rho_direct.csv", rows_direct)
    fileio.write_rho_csv(out / "rho_structured.csv", rows_struct)
    fileio.write_json_report(out / "rho_report.json", report)
    table_doc = {
        "schema": SCHEMA,
        "grid": {"omega1": grid.omega1, "omega2": grid.omega2,
                 "n1": grid.n1, "n2": grid.n2},
        "lambda1": cfg.rho_lambda1, "lambda2": cfg.rho_lambda2,
        "mu1": cfg.rho_mu1, "mu2": cfg.rho_mu2,
        "entries": [
            {"lam": [list(map(float, (l.real, l.imag))) for l in map(complex, lam)],
             "mu": [list(map(float, (m.real, m.imag))) for m in map(complex, mu)],
             "direct": d, "structured": s_val}
            for (lam, mu, d), (_, _, s_val) in zip(rows_direct, rows_struct)
        ],
    }
    fileio.write_json_report(out / "rho_table.json", table_doc)
    if not ok:
        msg = report["explanation"] or f"max rel diff {max_err} above {tol['rho_max_rel_err']}"
        print(f"FAIL rho: {msg}", file=sys.stderr)
    return 0 if ok else 1


# --------------------------------------------------------------------------
# deconvolution demo
# --------------------------------------------------------------------------


def cmd_deconv(cfg: RunConfig, out: Path, input_path: str) -> int:
    grid = cfg.make_grid()
    img, maxval = fileio.read_image(input_path)
    if img.shape != (grid.n2, grid.n1):
        raise InvalidArgumentError(
            f"image is {img.shape[1]}x{img.shape[0]} (cols x rows) but the "
            f"grid needs {grid.n1}x{grid.n2}"
        )
    samples = sample_kernel(cfg.build_model(), grid)
    if cfg.normalize:
        samples = normalize_kernel(samples)
    S = ConvOperator(samples)

    f = img.reshape(grid.size)
    blurred = S.apply(f)
    recovered = solve_array(S, blurred)

    peak = float(maxval) if maxval is not None else float(np.abs(img).max() or 1.0)
    mse = float(np.mean(np.abs(recovered - f) ** 2))
    psnr = float("inf") if mse == 0 else 10.0 * np.log10(peak * peak / mse)

    rec2d = grid.to2d(recovered.real)
    blur2d = grid.to2d(np.asarray(blurred).real)
    if maxval is not None:
        fileio.write_pgm(out / "recovered.pgm", rec2d, maxval)
        fileio.write_pgm(out / "blurred.pgm", blur2d, maxval)
    fileio.write_matrix_csv(out / "recovered.csv", rec2d)
    fileio.write_matrix_csv(out / "blurred.csv", blur2d)

    ok = psnr >= cfg.tolerances["psnr_min"]
    report = {
        "schema": SCHEMA,
        "command": "deconv",
        "config": cfg.echo(),
        "psnr_db": psnr,
        "psnr_min": cfg.tolerances["psnr_min"],
        "mse": mse,
        "peak": peak,
        "overall_pass": bool(ok),
    }
    fileio.write_json_report(out / "deconv_report.json", report)
    if not ok:
        print(f"FAIL deconv: PSNR {psnr:.2f} dB below "
              f"{cfg.tolerances['psnr_min']}", file=sys.stderr)
    return 0 if ok else 1


# --------------------------------------------------------------------------
# inverse reconstruction
# --------------------------------------------------------------------------


def cmd_reconstruct(cfg: RunConfig, out: Path) -> int:
    tol = cfg.tolerances
    _require_dense(cfg.n1 * cfg.n2)
    grid = cfg.make_grid()
    samples = sample_kernel(cfg.build_model(), grid)
    if cfg.normalize:
        samples = normalize_kernel(samples)
    S = ConvOperator(samples)

    dense = S.dense()
    dense_inv = np.linalg.inv(dense)
    T = inverse_from_rho(S)
    rec_err = float(np.linalg.norm(T - dense_inv) / np.linalg.norm(dense_inv))

    Q = np.linalg.inv(T)
    struct = check_difference_kernel(Q, grid)

    ok = rec_err <= tol["reconstruct"] and struct.residual <= tol["structure"]
    report = {
        "schema": SCHEMA,
        "command": "reconstruct",
        "config": cfg.echo(),
        "reconstruction_error": rec_err,
        "reconstruction_tol": tol["reconstruct"],
        "structure_residual": struct.residual,
        "structure_tol": tol["structure"],
        "cond_S": float(np.linalg.cond(dense)),
        "overall_pass": bool(ok),
    }
    fileio.write_json_report(out / "reconstruct_report.json", report)
    if not ok:
        print(f"FAIL reconstruct: error {rec_err}, structure {struct.residual}",
              file=sys.stderr)
    return 0 if ok else 1


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="diffkern2d",
        description="Difference-kernel operators on a rectangle: verification, "
                    "rho tables, deconvolution, inverse reconstruction.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("verify", "rho", "deconv", "reconstruct"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="kernel/run config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--sizes", default=None, help="comma list, e.g. 8,16,32")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--tol-override", action="append", default=[],
                       metavar="KEY=VALUE", help="override a named tolerance")
        if name == "deconv":
            p.add_argument("--input", required=True, help="P2 graymap or CSV matrix")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.sizes:
            try:
                cfg.sizes = [int(tok) for tok in args.sizes.split(",") if tok.strip()]
            except ValueError as exc:
                raise InvalidArgumentError(f"bad --sizes: {exc}") from exc
        if args.seed is not None:
            cfg.seed = args.seed
        for item in args.tol_override:
            if "=" not in item:
                raise InvalidArgumentError(f"bad --tol-override {item!r}, expected KEY=VALUE")
            key, val = item.split("=", 1)
            if key not in cfg.tolerances:
                raise InvalidArgumentError(
                    f"unknown tolerance {key!r}; known: {sorted(cfg.tolerances)}"
                )
            cfg.tolerances[key] = float(val)

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)

        if args.command == "verify":
            return cmd_verify(cfg, out)
        if args.command == "rho":
            return cmd_rho(cfg, out)
        if args.command == "deconv":
            return cmd_deconv(cfg, out, args.input)
        return cmd_reconstruct(cfg, out)
    except (DiffKernError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
