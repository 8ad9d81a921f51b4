"""Command-line front end: selftest, design, simulate, analyze.

Exit codes: 0 success, 1 selftest mismatch, 2 invalid configuration,
3 infeasible parameter design, 4 runtime range violation in strict mode.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .bgv import BgvParams, hom_add, hom_mul, keygen, encrypt, decrypt
from .config import resolve_config
from .design import (ClosedLoopModel, decay_certificate, epsilon_of, epsilon_vector,
                     min_modulus_general, min_modulus_packed, vec_sum_norm,
                     with_diagnostics)
from .errors import ConfigError, RangeExceeded, RingctlError, SInvalid
from .ring import Modulus, centered_mod, find_primitive_root, ntt_forward, ntt_inverse
from .sim import (SimTrace, cost_report, run_encrypted, run_nominal,
                  run_quantized_oracle, table1_counts, StepRecord)
from .transform import transform
from .controller_packed import split_H

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_RANGE = 4


# ---------------------------------------------------------------------------
# selftest

def cmd_selftest(zeta_override: int = None, out=None) -> int:
    """Run the built-in golden vectors; prints one PASS/FAIL line each."""
    out = out if out is not None else sys.stdout
    failures = 0

    def check(name, got, want):
        nonlocal failures
        ok = got == want
        if not ok:
            failures += 1
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: got {got!r}, want {want!r}", file=out)

    check("centered_mod(9, 17)", centered_mod(9, 17), -8)
    check("centered_mod(0, 17)", centered_mod(0, 17), 0)
    check("centered_mod(-12, 17)", centered_mod(-12, 17), 5)

    zeta = zeta_override if zeta_override is not None else find_primitive_root(17, 4)
    check("primitive 8th root mod 17", zeta, 2)
    try:
        mod17 = Modulus(17, 4, zeta)
    except ValueError:
        mod17 = Modulus(17, 4, 2)
        failures += 1
        print("[FAIL] root rejected by the ring; falling back to 2", file=out)

    pu = ntt_inverse([1, 3, 5, 7], mod17)
    check("Pack([1,3,5,7])", pu.coeff_list(), [4, -7, 4, -7])
    pv = ntt_inverse([2, -4, -6, 8], mod17)
    check("Pack([2,-4,-6,8])", pv.coeff_list(), [0, 7, 8, 3])
    s = pu + pv
    check("sum polynomial", s.coeff_list(), [4, 0, -5, -4])
    check("sum unpacks", ntt_forward(s), [3, -1, -1, -2])
    prod = pu * pv
    check("product polynomial", prod.coeff_list(), [4, 4, 4, 1])
    check("product unpacks", ntt_forward(prod), [2, 5, 4, 5])

    params = BgvParams(N=17, q=2**61 - 1, p=4, sigma=3.2, r_bar=2)
    rng = np.random.default_rng(0)
    key = keygen(params, rng)
    cu = encrypt(pu, key, rng)
    cv = encrypt(pv, key, rng)
    check("Dec(Enc(Pack(u)))", decrypt(cu, key).coeff_list(), pu.coeff_list())
    check("Dec(add)", decrypt(hom_add(cu, cv), key).coeff_list(), s.coeff_list())
    check("Dec(mult)", decrypt(hom_mul(cu, cv), key).coeff_list(), prod.coeff_list())

    t1 = table1_counts(5, 2, 5)
    check("per-step counts, elementwise design",
          (t1["general"]["enc"], t1["general"]["dec"], t1["general"]["add"], t1["general"]["mult"]),
          (7, 2, 68, 70))
    check("per-step counts, packed design",
          (t1["packed"]["enc"], t1["packed"]["dec"], t1["packed"]["add"], t1["packed"]["mult"]),
          (2, 1, 9, 10))
    check("packed per-step traffic (p=4096)", 7 * 4096, 28672)

    print(f"selftest: {'PASS' if failures == 0 else f'{failures} FAILURES'}", file=out)
    return EXIT_OK if failures == 0 else EXIT_SELFTEST


# ---------------------------------------------------------------------------
# design

def design_report(cfg) -> dict:
    """Error budget, modulus lower bounds, and a feasibility verdict."""
    plant, ctrl = cfg.plant, cfg.controller
    tc = transform(ctrl)
    model = ClosedLoopModel.assemble(plant.A, plant.B, plant.C, ctrl.F, ctrl.G,
                                     ctrl.H, plant.xp0, ctrl.x0)
    alpha, gamma = decay_certificate(model.A_cl)
    budget = epsilon_vector(model, tc.M, tc.n_bar, tc.z0, alpha, gamma)
    budget = with_diagnostics(budget, model, tc.M, tc.n_bar, tc.z0, cfg.L, cfg.s)
    report = {
        "config": cfg.name,
        "alpha": budget.alpha,
        "gamma": budget.gamma,
        "beta": budget.beta,
        "eps": list(budget.eps),
        "S": budget.S,
        "diagnostics": {"Delta": budget.Delta, "delta": budget.delta,
                        "U": budget.U, "U_hat": budget.U_hat},
        "L": cfg.L,
        "s": cfg.s,
    }
    try:
        eps_val = epsilon_of(cfg.L, cfg.s, budget.eps)
        blocks = split_H(tc.Hcal, tc.n, tc.h, tc.l)
        N_general = min_modulus_general(cfg.L, cfg.s, budget.eps, budget.S, tc.z0, cfg.p)
        N_packed = min_modulus_packed(cfg.L, cfg.s, budget.eps, budget.S, tc.z0,
                                      blocks, tc.n, cfg.p)
        report.update({
            "eps_of_L_s": eps_val,
            "N_general": N_general,
            "N_packed": N_packed,
            "vec_sum_norm": vec_sum_norm(blocks),
            "configured_N": cfg.N,
            "feasible": cfg.N >= (N_packed if cfg.kind == "packed" else N_general),
            "reason": None,
        })
        if not report["feasible"]:
            report["reason"] = (
                f"configured N = {cfg.N} is below the designed bound for kind {cfg.kind!r}")
    except SInvalid as exc:
        report.update({"eps_of_L_s": None, "N_general": None, "N_packed": None,
                       "configured_N": cfg.N, "feasible": False,
                       "reason": f"SInvalid: {exc}"})
    return report


def cmd_design(args) -> int:
    cfg = resolve_config(args.config)
    report = design_report(cfg)
    print(json.dumps(report, indent=2))
    return EXIT_OK if report["feasible"] else EXIT_INFEASIBLE


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> int:
    cfg = resolve_config(args.config)
    kind = args.kind or cfg.kind
    T = args.T or cfg.T
    seed = cfg.seed if args.seed is None else args.seed
    mode = args.mode or cfg.mode
    ctrl = cfg.controller
    tc = transform(ctrl)
    u_ref, y_ref, xp_ref = run_nominal(cfg.plant, ctrl.F, ctrl.G, ctrl.H, ctrl.x0, T)

    if kind == "nominal":
        trace = _trace_from_arrays("nominal", u_ref, y_ref, u_ref, y_ref, xp_ref)
    elif kind == "oracle":
        oracle = run_quantized_oracle(cfg.plant, tc, cfg.quant, T, strict=(mode == "strict"))
        trace = _trace_from_arrays("oracle", oracle.u, oracle.y, u_ref, y_ref, oracle.xp)
    else:
        params = BgvParams(N=cfg.N, q=cfg.q, p=cfg.p, sigma=cfg.sigma, r_bar=cfg.r_bar)
        try:
            trace = run_encrypted(cfg.plant, tc, params, cfg.quant, T, seed,
                                  kind=kind, mode=mode, ref=(u_ref, y_ref))
        except RangeExceeded as exc:
            print(f"range violation: {exc}", file=sys.stderr)
            return EXIT_RANGE

    # report the theoretical envelope when it exists
    model = ClosedLoopModel.assemble(cfg.plant.A, cfg.plant.B, cfg.plant.C,
                                     ctrl.F, ctrl.G, ctrl.H, cfg.plant.xp0, ctrl.x0)
    budget = epsilon_vector(model, tc.M, tc.n_bar, tc.z0)
    try:
        eps_val = f"{epsilon_of(cfg.L, cfg.s, budget.eps):.6g}"
    except SInvalid:
        eps_val = "undefined (1/s <= eps0)"
    print(f"kind={kind} T={T} seed={seed} max_err={trace.max_err:.6g} eps(L,s)={eps_val}")

    if args.out:
        trace.write_csv(args.out, timing=args.timing)
        print(f"trace written to {args.out}")
        if args.plot:
            from .plots import render_run
            for path in render_run(trace, cfg.sampling_period, args.out):
                print(f"figure written to {path}")
    return EXIT_OK


def _trace_from_arrays(kind, u, y, u_ref, y_ref, xp) -> SimTrace:
    trace = SimTrace(kind=kind)
    for k in range(len(u)):
        err = float(max(np.max(np.abs(u[k] - u_ref[k])), np.max(np.abs(y[k] - y_ref[k]))))
        trace.records.append(StepRecord(k=k, u=u[k], y=y[k], u_ref=u_ref[k],
                                        y_ref=y_ref[k], err_inf=err))
    trace.xp = xp
    return trace


# ---------------------------------------------------------------------------
# analyze

def cmd_analyze(args) -> int:
    cfg = resolve_config(args.config)
    ctrl = cfg.controller
    n, h, l = ctrl.n, ctrl.h, ctrl.l
    measured = None
    if args.measure:
        tc = transform(ctrl)
        params = BgvParams(N=cfg.N, q=cfg.q, p=cfg.p, sigma=cfg.sigma, r_bar=cfg.r_bar)
        T = min(cfg.T, args.measure)
        u_ref, y_ref, _ = run_nominal(cfg.plant, ctrl.F, ctrl.G, ctrl.H, ctrl.x0, T)
        trace = run_encrypted(cfg.plant, tc, params, cfg.quant, T, cfg.seed,
                              kind=cfg.kind, ref=(u_ref, y_ref))
        per_step = trace.records[1].counters
        measured = {
            "kind": cfg.kind,
            "steps": T,
            "per_step": per_step,
            "mult_poly_mults_per_step": 4 * per_step["mult"],
            "comm_integers_per_step": trace.records[1].comm_integers,
            "mean_wall_s": float(np.mean([r.wall_ns for r in trace.records])) / 1e9,
        }
    report = cost_report(n, h, l, cfg.p, cfg.q, nu=args.nu, measured=measured)
    print(json.dumps(report, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ringctl",
                                 description="Encrypted linear controller toolkit")
    ap.add_argument("--version", action="version", version=f"ringctl {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("selftest", help="run the built-in golden vectors")

    d = sub.add_parser("design", help="error budget and modulus bounds")
    d.add_argument("--config", required=True, help="config path or preset name (f16, toy)")

    s = sub.add_parser("simulate", help="closed-loop simulation, CSV trace out")
    s.add_argument("--config", required=True, help="config path or preset name (f16, toy)")
    s.add_argument("--kind", choices=["nominal", "oracle", "general", "packed"])
    s.add_argument("--T", type=int, help="horizon override")
    s.add_argument("--seed", type=int, help="seed override")
    s.add_argument("--mode", choices=["strict", "wraparound-demo"])
    s.add_argument("--out", help="CSV output path")
    s.add_argument("--plot", action="store_true", help="render figures next to the CSV")
    s.add_argument("--timing", action="store_true",
                   help="record wall clock per step in the CSV (breaks byte determinism)")

    a = sub.add_parser("analyze", help="operation/communication cost report")
    a.add_argument("--config", required=True, help="config path or preset name (f16, toy)")
    a.add_argument("--nu", type=int, default=2**16, help="decomposition base for d = log_nu q")
    a.add_argument("--measure", type=int, nargs="?", const=8, default=None,
                   help="also run this many encrypted steps and report measured counters")
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("RINGCTL_LOG", "WARNING").upper())
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            return cmd_selftest()
        if args.command == "design":
            return cmd_design(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "analyze":
            return cmd_analyze(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RangeExceeded as exc:
        print(f"range violation: {exc}", file=sys.stderr)
        return EXIT_RANGE
    except RingctlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
