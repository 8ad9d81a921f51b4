"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line (echoed again in the terminal
summary) with the measured figures next to the required ones.  Expensive
F-16 closed-loop runs come from session fixtures shared with the module
tests.
"""

import time

import numpy as np

from conftest import record_criterion

from ringctl.bgv import (BgvParams, decrypt, encrypt, hom_add, hom_mul, keygen,
                         prod1, prod2)
from ringctl.controller_general import GeneralEncController
from ringctl.controller_packed import PackedEncController
from ringctl.design import (ClosedLoopModel, decay_certificate, epsilon_of,
                            epsilon_vector, next_ntt_prime)
from ringctl.errors import SInvalid
from ringctl.packing import PackingContext
from ringctl.quantize import QuantParams
from ringctl.ring import Modulus, RingPoly, centered_mod, ntt_forward, ntt_inverse
from ringctl.sim import cost_report, run_quantized_oracle, run_encrypted, table1_counts

from test_transform import random_controller


# ---------------------------------------------------------------------------
# 1. packing golden vectors

def test_criterion_1_appendix_golden_vectors():
    mod17 = Modulus.with_root(17, 4)
    assert mod17.root == 2
    ntt_inverse([1, 3, 5, 7], mod17)  # warm the table cache before timing
    t0 = time.perf_counter()
    pu = ntt_inverse([1, 3, 5, 7], mod17)
    pv = ntt_inverse([2, -4, -6, 8], mod17)
    s = pu + pv
    prod = pu * pv
    ok = (pu.coeff_list() == [4, -7, 4, -7]
          and pv.coeff_list() == [0, 7, 8, 3]
          and s.coeff_list() == [4, 0, -5, -4]
          and ntt_forward(s) == [3, -1, -1, -2]
          and prod.coeff_list() == [4, 4, 4, 1]
          and ntt_forward(prod) == [2, 5, 4, 5])
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 1e-3
    record_criterion(1, ok, f"Pack/Unpack goldens exact in {elapsed * 1e6:.0f} us (< 1 ms)")
    assert ok


# ---------------------------------------------------------------------------
# 2. BGV correctness suite

def test_criterion_2_bgv_suite(f16_params, rng):
    t_start = time.perf_counter()
    toy = BgvParams(N=17, q=2**61 - 1, p=4, sigma=3.2, r_bar=35)
    toy_key = keygen(toy, rng)
    toy_ctx = PackingContext(toy.plain_modulus)
    f16 = f16_params
    f16_key = keygen(f16, rng)
    f16_ctx = PackingContext(f16.plain_modulus)
    counts = {}

    def rand_vec(params, size):
        half = params.N // 2
        return rng.integers(-half, half, size)

    # Eq (1): Dec(Enc(m)) = m
    n_cases = 0
    for params, key, reps in ((toy, toy_key, 1000), (f16, f16_key, 120)):
        plain = params.plain_modulus
        for _ in range(reps):
            m = RingPoly(rand_vec(params, params.p), plain)
            assert decrypt(encrypt(m, key, rng), key) == m
            n_cases += 1
    counts["correctness"] = n_cases

    # Eq (2): additive homomorphism
    n_cases = 0
    for params, key, ctx, reps in ((toy, toy_key, toy_ctx, 1000), (f16, f16_key, f16_ctx, 60)):
        for _ in range(reps):
            u = rand_vec(params, params.p)
            v = rand_vec(params, params.p)
            cu = encrypt(ctx.pack(u.tolist()), key, rng)
            cv = encrypt(ctx.pack(v.tolist()), key, rng)
            got = ctx.unpack(decrypt(hom_add(cu, cv), key))
            want = [centered_mod(int(x), params.N) for x in u + v]
            assert list(got) == want
            n_cases += 1
    counts["addition"] = n_cases

    # Hadamard multiplication
    n_cases = 0
    for params, key, ctx, reps in ((toy, toy_key, toy_ctx, 1000), (f16, f16_key, f16_ctx, 60)):
        for _ in range(reps):
            u = rand_vec(params, params.p)
            v = rand_vec(params, params.p)
            cu = encrypt(ctx.pack(u.tolist()), key, rng)
            cv = encrypt(ctx.pack(v.tolist()), key, rng)
            got = ctx.unpack(decrypt(hom_mul(cu, cv), key))
            want = [centered_mod(int(x) * int(y), params.N) for x, y in zip(u, v)]
            assert list(got) == want
            n_cases += 1
    counts["hadamard"] = n_cases

    # Prod1 up to r = 35 (scalar messages in constant polynomials)
    n_cases = 0
    for params, key, reps, full in ((toy, toy_key, 1000, 2), (f16, f16_key, 8, 2)):
        plain = params.plain_modulus
        for i in range(reps + full):
            r = 35 if i < full else int(rng.integers(1, 36))
            a = rand_vec(params, r)
            m = rand_vec(params, r)
            enc_a = [encrypt(RingPoly.constant(int(x), plain), key, rng) for x in a]
            enc_m = [encrypt(RingPoly.constant(int(x), plain), key, rng) for x in m]
            got = int(decrypt(prod1(enc_a, enc_m, params), key).coeffs[0])
            want = centered_mod(sum(int(x) * int(y) for x, y in zip(a, m)), params.N)
            assert got == want
            n_cases += 1
    counts["prod1"] = n_cases

    # Prod2 up to r = 10 (packed vectors)
    n_cases = 0
    for params, key, ctx, reps, full in ((toy, toy_key, toy_ctx, 1000, 2),
                                         (f16, f16_key, f16_ctx, 8, 2)):
        for i in range(reps + full):
            r = 10 if i < full else int(rng.integers(1, 11))
            avs = [rand_vec(params, params.p) for _ in range(r)]
            mvs = [rand_vec(params, params.p) for _ in range(r)]
            enc_a = [encrypt(ctx.pack(v.tolist()), key, rng) for v in avs]
            enc_m = [encrypt(ctx.pack(v.tolist()), key, rng) for v in mvs]
            got = ctx.unpack(decrypt(prod2(enc_a, enc_m, params), key))
            acc = sum(a.astype(object) * m.astype(object) for a, m in zip(avs, mvs))
            want = [centered_mod(int(x), params.N) for x in acc]
            assert list(got) == want
            n_cases += 1
    counts["prod2"] = n_cases

    elapsed = time.perf_counter() - t_start
    ok = elapsed < 60.0
    record_criterion(2, ok, f"cases per op {counts}, exact, {elapsed:.1f} s (< 60 s)")
    assert ok


# ---------------------------------------------------------------------------
# 3. window realization property

def test_criterion_3_window_realization(rng):
    worst_traj, worst_init = 0.0, 0.0
    for _ in range(100):
        n = int(rng.integers(1, 6))
        h = int(rng.integers(1, 4))
        l = int(rng.integers(1, 4))
        ctrl, tc = random_controller(rng, n, h, l)
        init_res = np.max(np.abs(tc.M @ tc.z0 - ctrl.x0)) / max(1.0, np.max(np.abs(ctrl.x0)))
        worst_init = max(worst_init, init_res)
        x = ctrl.x0.copy()
        z = tc.z0.copy()
        for k in range(50):
            u_ref = ctrl.H @ x
            u_win = tc.Hcal @ z
            rel = np.max(np.abs(u_ref - u_win)) / max(1.0, np.max(np.abs(u_ref)))
            worst_traj = max(worst_traj, rel)
            y = rng.standard_normal(l)
            x = ctrl.F @ x + ctrl.G @ y
            z = tc.Fcal @ z + tc.Gcal @ y + tc.Rcal @ u_win
    ok = worst_traj < 1e-6 and worst_init < 1e-8
    record_criterion(3, ok, f"100 controllers, 50 steps: worst output residual "
                            f"{worst_traj:.2e} (< 1e-6), worst M z0 - x0 {worst_init:.2e} (< 1e-8)")
    assert ok


# ---------------------------------------------------------------------------
# 4. exact equivalence of both encrypted designs

def test_criterion_4_exact_equivalence(f16_cfg, f16_tc, f16_quant, f16_oracle,
                                       f16_packed_trace, f16_general_trace):
    T = 100
    oracle = f16_oracle
    packed_u = np.array([r.u for r in f16_packed_trace.records[:T]])
    general_u = np.array([r.u for r in f16_general_trace.records[:T]])
    eq_packed = np.array_equal(packed_u, oracle.u[:T]) and np.array_equal(
        f16_packed_trace.m_u[:T], oracle.m_u[:T])
    eq_general = np.array_equal(general_u, oracle.u[:T]) and np.array_equal(
        f16_general_trace.m_u[:T], oracle.m_u[:T])
    # the provisos: every window/output/slot integer stayed inside Z_N
    # (monitored exactly during the runs), and the elementwise design's
    # signal condition holds in its literal form
    half = f16_cfg.N / 2
    qp = f16_quant
    lemma_lhs = (1 / qp.L) * max(np.max(np.abs(oracle.u[:T])) / qp.s,
                                 np.max(np.abs(oracle.y[:T])),
                                 np.max(np.abs(f16_tc.z0))) + 0.5
    provisos = (f16_packed_trace.range_ok and f16_general_trace.range_ok
                and lemma_lhs < half)
    ok = eq_packed and eq_general and provisos
    record_criterion(4, ok, f"bit-exact over T={T}: packed {eq_packed}, general "
                            f"{eq_general}; range conditions held (worst signal bound "
                            f"{lemma_lhs:.3g} < N/2 = {half:.3g})")
    assert ok


# ---------------------------------------------------------------------------
# 5. epsilon-bound containment grid

def test_criterion_5_epsilon_bound_grid(f16_cfg, f16_tc):
    """Theorem-level bound on the 3x3 resolution grid.

    For this plant every valid decay certificate yields
    beta >= 1 + ||C||/(1 - gamma) > 1100 (||C|| = 57.04, rho = 0.9499), so
    eps0 = n_bar*beta/2 > 10^5 >= 1/s at every grid point and the bound
    eps(L, s) is undefined (SInvalid).  The criterion is therefore recorded
    as failing; measured deviations (exact integer oracle, which the
    encrypted loops reproduce bit for bit) are reported for reference.
    """
    plant, ctrl = f16_cfg.plant, f16_cfg.controller
    model = ClosedLoopModel.assemble(plant.A, plant.B, plant.C, ctrl.F, ctrl.G,
                                     ctrl.H, plant.xp0, ctrl.x0)
    alpha, gamma = decay_certificate(model.A_cl)
    budget = epsilon_vector(model, f16_tc.M, f16_tc.n_bar, f16_tc.z0, alpha, gamma)
    lines = []
    passed = 0
    total = 0
    for Linv in (2e2, 2e3, 2e4):
        for sinv in (1e3, 1e4, 1e5):
            total += 1
            L, s = 1.0 / Linv, 1.0 / sinv
            # measured deviation from the exact quantized dynamics, using a
            # plaintext space large enough to rule out wraparound
            N_big = next_ntt_prime(1e15, f16_cfg.p)
            qp = QuantParams(L=L, s=s, N=N_big)
            oracle = run_quantized_oracle(plant, f16_tc, qp, 100)
            from ringctl.sim import run_nominal
            u_ref, y_ref, _ = run_nominal(plant, ctrl.F, ctrl.G, ctrl.H, ctrl.x0, 100)
            measured = max(np.max(np.abs(oracle.u - u_ref)), np.max(np.abs(oracle.y - y_ref)))
            try:
                bound = epsilon_of(L, s, budget.eps)
                ok = measured <= bound
                passed += ok
                lines.append(f"(1/L={Linv:g},1/s={sinv:g}): measured {measured:.3g} "
                             f"<= eps {bound:.3g}: {ok}")
            except SInvalid:
                lines.append(f"(1/L={Linv:g},1/s={sinv:g}): measured {measured:.3g}, "
                             f"eps undefined (1/s <= eps0 = {budget.eps[0]:.3g})")
    ok = passed == total
    record_criterion(5, ok, f"{passed}/{total} grid points admit the bound; "
                            f"eps0 = {budget.eps[0]:.3g} exceeds every grid 1/s "
                            f"(spec defect, see decisions ledger). "
                            + " | ".join(lines[:3]) + " ...")
    assert ok, "Theorem-1 bound undefined on the stated grid for this plant:\n" + "\n".join(lines)


# ---------------------------------------------------------------------------
# 6. error magnitude reproduction

def test_criterion_6_error_magnitudes(f16_cfg, f16_tc, f16_params, f16_ref,
                                      f16_packed_trace):
    T = 100  # 5 s at the 0.05 s sampling period
    err_fine = max(float(np.max(np.abs(r.u - r.u_ref))) for r in f16_packed_trace.records[:T])
    ok_fine = err_fine <= 1e-2

    # coarser gain resolution 1/s = 1e3, same run but fresh controller
    qp = QuantParams(L=f16_cfg.L, s=1e-3, N=f16_cfg.N)
    u_ref, y_ref, _ = f16_ref
    trace = run_encrypted(f16_cfg.plant, f16_tc, f16_params, qp, T=T,
                          seed=f16_cfg.seed, kind="packed",
                          ref=(u_ref[:T], y_ref[:T]))
    err_coarse = max(float(np.max(np.abs(r.u - r.u_ref))) for r in trace.records)
    ok_coarse = 1e-2 <= err_coarse <= 1e-1
    ok = ok_fine and ok_coarse
    record_criterion(6, ok, f"max|u-u'| at 1/s=1e4: {err_fine:.3g} (<= 1e-2, paper ~5e-3); "
                            f"at 1/s=1e3: {err_coarse:.3g} (in [1e-2, 1e-1], paper ~4e-2)")
    assert ok


# ---------------------------------------------------------------------------
# 7. closed-loop regulation

def test_criterion_7_plant_state_decay(f16_packed_trace):
    xp = f16_packed_trace.xp
    at_200 = float(np.max(np.abs(xp[200])))
    ok = at_200 < 0.05
    record_criterion(7, ok, f"||x_p(200)|| = {at_200:.4g} (< 0.05) under the packed "
                            f"encrypted controller")
    assert ok


# ---------------------------------------------------------------------------
# 8. operation-count ledger

def test_criterion_8_operation_counts(f16_cfg, f16_tc, f16_params, f16_quant,
                                      f16_packed_trace, f16_general_trace, rng):
    n, h, l = 5, 2, 5
    want = table1_counts(n, h, l)
    gen_steps = [(r.counters["enc"], r.counters["dec"], r.counters["add"], r.counters["mult"])
                 for r in f16_general_trace.records]
    pak_steps = [(r.counters["enc"], r.counters["dec"], r.counters["add"], r.counters["mult"])
                 for r in f16_packed_trace.records]
    ok_gen = set(gen_steps) == {(7, 2, 68, 70)}
    ok_pak = set(pak_steps) == {(2, 1, 9, 10)}
    ok_formula = ((want["general"]["enc"], want["general"]["dec"], want["general"]["add"],
                   want["general"]["mult"]) == (h + l, h, h * (n * h + n * l - 1), h * n * (h + l)))

    # polynomial storage measured on live controller objects
    key = keygen(f16_params, rng)
    gctl = GeneralEncController(f16_tc, f16_params, f16_quant, key, rng)
    pctl = PackedEncController(f16_tc, f16_params, f16_quant, key, rng)
    g_polys = gctl.polynomial_counts()
    p_polys = pctl.polynomial_counts()
    u_bar_g = gctl.output()
    u_bar_p = pctl.output()
    g_polys["u_bar"] = sum(len(ct) for ct in u_bar_g)
    p_polys["u_bar"] = len(u_bar_p)
    ok_polys = (g_polys == want["general"]["polys"] and p_polys == want["packed"]["polys"])

    # run totals equal T times the per-step row (setup encryptions excluded)
    T_p = len(f16_packed_trace.records)
    tot = f16_packed_trace.totals
    ok_totals = (tot.mult == T_p * 2 * n and tot.add == T_p * (2 * n - 1)
                 and tot.dec == T_p and tot.enc == T_p * 2)
    ok = ok_gen and ok_pak and ok_formula and ok_polys and ok_totals
    record_criterion(8, ok, f"measured per-step counters general {gen_steps[0]} "
                            f"packed {pak_steps[0]}; storage general {g_polys} "
                            f"packed {p_polys}")
    assert ok


# ---------------------------------------------------------------------------
# 9. communication ledger

def test_criterion_9_communication(f16_packed_trace):
    comm = {r.comm_integers for r in f16_packed_trace.records}
    ok_comm = comm == {7 * 4096}
    rep = cost_report(5, 2, 5, 4096, 18889455798646780911617)
    ok_analytic = (rep["alg1"]["relinearized_comm_integers"] == 6 * 4096
                   and rep["kim22"]["comm_integers"] == (2 * 2 + 5) * (4096 + 1))
    ok = ok_comm and ok_analytic
    record_criterion(9, ok, f"packed transmits {sorted(comm)} integers/step (= 7p); "
                            f"relinearized what-if 6p = {6 * 4096}, elementwise "
                            f"baseline (2h+l)(p+1) = {9 * 4097}")
    assert ok


# ---------------------------------------------------------------------------
# 10. timing sanity

def test_criterion_10_timing(f16_packed_trace, f16_cfg):
    walls = np.array([r.wall_ns for r in f16_packed_trace.records]) / 1e9
    mean = float(np.mean(walls))
    ok = mean <= f16_cfg.sampling_period
    record_criterion(10, ok, f"mean packed step {mean * 1e3:.1f} ms <= sampling period "
                             f"{f16_cfg.sampling_period * 1e3:.0f} ms "
                             f"(paper reports 10.4 ms on its hardware)")
    assert ok
