import filecmp

import numpy as np
import pytest

from ringctl.bgv import BgvParams
from ringctl.errors import RangeExceeded, Unstable
from ringctl.quantize import QuantParams
from ringctl.sim import (PlantModel, cost_report, error_metrics, packed_slot_values,
                         run_encrypted, run_nominal, run_quantized_oracle, table1_counts)
from ringctl.transform import ControllerRealization, transform

PLANT = PlantModel([[0.9]], [[1.0]], [[1.0]], [1.0])
CTRL = ControllerRealization([[0.5]], [[-0.4]], [[0.3]], [0.8])
PARAMS = BgvParams(N=100049, q=2**61 - 1, p=4, sigma=3.2, r_bar=2)
QP = QuantParams(L=1 / 100, s=1 / 100, N=100049)


@pytest.fixture(scope="module")
def tc():
    return transform(CTRL)


@pytest.fixture(scope="module")
def ref():
    return run_nominal(PLANT, CTRL.F, CTRL.G, CTRL.H, CTRL.x0, 60)


def test_nominal_zero_initial_conditions():
    plant0 = PlantModel([[0.9]], [[1.0]], [[1.0]], [0.0])
    ctrl0 = ControllerRealization([[0.5]], [[-0.4]], [[0.3]], [0.0])
    u, y, xp = run_nominal(plant0, ctrl0.F, ctrl0.G, ctrl0.H, ctrl0.x0, 20)
    assert np.all(u == 0) and np.all(y == 0) and np.all(xp == 0)


def test_nominal_hand_rolled_three_steps():
    u, y, xp = run_nominal(PLANT, CTRL.F, CTRL.G, CTRL.H, CTRL.x0, 3)
    # k = 0
    x, xpv = 0.8, 1.0
    for k in range(3):
        assert y[k, 0] == pytest.approx(xpv)
        assert u[k, 0] == pytest.approx(0.3 * x)
        xpv, x = 0.9 * xpv + 0.3 * x, 0.5 * x - 0.4 * xpv


def test_nominal_divergence_guard():
    bad = PlantModel([[2.0]], [[0.0]], [[1.0]], [1e9])
    with pytest.raises(Unstable):
        run_nominal(bad, [[0.5]], [[0.0]], [[0.0]], [0.0], 50)


def test_oracle_tracks_nominal_at_fine_resolution(tc, ref):
    u_ref, y_ref, _ = ref
    fine = QuantParams(L=1e-7, s=1e-7, N=2**62 + 1)
    oracle = run_quantized_oracle(PLANT, tc, fine, 60)
    assert np.max(np.abs(oracle.u - u_ref)) < 1e-4


def test_oracle_hand_scalar_first_step(tc):
    oracle = run_quantized_oracle(PLANT, tc, QP, 2)
    Hq = np.round(tc.Hcal / QP.s)
    mz0 = np.round(tc.z0 / QP.L)
    assert oracle.m_u[0] == pytest.approx(Hq @ mz0)
    assert oracle.u[0] == pytest.approx((Hq @ mz0) * (QP.L * QP.s))


def test_oracle_strict_range():
    tiny = QuantParams(L=1 / 100, s=1 / 100, N=257)
    with pytest.raises(RangeExceeded):
        run_quantized_oracle(PLANT, transform(CTRL), tiny, 30)


def test_encrypted_equals_oracle_both_kinds(tc, ref):
    u_ref, y_ref, _ = ref
    oracle = run_quantized_oracle(PLANT, tc, QP, 40)
    for kind in ("general", "packed"):
        trace = run_encrypted(PLANT, tc, PARAMS, QP, 40, seed=5, kind=kind,
                              ref=(u_ref[:40], y_ref[:40]))
        got = np.array([r.u for r in trace.records])
        assert np.array_equal(got, oracle.u[:40])
        assert np.array_equal(trace.m_u, oracle.m_u[:40])
        assert trace.range_ok


def test_encrypted_kind_agreement(tc, ref):
    u_ref, y_ref, _ = ref
    a = run_encrypted(PLANT, tc, PARAMS, QP, 30, seed=9, kind="general",
                      ref=(u_ref[:30], y_ref[:30]))
    b = run_encrypted(PLANT, tc, PARAMS, QP, 30, seed=10, kind="packed",
                      ref=(u_ref[:30], y_ref[:30]))
    assert np.array_equal(np.array([r.u for r in a.records]),
                          np.array([r.u for r in b.records]))


def test_encrypted_deterministic_given_seed(tc, ref, tmp_path):
    u_ref, y_ref, _ = ref
    t1 = run_encrypted(PLANT, tc, PARAMS, QP, 25, seed=3, kind="packed",
                       ref=(u_ref[:25], y_ref[:25]))
    t2 = run_encrypted(PLANT, tc, PARAMS, QP, 25, seed=3, kind="packed",
                       ref=(u_ref[:25], y_ref[:25]))
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    t1.write_csv(p1)
    t2.write_csv(p2)
    assert filecmp.cmp(p1, p2, shallow=False)


def test_csv_schema(tc, ref, tmp_path):
    u_ref, y_ref, _ = ref
    trace = run_encrypted(PLANT, tc, PARAMS, QP, 5, seed=3, kind="packed",
                          ref=(u_ref[:5], y_ref[:5]))
    path = tmp_path / "t.csv"
    trace.write_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "k,u_1,y_1,uref_1,yref_1,err_inf,enc,dec,add,mult,comm_ints,wall_ns"


def test_error_metrics(tc, ref):
    u_ref, y_ref, _ = ref
    trace = run_encrypted(PLANT, tc, PARAMS, QP, 20, seed=3, kind="packed",
                          ref=(u_ref[:20], y_ref[:20]))
    metrics = error_metrics(trace)
    assert metrics["max_err"] == trace.max_err
    assert len(metrics["per_step"]) == 20
    # identical traces give zero error
    from ringctl.sim import StepRecord, SimTrace
    ident = SimTrace(kind="x")
    for k in range(3):
        ident.records.append(StepRecord(k=k, u=u_ref[k], y=y_ref[k], u_ref=u_ref[k],
                                        y_ref=y_ref[k], err_inf=0.0))
    assert error_metrics(ident)["max_err"] == 0.0


def test_packed_slot_values_oracle(tc, rng):
    # slot accumulation equals a dense gain product, row by row
    Hq = np.asarray(np.round(tc.Hcal / QP.s), dtype=np.int64)
    blocks = [Hq[:, :1], Hq[:, 1:]]
    m_z = rng.integers(-50, 50, 2)
    slots = packed_slot_values(blocks, m_z, n=1, h=1, l=1)
    assert slots[0] == Hq[0, 0] * m_z[0] + Hq[0, 1] * m_z[1]


def test_table1_f16_instantiation():
    t = table1_counts(5, 2, 5)
    assert (t["general"]["enc"], t["general"]["dec"], t["general"]["add"],
            t["general"]["mult"]) == (7, 2, 68, 70)
    assert (t["packed"]["enc"], t["packed"]["dec"], t["packed"]["add"],
            t["packed"]["mult"]) == (2, 1, 9, 10)
    assert t["general"]["polys"] == {"u": 4, "u_bar": 6, "y": 10, "z": 70, "H": 140}
    assert t["packed"]["polys"] == {"u": 2, "u_bar": 3, "y": 2, "z": 20, "H": 20}


def test_cost_report_formulas():
    rep = cost_report(5, 2, 5, 4096, 18889455798646780911617, nu=2**16)
    assert rep["dims"]["d"] == 4
    assert rep["alg1"]["poly_mults_per_step"] == 40
    assert rep["alg1"]["comm_integers"] == 7 * 4096
    assert rep["alg1"]["relinearized_comm_integers"] == 6 * 4096
    assert rep["teranishi"]["comm_integers"] == 6 * 4096
    assert rep["teranishi"]["poly_mults_per_step"] == 4 * 6 + 2 * 4 * 6 + 2 * 4 * 6
    assert rep["kim22"]["comm_integers"] == (2 * 2 + 5) * (4096 + 1)
    assert rep["kim22"]["scalar_mults_per_step"] == (25 + 20 + 25) * 4 * 4097**2


def test_wraparound_demo_mode_runs(tc, ref, caplog):
    u_ref, y_ref, _ = ref
    tiny_N = 257
    params = BgvParams(N=tiny_N, q=2**61 - 1, p=4, sigma=3.2, r_bar=2)
    qp = QuantParams(L=1 / 100, s=1 / 100, N=tiny_N)
    with pytest.raises(RangeExceeded):
        run_encrypted(PLANT, tc, params, qp, 20, seed=2, kind="packed",
                      ref=(u_ref[:20], y_ref[:20]))
    demo = run_encrypted(PLANT, tc, params, qp, 20, seed=2, kind="packed",
                         mode="wraparound-demo", ref=(u_ref[:20], y_ref[:20]))
    assert not demo.range_ok
    assert demo.range_violation_step is not None
    # the corrupted loop visibly diverges from the reference
    assert demo.max_err > 0.05


def test_f16_oracle_regression(f16_cfg, f16_tc, f16_quant):
    # frozen first integer outputs of the bundled preset
    oracle = run_quantized_oracle(f16_cfg.plant, f16_tc, f16_quant, 3)
    assert oracle.m_u.tolist() == [[14812566, -9371028],
                                   [-10929283, -11965367],
                                   [-19126293, -14341728]]


def test_oracle_monotone_resolution_refinement(tc, ref):
    # halving L (fixed s) keeps the measured envelope below the bound at L
    from ringctl.design import ClosedLoopModel, epsilon_of, epsilon_vector
    u_ref, y_ref, _ = ref
    model = ClosedLoopModel.assemble(PLANT.A, PLANT.B, PLANT.C, CTRL.F, CTRL.G,
                                     CTRL.H, PLANT.xp0, CTRL.x0)
    budget = epsilon_vector(model, tc.M, tc.n_bar, tc.z0)
    s = 1 / 100
    for L in (1 / 100, 1 / 200, 1 / 400):
        bound = epsilon_of(L, s, budget.eps)
        for Lfine in (L, L / 2):
            qp = QuantParams(L=Lfine, s=s, N=100049)
            oracle = run_quantized_oracle(PLANT, tc, qp, 60)
            measured = max(np.max(np.abs(oracle.u - u_ref)), np.max(np.abs(oracle.y - y_ref)))
            assert measured <= bound
