"""Shared fixtures: toy parameters and session-cached F-16 runs.

The F-16 encrypted runs are expensive, so the traces are produced once per
session and shared by the module tests and the acceptance suite.  The
acceptance criteria register one-line verdicts that are echoed at the end of
the run.
"""

from __future__ import annotations

import numpy as np
import pytest

from ringctl.bgv import BgvParams
from ringctl.config import resolve_config
from ringctl.quantize import QuantParams
from ringctl.sim import run_encrypted, run_nominal, run_quantized_oracle
from ringctl.transform import transform

CRITERION_LINES: list = []


def record_criterion(num: int, ok: bool, detail: str):
    line = f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'} - {detail}"
    CRITERION_LINES.append((num, line))
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(CRITERION_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def toy_params() -> BgvParams:
    return BgvParams(N=17, q=2**61 - 1, p=4, sigma=3.2, r_bar=2)


@pytest.fixture(scope="session")
def f16_params() -> BgvParams:
    return BgvParams(N=65929217, q=18889455798646780911617, p=4096, sigma=3.2, r_bar=35)


@pytest.fixture(scope="session")
def toy_cfg():
    return resolve_config("toy")


@pytest.fixture(scope="session")
def f16_cfg():
    return resolve_config("f16")


@pytest.fixture(scope="session")
def f16_tc(f16_cfg):
    return transform(f16_cfg.controller)


@pytest.fixture(scope="session")
def f16_quant(f16_cfg) -> QuantParams:
    return f16_cfg.quant


@pytest.fixture(scope="session")
def f16_ref(f16_cfg):
    ctrl = f16_cfg.controller
    return run_nominal(f16_cfg.plant, ctrl.F, ctrl.G, ctrl.H, ctrl.x0, 200)


@pytest.fixture(scope="session")
def f16_oracle(f16_cfg, f16_tc, f16_quant):
    return run_quantized_oracle(f16_cfg.plant, f16_tc, f16_quant, 200)


@pytest.fixture(scope="session")
def f16_packed_trace(f16_cfg, f16_tc, f16_params, f16_quant, f16_ref):
    u_ref, y_ref, _ = f16_ref
    return run_encrypted(f16_cfg.plant, f16_tc, f16_params, f16_quant, T=200,
                         seed=f16_cfg.seed, kind="packed", ref=(u_ref, y_ref))


@pytest.fixture(scope="session")
def f16_general_trace(f16_cfg, f16_tc, f16_params, f16_quant, f16_ref):
    u_ref, y_ref, _ = f16_ref
    return run_encrypted(f16_cfg.plant, f16_tc, f16_params, f16_quant, T=100,
                         seed=f16_cfg.seed, kind="general", ref=(u_ref, y_ref))


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
