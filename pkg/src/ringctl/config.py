"""Run configuration: JSON schema, validation, and bundled presets.

One JSON document describes a full experiment: plant and controller
matrices, quantization resolutions, encryption parameters, horizon, and the
controller variant to run.  The controller can be given directly as
(F, G, H, x0) or in observer form (Lc, Kc) from which F = A - Lc C + B Kc
and G = Lc, H = Kc are assembled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .quantize import QuantParams
from .sim import PlantModel
from .transform import ControllerRealization

KINDS = ("nominal", "oracle", "general", "packed")
MODES = ("strict", "wraparound-demo")


@dataclass(frozen=True)
class RunConfig:
    name: str
    plant: PlantModel
    controller: ControllerRealization
    L: float
    s: float
    N: int
    q: int
    p: int
    sigma: float
    seed: int
    r_bar: int
    T: int
    kind: str
    mode: str
    sampling_period: float = 0.05

    @property
    def quant(self) -> QuantParams:
        return QuantParams(L=self.L, s=self.s, N=self.N)


def _matrix(obj, field: str) -> np.ndarray:
    try:
        arr = np.array(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field {field!r} is not numeric") from exc
    if arr.ndim not in (1, 2):
        raise ConfigError(f"field {field!r} must be a vector or matrix")
    return arr


def _require(doc: dict, field: str):
    if field not in doc:
        raise ConfigError(f"missing required field {field!r}")
    return doc[field]


def load_config(source) -> RunConfig:
    """Parse and validate a config from a path, JSON string, or dict."""
    if isinstance(source, dict):
        doc = source
        name = doc.get("name", "config")
    else:
        path = Path(source)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        name = doc.get("name", path.stem)

    plant_doc = _require(doc, "plant")
    A = _matrix(_require(plant_doc, "A"), "plant.A")
    B = _matrix(_require(plant_doc, "B"), "plant.B")
    C = _matrix(_require(plant_doc, "C"), "plant.C")
    xp0 = _matrix(_require(plant_doc, "x0"), "plant.x0").ravel()
    try:
        plant = PlantModel(A, B, C, xp0)
    except Exception as exc:
        raise ConfigError(f"bad plant: {exc}") from exc

    ctrl_doc = _require(doc, "controller")
    if "observer" in ctrl_doc:
        ob = ctrl_doc["observer"]
        Lc = _matrix(_require(ob, "Lc"), "controller.observer.Lc")
        Kc = _matrix(_require(ob, "Kc"), "controller.observer.Kc")
        F = A - Lc @ C + B @ Kc
        G, H = Lc, Kc
    else:
        F = _matrix(_require(ctrl_doc, "F"), "controller.F")
        G = _matrix(_require(ctrl_doc, "G"), "controller.G")
        H = _matrix(_require(ctrl_doc, "H"), "controller.H")
    x0 = _matrix(_require(ctrl_doc, "x0"), "controller.x0").ravel()
    try:
        controller = ControllerRealization(F, G, H, x0)
    except Exception as exc:
        raise ConfigError(f"bad controller: {exc}") from exc

    if controller.l != plant.l or controller.h != plant.h:
        raise ConfigError(
            f"plant I/O ({plant.h} inputs, {plant.l} outputs) does not match "
            f"controller ({controller.h} outputs, {controller.l} inputs)")

    quant = _require(doc, "quantization")
    if "Linv" in quant:
        L = 1.0 / float(quant["Linv"])
    else:
        L = float(_require(quant, "L"))
    if "sinv" in quant:
        s = 1.0 / float(quant["sinv"])
    else:
        s = float(_require(quant, "s"))
    if L <= 0 or s <= 0 or 1.0 / s < 1.0:
        raise ConfigError("quantization must satisfy L > 0 and 1/s >= 1")

    enc = _require(doc, "encryption")
    N = int(_require(enc, "N"))
    q = int(_require(enc, "q"))
    p = int(_require(enc, "p"))
    sigma = float(enc.get("sigma", 3.2))
    seed = int(enc.get("seed", 1))
    n, h, l = controller.n, controller.h, controller.l
    r_bar = int(enc.get("r_bar", max(n * (h + l), 2 * n)))
    if p < 1 or (p & (p - 1)) != 0:
        raise ConfigError("encryption.p must be a power of two")
    if N < 2 or q <= N:
        raise ConfigError("need q > N >= 2")

    kind = doc.get("kind", "packed")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}")
    mode = doc.get("mode", "strict")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}")
    T = int(doc.get("horizon", 100))
    if T < 1:
        raise ConfigError("horizon must be >= 1")
    if kind == "packed" and p < h * max(h, l):
        raise ConfigError(f"packed design needs p >= h*max(h,l) = {h * max(h, l)}")

    return RunConfig(name=name, plant=plant, controller=controller, L=L, s=s,
                     N=N, q=q, p=p, sigma=sigma, seed=seed, r_bar=r_bar, T=T,
                     kind=kind, mode=mode,
                     sampling_period=float(doc.get("sampling_period", 0.05)))


def preset_path(name: str) -> Path:
    """Filesystem path of a bundled preset ('f16' or 'toy')."""
    base = name[:-5] if name.endswith(".json") else name
    ref = resources.files("ringctl.presets").joinpath(f"{base}.json")
    with resources.as_file(ref) as concrete:
        return Path(concrete)


def resolve_config(arg: str) -> RunConfig:
    """Accept a config file path or a bundled preset name."""
    if Path(arg).exists():
        return load_config(arg)
    try:
        return load_config(preset_path(arg))
    except (FileNotFoundError, ModuleNotFoundError):
        raise ConfigError(f"config {arg!r} is neither a file nor a known preset")
