"""Encrypted linear dynamic controllers over a from-scratch BGV cryptosystem.

The toolkit re-realizes a controllable and observable controller as a fixed
window of past inputs/outputs, encrypts it so every step costs a bounded
number of homomorphic multiplications, and provides a Ring-LWE-packed
variant, a parameter designer, and a closed-loop simulation harness.
"""

__version__ = "0.1.0"

from .bgv import (BgvParams, Ciphertext, OpCounters, SecretKey, decrypt, encrypt,
                  hom_add, hom_mul, keygen, plain_scalar_mul, prod1, prod2,
                  validate_params)
from .config import RunConfig, load_config, resolve_config
from .controller_general import GeneralEncController, actuator_step, sensor_encrypt
from .controller_packed import (PackedEncController, actuator_partition_sum,
                                duplicate_pack_encrypt, split_H, vectorize_pad)
from .design import (ClosedLoopModel, ErrorBudget, bound_S, decay_certificate,
                     epsilon_of, epsilon_vector, min_modulus_general,
                     min_modulus_packed)
from .errors import RingctlError
from .packing import PackingContext, pack, unpack
from .quantize import QuantParams, quantize, rescale, round_half_up
from .ring import (Modulus, RingPoly, centered_mod, find_primitive_root,
                   ntt_forward, ntt_inverse, poly_add, poly_mul)
from .sim import (PlantModel, SimTrace, cost_report, error_metrics, run_encrypted,
                  run_nominal, run_quantized_oracle, table1_counts)
from .transform import (ControllerRealization, TransformedController, build_M,
                        build_structural, build_z0, deadbeat_gain, transform)

__all__ = [name for name in dir() if not name.startswith("_")]
