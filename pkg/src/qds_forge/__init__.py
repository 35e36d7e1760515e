"""Likely-bit-string quantum digital signatures: hashing, protocol simulation,
finite-size SNS key-generation model and signature-rate optimization."""

from .bitcore import BitString, Gf2Poly, LikelySetSpec, gen_irreducible, is_irreducible
from .lfsr_hash import Digest, HashSpec, Signature, collision_bound, toeplitz_hash
from .optimizer import RatePoint, evaluate, minimize_N, search, sweep
from .protocol import Variant, run_session, sign, verify_improved, verify_likely
from .security import SecurityReport, guessing_bound, hash_forgery_bound, security_level
from .sns_model import ChannelParams, FailureProbs, Infeasible, SnsParams, estimate

__version__ = "0.1.0"
