"""Delayed aggregate signatures: BLS multi-signature plus a verifiable delay."""

from .calibrate import DelayCalibration, calibrate_delay, measure_rate
from .keys import (
    AggPubKey,
    KeyPair,
    PartialSig,
    PublicKey,
    SecretKey,
    ak_check,
    key_agg,
    key_gen,
    pop_verify,
    sign,
    verify,
)
from .params import (
    EvaluationKey,
    PubParams,
    SysParams,
    VerificationKey,
    par_gen,
    pub_params,
)
from .scheme import BAD_AGGREGATE, BAD_DELAY, DasCommitment, Verdict, da_sign, das_verify

__all__ = [
    "AggPubKey",
    "BAD_AGGREGATE",
    "BAD_DELAY",
    "DasCommitment",
    "DelayCalibration",
    "EvaluationKey",
    "KeyPair",
    "PartialSig",
    "PubParams",
    "PublicKey",
    "SecretKey",
    "SysParams",
    "Verdict",
    "VerificationKey",
    "ak_check",
    "calibrate_delay",
    "da_sign",
    "das_verify",
    "key_agg",
    "key_gen",
    "measure_rate",
    "par_gen",
    "pop_verify",
    "pub_params",
    "sign",
    "verify",
]
