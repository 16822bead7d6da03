"""Visible compression of mixed-state quantum sources, with classical companions."""

from .ensemble import Ensemble, builtin_trine, builtin_two_coins, load_ensemble, resolve_ensemble
from .protocol import ProtocolConfig, alice_encode, bob_decode, expected_fidelity_exact, run_trials
from .rng import SharedRandomness

__all__ = [
    "Ensemble",
    "ProtocolConfig",
    "SharedRandomness",
    "alice_encode",
    "bob_decode",
    "builtin_trine",
    "builtin_two_coins",
    "expected_fidelity_exact",
    "load_ensemble",
    "resolve_ensemble",
    "run_trials",
]

__version__ = "0.1.0"
