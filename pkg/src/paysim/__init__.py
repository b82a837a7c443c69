"""Deterministic simulator for blockchain payment patterns."""

from .crypto import ZERO_ADDRESS, Address, KeyPair
from .ledger import Chain, Receipt
from .world import new_chain

__all__ = ["Address", "Chain", "KeyPair", "Receipt", "ZERO_ADDRESS", "new_chain"]
__version__ = "0.1.0"
