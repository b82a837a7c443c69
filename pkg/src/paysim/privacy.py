"""One-time receiving addresses derived from a shared secret.

The sender knows the recipient's root public key and a secret shared
off-chain. For each index it computes a tweak ``t_i`` from the hash-chained
seed and pays to ``address(A + t_i * B)``. Only the recipient, who holds the
root private scalar ``a``, can form ``a + t_i`` and sign from that address.
"""

from __future__ import annotations

from dataclasses import dataclass

from .crypto import Address, KeyPair, ScalarKeyPair, address_of, hash_to_scalar, tweak_public_key, tweak_scalar
from .encoding import sha256
from .ledger import Chain

# A requested transfer counts as received; a rejection takes it back.
_CREDIT_EVENTS = ("Allocated", "Minted", "TransferRequested", "ForcedTransfer", "DelegatedTransfer", "Unlocked")


def next_seed(seed: bytes) -> bytes:
    return sha256(seed)


def seed_at(shared_secret: bytes, index: int) -> bytes:
    if index < 0:
        raise ValueError("index must be non-negative")
    seed = bytes(shared_secret)
    for _ in range(index):
        seed = next_seed(seed)
    return seed


def _tweak(seed: bytes, root_public: bytes) -> int:
    return hash_to_scalar(b"paysim/stealth", seed, root_public)


def derive_stealth_public(shared_secret: bytes, root_public: bytes, index: int) -> bytes:
    return tweak_public_key(root_public, _tweak(seed_at(shared_secret, index), root_public))


def derive_stealth_address(shared_secret: bytes, root_public: bytes, index: int) -> Address:
    return address_of(derive_stealth_public(shared_secret, root_public, index))


def derive_stealth_keys(root: KeyPair, shared_secret: bytes, index: int) -> ScalarKeyPair:
    """Recipient side: the signing key for the ``index``-th stealth address."""
    tweak = _tweak(seed_at(shared_secret, index), root.public)
    return ScalarKeyPair.from_scalar(tweak_scalar(root.private, tweak))


def derive_addresses(shared_secret: bytes, root_public: bytes, count: int) -> list[Address]:
    out, seed = [], bytes(shared_secret)
    for _ in range(count):
        out.append(address_of(tweak_public_key(root_public, _tweak(seed, root_public))))
        seed = next_seed(seed)
    return out


@dataclass(frozen=True)
class StealthPayment:
    index: int
    address: Address
    class_id: Address
    amount: int


def scan_for_payments(root: KeyPair, shared_secret: bytes, snapshot: Chain, max_index: int,
                      class_id: Address | None = None) -> list[StealthPayment]:
    """Report value received at stealth indices ``0..max_index`` inclusive.

    Payments beyond ``max_index`` are not seen.
    """
    watched = {addr: i for i, addr in enumerate(derive_addresses(shared_secret, root.public, max_index + 1))}
    totals: dict[tuple[int, Address], int] = {}
    for ev in snapshot.events:
        if class_id is not None and ev.emitter != class_id:
            continue
        to = ev.payload.get("to")
        if to not in watched or ev.payload.get("from") == to:
            continue
        if ev.name in _CREDIT_EVENTS:
            sign = 1
        elif ev.name == "TransferRejected":
            sign = -1
        else:
            continue
        key = (watched[to], ev.emitter)
        totals[key] = totals.get(key, 0) + sign * ev.payload["amount"]
    payments = []
    for (index, cls), amount in sorted(totals.items()):
        if amount:
            addr = next(a for a, i in watched.items() if i == index)
            payments.append(StealthPayment(index, addr, cls, amount))
    return payments
