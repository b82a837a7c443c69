"""Deterministic single-process account-model ledger.

Contracts are dataclasses whose fields are their entire storage. Public entry
points are methods marked with :func:`external` (callable from transactions
and other contracts) or :func:`internal` (callable only from other contracts).
Each takes a :class:`Context` as first argument after ``self``.

Atomicity is provided by a per-transaction journal: the first time a contract
is entered during a transaction a deep copy of it is stashed, and a revert
puts the copies back.
"""

from __future__ import annotations

import copy
import dataclasses
import functools
import inspect
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, TypeVar

from . import errors
from .crypto import Address, KeyPair, address_of, verify
from .encoding import encode, hash_value, sha256

log = logging.getLogger(__name__)

FEE_PER_TX = 1

C = TypeVar("C", bound="Contract")


def external(fn: Callable) -> Callable:
    fn._access = "external"
    return fn


def internal(fn: Callable) -> Callable:
    fn._access = "internal"
    return fn


@functools.lru_cache(maxsize=None)
def _signature(fn: Callable) -> inspect.Signature:
    return inspect.signature(fn)


def system_address(name: str) -> Address:
    return Address(hash_value("paysim/system", name))


@dataclass(kw_only=True)
class Contract:
    address: Address

    kind = "contract"


@dataclass(frozen=True)
class Transaction:
    sender: Address
    target: Address
    method: str
    args: dict[str, Any]
    nonce: int
    public_key: bytes
    signature: bytes = b""

    def signing_bytes(self) -> bytes:
        return self._signing_bytes

    @functools.cached_property
    def _signing_bytes(self) -> bytes:
        return encode(["paysim/tx", self.sender, self.target, self.method, self.args, self.nonce, self.public_key])

    @property
    def args_bytes(self) -> bytes:
        return encode(self.args)

    @functools.cached_property
    def hash(self) -> bytes:
        return sha256(self.signing_bytes() + encode(self.signature))

    def signed(self, keys) -> "Transaction":
        return dataclasses.replace(self, signature=keys.sign(self.signing_bytes()))


@dataclass(frozen=True)
class Event:
    height: int
    index: int
    emitter: Address
    name: str
    payload: dict[str, Any]

    def __getitem__(self, key: str) -> Any:
        return self.payload[key]


@dataclass
class Account:
    public_key: bytes | None = None
    nonce: int = 0
    balance: int = 0
    fees_paid: int = 0


@dataclass(frozen=True)
class Block:
    number: int
    parent: bytes
    tx_hashes: tuple[bytes, ...]
    event_count: int

    @property
    def hash(self) -> bytes:
        return sha256(encode(self))


@dataclass
class Receipt:
    status: str
    tx_hash: bytes
    height: int
    fee: int
    value: Any = None
    reason: str | None = None
    message: str = ""
    events: tuple[Event, ...] = ()
    error: errors.LedgerError | None = field(default=None, repr=False, compare=False)

    @property
    def ok(self) -> bool:
        return self.status == "success"

    def raise_for_status(self) -> "Receipt":
        if self.error is not None:
            raise self.error
        return self


class Context:
    """Execution context handed to contract methods."""

    __slots__ = ("chain", "sender", "origin", "this")

    def __init__(self, chain: "Chain", sender: Address, origin: Address, this: Address):
        self.chain = chain
        self.sender = sender
        self.origin = origin
        self.this = this

    @property
    def height(self) -> int:
        return self.chain.height

    @property
    def sender_is_contract(self) -> bool:
        return self.sender in self.chain.contracts

    def emit(self, name: str, /, **payload: Any) -> Event:
        return self.chain._emit(self.this, name, payload)

    def call(self, target: Address, method: str, /, **args: Any) -> Any:
        return self.chain._invoke(self.this, self.origin, target, method, args, nested=True)

    def view(self, target: Address, cls: type[C] | None = None) -> C:
        return self.chain.get(target, cls)

    def deploy(self, cls: type[C], **fields: Any) -> C:
        return self.chain._deploy(cls, **fields)


class Chain:
    """The whole simulated ledger.

    Mutation is single-writer: one transaction or ``mine_block`` at a time.
    """

    def __init__(self) -> None:
        self.height = 0
        self.accounts: dict[Address, Account] = {}
        self.contracts: dict[Address, Contract] = {}
        self.events: list[Event] = []
        self.blocks: list[Block] = []
        self.instance_counter = 0
        self._pending: list[bytes] = []
        self._journal: dict[Address, Contract | None] | None = None
        self._account_journal: dict[Address, Account | None] = {}
        self._sealed = False

    # -- accounts -------------------------------------------------------------

    def create_account(self, seed: bytes, native_balance: int = 0) -> KeyPair:
        keys = KeyPair.from_seed(seed)
        existing = self.accounts.get(keys.address)
        if existing is not None:
            if existing.public_key not in (None, keys.public):
                raise RuntimeError(f"address collision on {keys.address.hex()}")
            existing.public_key = keys.public
            return keys
        self.accounts[keys.address] = Account(public_key=keys.public, balance=native_balance)
        return keys

    def nonce_of(self, address: Address) -> int:
        acct = self.accounts.get(address)
        return acct.nonce if acct else 0

    def native_balance(self, address: Address) -> int:
        acct = self.accounts.get(address)
        return acct.balance if acct else 0

    def public_key_of(self, address: Address) -> bytes | None:
        acct = self.accounts.get(address)
        return acct.public_key if acct else None

    # -- contracts ------------------------------------------------------------

    def install(self, contract: Contract) -> Contract:
        """Place a contract at genesis, outside any transaction."""
        if contract.address in self.contracts:
            raise RuntimeError(f"address {contract.address.hex()} already in use")
        self.contracts[contract.address] = contract
        return contract

    def get(self, address: Address, cls: type[C] | None = None) -> C:
        contract = self.contracts.get(address)
        if contract is None or (cls is not None and not isinstance(contract, cls)):
            raise errors.UnknownTarget(address.hex() if isinstance(address, bytes) else repr(address))
        return contract  # type: ignore[return-value]

    def instances(self, cls: type[C]) -> list[C]:
        return [c for c in self.contracts.values() if isinstance(c, cls)]

    def _deploy(self, cls: type[C], **fields: Any) -> C:
        addr = Address(hash_value("paysim/instance", self.instance_counter))
        self.instance_counter += 1
        contract = cls(address=addr, **fields)
        self.contracts[addr] = contract
        if self._journal is not None and addr not in self._journal:
            self._journal[addr] = None
        return contract

    def _touch(self, address: Address) -> None:
        if self._journal is not None and address not in self._journal:
            self._journal[address] = copy.deepcopy(self.contracts[address])

    def _touch_account(self, address: Address) -> Account:
        acct = self.accounts.get(address)
        if address not in self._account_journal:
            self._account_journal[address] = copy.copy(acct)
        if acct is None:
            acct = self.accounts[address] = Account()
        return acct

    def _resolve(self, target: Address, method: str, nested: bool) -> Callable:
        contract = self.contracts.get(target)
        if contract is None:
            raise errors.UnknownTarget(target.hex())
        fn = getattr(type(contract), method, None)
        access = getattr(fn, "_access", None)
        if access is None or (access == "internal" and not nested):
            raise errors.UnknownMethod(f"{contract.kind}.{method}")
        return fn

    def _invoke(self, sender: Address, origin: Address, target: Address, method: str,
                args: dict[str, Any], nested: bool) -> Any:
        fn = self._resolve(target, method, nested)
        try:
            _signature(fn).bind(None, None, **args)
        except TypeError as exc:
            raise errors.BadArguments(f"{method}: {exc}") from None
        self._touch(target)
        ctx = Context(self, sender, origin, target)
        return fn(self.contracts[target], ctx, **args)

    def _emit(self, emitter: Address, name: str, payload: dict[str, Any]) -> Event:
        event = Event(self.height, len(self.events), emitter, name, payload)
        self.events.append(event)
        return event

    # -- transactions ---------------------------------------------------------

    def build_tx(self, keys, target: Address, method: str, /, **args: Any) -> Transaction:
        tx = Transaction(keys.address, target, method, args, self.nonce_of(keys.address), keys.public)
        return tx.signed(keys)

    def send(self, keys, target: Address, method: str, /, **args: Any) -> Receipt:
        """Build, sign and submit a transaction from ``keys``."""
        return self.submit_tx(self.build_tx(keys, target, method, **args))

    def _precheck(self, tx: Transaction) -> None:
        if address_of(tx.public_key) != tx.sender or not verify(tx.public_key, tx.signature, tx.signing_bytes()):
            raise errors.BadSignature("signature does not verify for sender")
        if tx.nonce != self.nonce_of(tx.sender):
            raise errors.BadNonce(f"expected nonce {self.nonce_of(tx.sender)}, got {tx.nonce}")
        if tx.target in self.contracts:
            self._resolve(tx.target, tx.method, nested=False)
        elif tx.method != "transfer":
            raise errors.UnknownTarget(tx.target.hex())

    def submit_tx(self, tx: Transaction) -> Receipt:
        if self._sealed:
            raise RuntimeError("snapshot is read-only")
        try:
            self._precheck(tx)
        except errors.LedgerError as exc:
            return Receipt("rejected", tx.hash, self.height, 0, reason=exc.reason, message=str(exc), error=exc)

        self._journal = {}
        self._account_journal = {}
        event_mark = len(self.events)
        counter_mark = self.instance_counter
        try:
            if tx.target in self.contracts:
                value = self._invoke(tx.sender, tx.sender, tx.target, tx.method, dict(tx.args), nested=False)
            else:
                value = self._native_transfer(tx.sender, tx.target, **tx.args)
        except errors.LedgerError as exc:
            self._rollback(event_mark, counter_mark)
            receipt = Receipt("rejected", tx.hash, self.height, FEE_PER_TX, reason=exc.reason,
                              message=str(exc), error=exc)
        except Exception:
            self._rollback(event_mark, counter_mark)
            raise
        else:
            receipt = Receipt("success", tx.hash, self.height, FEE_PER_TX, value=value,
                              events=tuple(self.events[event_mark:]))
        finally:
            self._journal = None
            self._account_journal = {}

        acct = self.accounts.setdefault(tx.sender, Account())
        acct.public_key = tx.public_key
        acct.nonce += 1
        acct.fees_paid += FEE_PER_TX
        self._pending.append(tx.hash)
        log.debug("tx %s %s -> %s", tx.method, receipt.status, receipt.reason)
        return receipt

    def _rollback(self, event_mark: int, counter_mark: int) -> None:
        for addr, snap in (self._journal or {}).items():
            if snap is None:
                self.contracts.pop(addr, None)
            else:
                self.contracts[addr] = snap
        for addr, acct in self._account_journal.items():
            if acct is None:
                self.accounts.pop(addr, None)
            else:
                self.accounts[addr] = acct
        del self.events[event_mark:]
        self.instance_counter = counter_mark

    def _native_transfer(self, sender: Address, to: Address, amount: int = 0, **extra: Any) -> None:
        if extra:
            raise errors.BadArguments(f"transfer: unexpected {sorted(extra)}")
        if not isinstance(amount, int) or isinstance(amount, bool) or amount < 0:
            raise errors.InsufficientBalance("amount must be a non-negative integer")
        src = self._touch_account(sender)
        if src.balance < amount:
            raise errors.InsufficientBalance(f"native balance {src.balance} < {amount}")
        src.balance -= amount
        self._touch_account(to).balance += amount

    # -- time -----------------------------------------------------------------

    def mine_block(self) -> int:
        if self._sealed:
            raise RuntimeError("snapshot is read-only")
        parent = self.blocks[-1].hash if self.blocks else bytes(32)
        self.blocks.append(Block(self.height, parent, tuple(self._pending), len(self.events)))
        self._pending = []
        self.height += 1
        return self.height

    def mine(self, count: int = 1) -> int:
        for _ in range(count):
            self.mine_block()
        return self.height

    # -- queries --------------------------------------------------------------

    def query_events(self, emitter: Address | None = None, name: str | Iterable[str] | None = None,
                     start: int | None = None, end: int | None = None, **match: Any) -> list[Event]:
        """Events in emission order, filtered by emitter, name, inclusive
        height range and payload equality."""
        names = {name} if isinstance(name, str) else (set(name) if name is not None else None)
        out = []
        for ev in self.events:
            if emitter is not None and ev.emitter != emitter:
                continue
            if names is not None and ev.name not in names:
                continue
            if start is not None and ev.height < start:
                continue
            if end is not None and ev.height > end:
                continue
            if any(ev.payload.get(k) != v for k, v in match.items()):
                continue
            out.append(ev)
        return out

    def serialize(self) -> bytes:
        return encode([
            "paysim/state",
            self.height,
            self.instance_counter,
            self.accounts,
            self.contracts,
            self.events,
            self.blocks,
            self._pending,
        ])

    def digest(self) -> str:
        return sha256(self.serialize()).hex()

    def fork(self) -> "Chain":
        """An independent, writable deep copy; used to branch simulations."""
        if self._journal is not None:
            raise RuntimeError("cannot fork mid-transaction")
        return copy.deepcopy(self)

    def snapshot(self) -> "Chain":
        """A read-only deep copy of the current state."""
        if self._journal is not None:
            raise RuntimeError("cannot snapshot mid-transaction")
        snap = copy.deepcopy(self)
        snap._sealed = True
        return snap
