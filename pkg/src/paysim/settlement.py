"""Escrow agreements, m-of-n multisig pools and data oracles."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterable

from . import errors
from .crypto import Address, verify
from .encoding import encode, hash_value
from .ledger import Chain, Context, Contract, Receipt, external, internal, system_address

SETTLEMENT_FACTORY = system_address("settlement")


class EscrowState(str, enum.Enum):
    CREATED = "created"
    FUNDED = "funded"
    RELEASED = "released"
    REFUNDED = "refunded"


class FeedMode(str, enum.Enum):
    PUSH = "push"
    PULL = "pull"


@dataclass(frozen=True)
class OracleConfirms:
    feed: Address
    key: str
    expected: Any


@dataclass(frozen=True)
class MultisigApproves:
    multisig: Address


Condition = OracleConfirms | MultisigApproves


def release_payload(escrow_id: Address) -> bytes:
    """What multisig signers approve to let an escrow release."""
    return hash_value("paysim/escrow-release", escrow_id)


# -- multisig ----------------------------------------------------------------------


def multisig_message(multisig: Address, epoch: int, payload: bytes) -> bytes:
    return encode(["paysim/multisig", multisig, epoch, payload])


@dataclass(kw_only=True)
class Multisig(Contract):
    kind = "multisig"
    owner: Address
    signers: tuple[Address, ...]
    threshold: int
    epoch: int = 0
    collected: dict[bytes, set[Address]] = field(default_factory=dict)

    @staticmethod
    def check_pool(signers: tuple[Address, ...], threshold: int) -> None:
        if len(set(signers)) != len(signers):
            raise errors.InvalidThreshold("signers must be distinct")
        if not isinstance(threshold, int) or isinstance(threshold, bool) or not 1 <= threshold <= len(signers):
            raise errors.InvalidThreshold(f"need 1 <= m <= {len(signers)}, got {threshold}")

    @external
    def sign(self, ctx: Context, payload: bytes, signature: bytes) -> int:
        """Record the caller's signature over ``payload``; returns the distinct signer count."""
        signer = ctx.sender
        if signer not in self.signers:
            raise errors.NotASigner("caller is not in the signer pool")
        pub = ctx.chain.public_key_of(signer)
        if pub is None or not verify(pub, signature, multisig_message(self.address, self.epoch, payload)):
            raise errors.BadSignature("approval signature does not verify")
        got = self.collected.setdefault(bytes(payload), set())
        got.add(signer)
        ctx.emit("MultisigSigned", payload=payload, signer=signer, epoch=self.epoch, count=len(got))
        return len(got)

    @external
    def update_pool(self, ctx: Context, signers: list[Address] | tuple[Address, ...], threshold: int) -> None:
        if ctx.sender != self.owner:
            raise errors.NotAuthorized("only the pool owner can change signers")
        signers = tuple(signers)
        self.check_pool(signers, threshold)
        self.signers, self.threshold = signers, threshold
        self.collected = {}
        self.epoch += 1
        ctx.emit("MultisigPoolUpdated", signers=signers, threshold=threshold, epoch=self.epoch)

    def signer_count(self, payload: bytes) -> int:
        return len(self.collected.get(bytes(payload), set()) & set(self.signers))

    def is_authorized(self, payload: bytes) -> bool:
        return self.signer_count(payload) >= self.threshold


# -- oracle ------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleRecord:
    value: Any
    height: int
    attestors: frozenset[Address]


@dataclass(frozen=True)
class OracleRequest:
    requester: Address
    subscribe: bool


@dataclass(kw_only=True)
class OracleFeed(Contract):
    """One attestor with quorum 1 is the centralized variant."""

    kind = "oracle_feed"
    owner: Address
    mode: FeedMode
    attestors: tuple[Address, ...]
    quorum: int
    records: dict[str, OracleRecord] = field(default_factory=dict)
    attestations: dict[str, dict[Address, Any]] = field(default_factory=dict)
    requests: dict[str, list[OracleRequest]] = field(default_factory=dict)

    def _attest(self, ctx: Context, key: str, value: Any) -> OracleRecord | None:
        if ctx.sender not in self.attestors:
            raise errors.NotAttestor("caller is not an attestor of this feed")
        if not isinstance(key, str):
            raise errors.BadArguments("key must be a string")
        round_ = self.attestations.setdefault(key, {})
        round_[ctx.sender] = value
        wire = encode(value)
        agreeing = frozenset(a for a, v in round_.items() if encode(v) == wire)
        ctx.emit("DataAttested", key=key, value=value, attestor=ctx.sender, count=len(agreeing))
        if len(agreeing) < self.quorum:
            return None
        record = OracleRecord(value, ctx.height, agreeing)
        self.records[key] = record
        del self.attestations[key]
        ctx.emit("DataUpdated", key=key, value=value, attestors=agreeing)
        return record

    def _deliver(self, ctx: Context, key: str, record: OracleRecord) -> None:
        keep = []
        for req in self.requests.pop(key, []):
            if req.requester in ctx.chain.contracts:
                ctx.call(req.requester, "on_oracle_data", key=key, value=record.value, height=record.height)
            ctx.emit("DataDelivered", key=key, value=record.value, requester=req.requester)
            if req.subscribe:
                keep.append(req)
        if keep:
            self.requests[key] = keep

    @external
    def push(self, ctx: Context, key: str, value: Any) -> bool:
        if self.mode is not FeedMode.PUSH:
            raise errors.WrongMode("feed is pull-only")
        record = self._attest(ctx, key, value)
        if record is not None:
            self._deliver(ctx, key, record)
        return record is not None

    @external
    def request(self, ctx: Context, key: str, subscribe: bool = False) -> None:
        if self.mode is not FeedMode.PULL and not subscribe:
            raise errors.WrongMode("push feeds only accept subscriptions")
        reqs = self.requests.setdefault(key, [])
        req = OracleRequest(ctx.sender, bool(subscribe))
        if req not in reqs:
            reqs.append(req)
        ctx.emit("DataRequested", key=key, requester=ctx.sender, subscribe=bool(subscribe))

    @external
    def respond(self, ctx: Context, key: str, value: Any) -> bool:
        if self.mode is not FeedMode.PULL:
            raise errors.WrongMode("feed is push-only")
        if ctx.sender not in self.attestors:
            raise errors.NotAttestor("caller is not an attestor of this feed")
        if not self.requests.get(key):
            raise errors.NoPendingRequest(key)
        record = self._attest(ctx, key, value)
        if record is not None:
            self._deliver(ctx, key, record)
        return record is not None

    def read(self, key: str) -> tuple[Any, int]:
        record = self.records.get(key)
        if record is None:
            raise errors.NotAvailable(key)
        return record.value, record.height


@dataclass(kw_only=True)
class OracleConsumer(Contract):
    """A contract that asks a feed for data and keeps what it is told."""

    kind = "oracle_consumer"
    owner: Address
    received: list[tuple[Address, str, Any, int]] = field(default_factory=list)

    @external
    def ask(self, ctx: Context, feed: Address, key: str, subscribe: bool = False) -> None:
        if ctx.sender != self.owner:
            raise errors.NotAuthorized("only the owner can issue requests")
        ctx.view(feed, OracleFeed)
        ctx.call(feed, "request", key=key, subscribe=subscribe)

    @internal
    def on_oracle_data(self, ctx: Context, key: str, value: Any, height: int) -> None:
        self.received.append((ctx.sender, key, value, height))

    def latest(self, key: str) -> Any:
        for _, k, value, _ in reversed(self.received):
            if k == key:
                return value
        raise errors.NotAvailable(key)


# -- escrow ------------------------------------------------------------------------


@dataclass(kw_only=True)
class Escrow(Contract):
    kind = "escrow"
    creator: Address
    buyer: Address
    seller: Address
    class_id: Address
    amount: int | None
    token: str | None
    condition: Condition
    deadline: int
    state: EscrowState = EscrowState.CREATED

    def condition_met(self, chain: Chain) -> bool:
        cond = self.condition
        if isinstance(cond, OracleConfirms):
            feed = chain.contracts.get(cond.feed)
            if not isinstance(feed, OracleFeed) or cond.key not in feed.records:
                return False
            return encode(feed.records[cond.key].value) == encode(cond.expected)
        msig = chain.contracts.get(cond.multisig)
        return isinstance(msig, Multisig) and msig.is_authorized(release_payload(self.address))

    @external
    def fund(self, ctx: Context) -> None:
        if self.state is not EscrowState.CREATED:
            raise errors.WrongState(f"escrow is {self.state.value}")
        if ctx.sender != self.buyer:
            raise errors.NotAParty("only the buyer funds the escrow")
        if ctx.height > self.deadline:
            raise errors.DeadlineInPast("deadline has passed")
        ctx.call(self.class_id, "lock", owner=self.buyer, amount=self.amount, token=self.token,
                 beneficiary=self.seller)
        self.state = EscrowState.FUNDED
        ctx.emit("EscrowFunded", buyer=self.buyer, amount=self.amount, token=self.token)

    @external
    def claim(self, ctx: Context) -> str:
        """Release to the seller, refund the buyer, or report ``not_yet``."""
        if self.state is not EscrowState.FUNDED:
            raise errors.WrongState(f"escrow is {self.state.value}")
        if ctx.height > self.deadline:
            to, self.state, name = self.buyer, EscrowState.REFUNDED, "EscrowRefunded"
        elif self.condition_met(ctx.chain):
            to, self.state, name = self.seller, EscrowState.RELEASED, "EscrowReleased"
        else:
            return "not_yet"
        ctx.call(self.class_id, "unlock", owner=self.buyer, to=to, amount=self.amount, token=self.token)
        ctx.emit(name, to=to, amount=self.amount, token=self.token)
        return self.state.value


@dataclass(kw_only=True)
class SettlementFactory(Contract):
    kind = "settlement_factory"

    @external
    def open_escrow(self, ctx: Context, buyer: Address, seller: Address, class_id: Address,
                    condition: Condition, deadline: int, amount: int | None = None,
                    token: str | None = None) -> Address:
        if ctx.sender not in (buyer, seller):
            raise errors.NotAParty("escrow must be opened by the buyer or seller")
        if not isinstance(deadline, int) or isinstance(deadline, bool) or deadline <= ctx.height:
            raise errors.DeadlineInPast(f"deadline {deadline} is not after height {ctx.height}")
        if not isinstance(condition, (OracleConfirms, MultisigApproves)):
            raise errors.BadArguments("unsupported escrow condition")
        from .tokens import TokenClass

        ctx.view(class_id, TokenClass)._unit(amount, token)
        esc = ctx.deploy(Escrow, creator=ctx.sender, buyer=buyer, seller=seller, class_id=class_id,
                         amount=amount, token=token, condition=condition, deadline=deadline)
        ctx.emit("EscrowOpened", escrow_id=esc.address, buyer=buyer, seller=seller, class_id=class_id,
                 amount=amount, token=token, deadline=deadline)
        return esc.address

    @external
    def create_multisig(self, ctx: Context, signers: list[Address] | tuple[Address, ...], threshold: int) -> Address:
        signers = tuple(signers)
        Multisig.check_pool(signers, threshold)
        ms = ctx.deploy(Multisig, owner=ctx.sender, signers=signers, threshold=threshold)
        ctx.emit("MultisigCreated", multisig=ms.address, signers=signers, threshold=threshold)
        return ms.address

    @external
    def create_feed(self, ctx: Context, attestors: list[Address] | tuple[Address, ...], quorum: int = 1,
                    mode: FeedMode | str = FeedMode.PUSH) -> Address:
        attestors = tuple(attestors)
        try:
            mode = FeedMode(mode)
        except ValueError:
            raise errors.BadArguments(f"unknown feed mode {mode!r}") from None
        if len(set(attestors)) != len(attestors) or not attestors:
            raise errors.InvalidThreshold("attestors must be distinct and non-empty")
        if not isinstance(quorum, int) or isinstance(quorum, bool) or not 1 <= quorum <= len(attestors):
            raise errors.InvalidThreshold(f"need 1 <= k <= {len(attestors)}, got {quorum}")
        feed = ctx.deploy(OracleFeed, owner=ctx.sender, mode=mode, attestors=attestors, quorum=quorum)
        ctx.emit("FeedCreated", feed=feed.address, mode=mode.value, attestors=attestors, quorum=quorum)
        return feed.address

    @external
    def create_consumer(self, ctx: Context) -> Address:
        consumer = ctx.deploy(OracleConsumer, owner=ctx.sender)
        ctx.emit("ConsumerCreated", consumer=consumer.address)
        return consumer.address


# -- client helpers ------------------------------------------------------------------


def open_escrow(chain: Chain, creator, buyer: Address, seller: Address, class_id: Address, condition: Condition,
                deadline: int, amount=None, token=None) -> Receipt:
    return chain.send(creator, SETTLEMENT_FACTORY, "open_escrow", buyer=buyer, seller=seller, class_id=class_id,
                      condition=condition, deadline=deadline, amount=amount, token=token)


def fund_escrow(chain: Chain, buyer, escrow_id: Address) -> Receipt:
    return chain.send(buyer, escrow_id, "fund")


def claim_escrow(chain: Chain, caller, escrow_id: Address) -> Receipt:
    return chain.send(caller, escrow_id, "claim")


def create_multisig(chain: Chain, owner, signers: Iterable[Address], threshold: int) -> Receipt:
    return chain.send(owner, SETTLEMENT_FACTORY, "create_multisig", signers=tuple(signers), threshold=threshold)


def multisig_sign(chain: Chain, signer, multisig: Address, payload: bytes) -> Receipt:
    ms = chain.get(multisig, Multisig)
    sig = signer.sign(multisig_message(multisig, ms.epoch, payload))
    return chain.send(signer, multisig, "sign", payload=payload, signature=sig)


def multisig_update_pool(chain: Chain, owner, multisig: Address, signers: Iterable[Address],
                         threshold: int) -> Receipt:
    return chain.send(owner, multisig, "update_pool", signers=tuple(signers), threshold=threshold)


def create_feed(chain: Chain, owner, attestors: Iterable[Address], quorum: int = 1,
                mode: FeedMode | str = FeedMode.PUSH) -> Receipt:
    return chain.send(owner, SETTLEMENT_FACTORY, "create_feed", attestors=tuple(attestors), quorum=quorum,
                      mode=FeedMode(mode))


def oracle_push(chain: Chain, attestor, feed: Address, key: str, value: Any) -> Receipt:
    return chain.send(attestor, feed, "push", key=key, value=value)


def oracle_respond(chain: Chain, attestor, feed: Address, key: str, value: Any) -> Receipt:
    return chain.send(attestor, feed, "respond", key=key, value=value)


def oracle_read(chain: Chain, feed: Address, key: str) -> tuple[Any, int]:
    return chain.get(feed, OracleFeed).read(key)
