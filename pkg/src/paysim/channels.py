"""Payment channels and hashed-timelock swaps.

Channel updates live off-chain as dual-signed :class:`ChannelUpdate` values;
the ledger only sees open, deposit, close and dispute transactions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from . import errors
from .crypto import Address, verify
from .encoding import encode, sha256
from .ledger import Chain, Context, Contract, Receipt, external, internal, system_address

CHANNEL_FACTORY = system_address("channels")
DEFAULT_CHALLENGE_WINDOW = 10


class ChannelState(str, enum.Enum):
    OPENING = "opening"
    OPEN = "open"
    SETTLING = "settling"
    CLOSED = "closed"


class HtlcState(str, enum.Enum):
    OPEN = "open"
    SWAPPED = "swapped"
    REFUNDED = "refunded"


def _amount(value, what: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise errors.BadArguments(f"{what} must be a non-negative integer")
    return value


# -- payment channel ---------------------------------------------------------------


@dataclass(frozen=True)
class ChannelUpdate:
    channel_id: Address
    seq: int
    balance_a: int
    balance_b: int
    sig_a: bytes = b""
    sig_b: bytes = b""

    def signing_bytes(self) -> bytes:
        return encode(["paysim/channel-update", self.channel_id, self.seq, self.balance_a, self.balance_b])


@dataclass(kw_only=True)
class Channel(Contract):
    kind = "channel"
    party_a: Address
    party_b: Address
    class_id: Address
    deposit_a: int
    deposit_b: int
    challenge_window: int
    state: ChannelState = ChannelState.OPENING
    best: ChannelUpdate | None = None
    challenge_deadline: int | None = None
    payout_a: int | None = None
    payout_b: int | None = None

    @property
    def total(self) -> int:
        return self.deposit_a + self.deposit_b

    def _check_update(self, ctx: Context, update: ChannelUpdate) -> None:
        if not isinstance(update, ChannelUpdate) or update.channel_id != self.address:
            raise errors.BadArguments("update is not for this channel")
        if update.seq < 0 or update.balance_a < 0 or update.balance_b < 0:
            raise errors.BadArguments("negative field in update")
        if update.balance_a + update.balance_b != self.total:
            raise errors.ConservationViolated(f"{update.balance_a}+{update.balance_b} != {self.total}")
        msg = update.signing_bytes()
        for party, sig in ((self.party_a, update.sig_a), (self.party_b, update.sig_b)):
            pub = ctx.chain.public_key_of(party)
            if pub is None or not verify(pub, sig, msg):
                raise errors.BadSignature("update is not signed by both parties")

    def _require_party(self, ctx: Context) -> None:
        if ctx.sender not in (self.party_a, self.party_b):
            raise errors.NotAParty("caller is not a channel party")

    @internal
    def initialize(self, ctx: Context) -> None:
        if self.deposit_a:
            ctx.call(self.class_id, "lock", owner=self.party_a, amount=self.deposit_a)
        if self.deposit_b == 0:
            self._opened(ctx)

    def _opened(self, ctx: Context) -> None:
        self.state = ChannelState.OPEN
        ctx.emit("ChannelOpened", party_a=self.party_a, party_b=self.party_b, deposit_a=self.deposit_a,
                 deposit_b=self.deposit_b)

    @external
    def deposit(self, ctx: Context) -> None:
        if self.state is not ChannelState.OPENING:
            raise errors.WrongState(f"channel is {self.state.value}")
        if ctx.sender != self.party_b:
            raise errors.WrongParty("only party b deposits after opening")
        ctx.call(self.class_id, "lock", owner=self.party_b, amount=self.deposit_b)
        self._opened(ctx)

    def _payout(self, ctx: Context, update: ChannelUpdate, how: str) -> None:
        # A's deposit covers A's payout first; the rest of each deposit crosses over.
        a_from_a = min(self.deposit_a, update.balance_a)
        moves = (
            (self.party_a, self.party_a, a_from_a),
            (self.party_a, self.party_b, self.deposit_a - a_from_a),
            (self.party_b, self.party_a, update.balance_a - a_from_a),
            (self.party_b, self.party_b, self.deposit_b - (update.balance_a - a_from_a)),
        )
        for owner, to, amount in moves:
            if amount:
                ctx.call(self.class_id, "unlock", owner=owner, to=to, amount=amount)
        self.state = ChannelState.CLOSED
        self.best = update
        self.payout_a, self.payout_b = update.balance_a, update.balance_b
        ctx.emit("ChannelClosed", seq=update.seq, payout_a=update.balance_a, payout_b=update.balance_b, via=how)

    @external
    def cooperative_settle(self, ctx: Context, update: ChannelUpdate) -> None:
        if self.state is not ChannelState.OPEN:
            raise errors.WrongState(f"channel is {self.state.value}")
        self._require_party(ctx)
        self._check_update(ctx, update)
        self._payout(ctx, update, "cooperative")

    @external
    def dispute(self, ctx: Context, update: ChannelUpdate) -> int:
        if self.state is not ChannelState.OPEN:
            raise errors.WrongState(f"channel is {self.state.value}")
        self._require_party(ctx)
        self._check_update(ctx, update)
        self.state = ChannelState.SETTLING
        self.best = update
        self.challenge_deadline = ctx.height + self.challenge_window
        ctx.emit("DisputeOpened", seq=update.seq, by=ctx.sender, deadline=self.challenge_deadline)
        return self.challenge_deadline

    @external
    def challenge(self, ctx: Context, update: ChannelUpdate) -> None:
        if self.state is not ChannelState.SETTLING:
            raise errors.WrongState(f"channel is {self.state.value}")
        self._require_party(ctx)
        if ctx.height > self.challenge_deadline:
            raise errors.ChallengeClosed(f"challenge window ended at {self.challenge_deadline}")
        self._check_update(ctx, update)
        if update.seq <= self.best.seq:
            raise errors.StaleUpdate(f"seq {update.seq} does not beat {self.best.seq}")
        self.best = update
        ctx.emit("DisputeChallenged", seq=update.seq, by=ctx.sender)

    @external
    def finalize(self, ctx: Context) -> None:
        if self.state is not ChannelState.SETTLING:
            raise errors.WrongState(f"channel is {self.state.value}")
        if ctx.height <= self.challenge_deadline:
            raise errors.NotExpired(f"challenge window open until {self.challenge_deadline}")
        self._payout(ctx, self.best, "dispute")


@dataclass
class ChannelSession:
    """Off-chain state shared by the two parties of one channel.

    Holds both key pairs because the simulator plays both sides.
    """

    channel_id: Address
    keys_a: object
    keys_b: object
    deposit_a: int
    deposit_b: int
    updates: list[ChannelUpdate] = field(default_factory=list)
    last_signed: dict[Address, int] = field(default_factory=dict)

    def _sign(self, update: ChannelUpdate) -> ChannelUpdate:
        msg = update.signing_bytes()
        return replace(update, sig_a=self.keys_a.sign(msg), sig_b=self.keys_b.sign(msg))

    def initial(self) -> ChannelUpdate:
        if not self.updates:
            self.updates.append(self._sign(ChannelUpdate(self.channel_id, 0, self.deposit_a, self.deposit_b)))
        return self.updates[0]

    @property
    def latest(self) -> ChannelUpdate:
        return self.updates[-1] if self.updates else self.initial()

    def make_update(self, seq: int, balance_a: int, balance_b: int) -> ChannelUpdate:
        if balance_a < 0 or balance_b < 0 or balance_a + balance_b != self.deposit_a + self.deposit_b:
            raise errors.ConservationViolated(
                f"{balance_a}+{balance_b} != {self.deposit_a + self.deposit_b}")
        self.initial()
        for keys in (self.keys_a, self.keys_b):
            if seq <= self.last_signed.get(keys.address, 0):
                raise errors.NonMonotoneSeq(f"seq {seq} not above {self.last_signed[keys.address]}")
        update = self._sign(ChannelUpdate(self.channel_id, seq, balance_a, balance_b))
        self.last_signed[self.keys_a.address] = seq
        self.last_signed[self.keys_b.address] = seq
        self.updates.append(update)
        return update

    def pay(self, frm: Address, amount: int) -> ChannelUpdate:
        cur = self.latest
        if frm == self.keys_a.address:
            a, b = cur.balance_a - amount, cur.balance_b + amount
        elif frm == self.keys_b.address:
            a, b = cur.balance_a + amount, cur.balance_b - amount
        else:
            raise errors.NotAParty("payer is not a channel party")
        return self.make_update(cur.seq + 1, a, b)

    def update(self, seq: int) -> ChannelUpdate:
        for u in self.updates:
            if u.seq == seq:
                return u
        raise KeyError(seq)


# -- hashed timelock ------------------------------------------------------------------


@dataclass(frozen=True)
class Leg:
    """``owner`` locks ``amount``/``token`` of ``class_id``; it goes to the other side on claim."""

    owner: Address
    class_id: Address
    amount: int | None = None
    token: str | None = None


@dataclass(kw_only=True)
class Htlc(Contract):
    kind = "htlc"
    hash_lock: bytes
    timeout: int
    leg_a: Leg
    leg_b: Leg | None
    recipient_a: Address
    funded_a: bool = False
    funded_b: bool = False
    state: HtlcState = HtlcState.OPEN

    @property
    def recipient_b(self) -> Address:
        return self.leg_a.owner

    def _legs(self):
        yield "a", self.leg_a, self.funded_a, self.recipient_a
        if self.leg_b is not None:
            yield "b", self.leg_b, self.funded_b, self.recipient_b

    @external
    def fund(self, ctx: Context, leg: str = "a") -> None:
        if self.state is not HtlcState.OPEN:
            raise errors.WrongState(f"htlc is {self.state.value}")
        if ctx.height > self.timeout:
            raise errors.Expired(f"timeout {self.timeout} passed")
        entry = {name: (l, funded, to) for name, l, funded, to in self._legs()}.get(leg)
        if entry is None:
            raise errors.BadArguments(f"no leg {leg!r}")
        spec, funded, to = entry
        if ctx.sender != spec.owner:
            raise errors.WrongParty(f"leg {leg} is funded by its owner")
        if funded:
            raise errors.WrongState(f"leg {leg} already funded")
        ctx.call(spec.class_id, "lock", owner=spec.owner, amount=spec.amount, token=spec.token, beneficiary=to)
        setattr(self, f"funded_{leg}", True)
        ctx.emit("HtlcFunded", leg=leg, owner=spec.owner, hash_lock=self.hash_lock)

    @external
    def claim(self, ctx: Context, preimage: bytes) -> None:
        if self.state is not HtlcState.OPEN:
            raise errors.WrongState(f"htlc is {self.state.value}")
        if ctx.height > self.timeout:
            raise errors.Expired(f"timeout {self.timeout} passed")
        if not all(funded for _, _, funded, _ in self._legs()):
            raise errors.BothLegsRequired("every leg must be funded before claiming")
        if not isinstance(preimage, bytes) or sha256(preimage) != self.hash_lock:
            raise errors.BadPreimage("preimage does not match hash lock")
        for _, spec, _, to in self._legs():
            ctx.call(spec.class_id, "unlock", owner=spec.owner, to=to, amount=spec.amount, token=spec.token)
        self.state = HtlcState.SWAPPED
        ctx.emit("HtlcClaimed", hash_lock=self.hash_lock, preimage=preimage, by=ctx.sender)

    @external
    def refund(self, ctx: Context) -> None:
        if self.state is not HtlcState.OPEN:
            raise errors.WrongState(f"htlc is {self.state.value}")
        if ctx.height <= self.timeout:
            raise errors.NotExpired(f"refund only after height {self.timeout}")
        returned = []
        for name, spec, funded, _ in self._legs():
            if funded:
                ctx.call(spec.class_id, "unlock", owner=spec.owner, to=spec.owner, amount=spec.amount,
                         token=spec.token)
                returned.append(name)
        self.state = HtlcState.REFUNDED
        ctx.emit("HtlcRefunded", hash_lock=self.hash_lock, legs=tuple(returned))


@dataclass(frozen=True)
class Hop:
    payer: Address
    payee: Address
    class_id: Address
    amount: int | None = None
    token: str | None = None


@dataclass(kw_only=True)
class HtlcChain(Contract):
    kind = "htlc_chain"
    hash_lock: bytes
    hops: tuple[Address, ...]


@dataclass(kw_only=True)
class ChannelFactory(Contract):
    kind = "channel_factory"

    @external
    def open_channel(self, ctx: Context, party_b: Address, class_id: Address, deposit_a: int, deposit_b: int = 0,
                     challenge_window: int = DEFAULT_CHALLENGE_WINDOW) -> Address:
        from .tokens import TokenClass

        party_a = ctx.sender
        if party_a == party_b:
            raise errors.BadArguments("channel needs two distinct parties")
        _amount(deposit_a, "deposit_a")
        _amount(deposit_b, "deposit_b")
        if _amount(challenge_window, "challenge_window") < 1:
            raise errors.BadArguments("challenge window must be at least one block")
        if ctx.view(class_id, TokenClass).is_voucher:
            raise errors.BadArguments("channels carry cash tokens only")
        ch = ctx.deploy(Channel, party_a=party_a, party_b=party_b, class_id=class_id, deposit_a=deposit_a,
                        deposit_b=deposit_b, challenge_window=challenge_window)
        ctx.emit("ChannelCreated", channel_id=ch.address, party_a=party_a, party_b=party_b)
        ctx.call(ch.address, "initialize")
        return ch.address

    def _deploy_htlc(self, ctx: Context, hash_lock: bytes, timeout: int, leg_a: Leg, leg_b: Leg | None,
                     recipient_a: Address) -> Address:
        if not isinstance(hash_lock, bytes) or len(hash_lock) != 32:
            raise errors.BadArguments("hash lock must be 32 bytes")
        if not isinstance(timeout, int) or isinstance(timeout, bool) or timeout <= ctx.height:
            raise errors.DeadlineInPast(f"timeout {timeout} is not after height {ctx.height}")
        from .tokens import TokenClass

        for leg in (leg_a, leg_b):
            if leg is not None:
                ctx.view(leg.class_id, TokenClass)._unit(leg.amount, leg.token)
        htlc = ctx.deploy(Htlc, hash_lock=hash_lock, timeout=timeout, leg_a=leg_a, leg_b=leg_b,
                          recipient_a=recipient_a)
        ctx.emit("HtlcOpened", htlc_id=htlc.address, hash_lock=hash_lock, timeout=timeout,
                 party_a=leg_a.owner, party_b=recipient_a)
        return htlc.address

    @external
    def htlc_open(self, ctx: Context, hash_lock: bytes, timeout: int, leg_a: Leg, leg_b: Leg | None) -> Address:
        if leg_b is None:
            raise errors.BadArguments("a swap needs two legs")
        if leg_a.owner == leg_b.owner:
            raise errors.BadArguments("swap legs need distinct owners")
        return self._deploy_htlc(ctx, hash_lock, timeout, leg_a, leg_b, leg_b.owner)

    @external
    def chain_open(self, ctx: Context, hash_lock: bytes, hops: list[Hop] | tuple[Hop, ...], base_timeout: int,
                   decrement: int) -> Address:
        """Deploy one one-way HTLC per hop; hop ``i`` times out at ``base_timeout - i * decrement``."""
        hops = tuple(hops)
        if not hops:
            raise errors.BadArguments("chain needs at least one hop")
        if not isinstance(decrement, int) or decrement < 1:
            raise errors.TimeoutOrderingViolated("decrement must be at least 1")
        if base_timeout - (len(hops) - 1) * decrement <= ctx.height:
            raise errors.TimeoutOrderingViolated("last hop would already be expired")
        ids = tuple(
            self._deploy_htlc(ctx, hash_lock, base_timeout - i * decrement,
                              Leg(hop.payer, hop.class_id, hop.amount, hop.token), None, hop.payee)
            for i, hop in enumerate(hops)
        )
        record = ctx.deploy(HtlcChain, hash_lock=hash_lock, hops=ids)
        ctx.emit("HtlcChainOpened", chain_id=record.address, hash_lock=hash_lock, hops=ids)
        return record.address


# -- client helpers ----------------------------------------------------------------------


def open_channel(chain: Chain, party_a, party_b: Address, class_id: Address, deposit_a: int, deposit_b: int = 0,
                 challenge_window: int = DEFAULT_CHALLENGE_WINDOW) -> Receipt:
    return chain.send(party_a, CHANNEL_FACTORY, "open_channel", party_b=party_b, class_id=class_id,
                      deposit_a=deposit_a, deposit_b=deposit_b, challenge_window=challenge_window)


def deposit(chain: Chain, party_b, channel_id: Address) -> Receipt:
    return chain.send(party_b, channel_id, "deposit")


def cooperative_settle(chain: Chain, party, channel_id: Address, update: ChannelUpdate) -> Receipt:
    return chain.send(party, channel_id, "cooperative_settle", update=update)


def dispute(chain: Chain, party, channel_id: Address, update: ChannelUpdate) -> Receipt:
    return chain.send(party, channel_id, "dispute", update=update)


def challenge(chain: Chain, party, channel_id: Address, update: ChannelUpdate) -> Receipt:
    return chain.send(party, channel_id, "challenge", update=update)


def finalize(chain: Chain, caller, channel_id: Address) -> Receipt:
    return chain.send(caller, channel_id, "finalize")


def htlc_open(chain: Chain, deployer, hash_lock: bytes, timeout: int, leg_a: Leg, leg_b: Leg) -> Receipt:
    return chain.send(deployer, CHANNEL_FACTORY, "htlc_open", hash_lock=hash_lock, timeout=timeout, leg_a=leg_a,
                      leg_b=leg_b)


def htlc_fund(chain: Chain, party, htlc_id: Address, leg: str = "a") -> Receipt:
    return chain.send(party, htlc_id, "fund", leg=leg)


def htlc_claim(chain: Chain, caller, htlc_id: Address, preimage: bytes) -> Receipt:
    return chain.send(caller, htlc_id, "claim", preimage=preimage)


def htlc_refund(chain: Chain, caller, htlc_id: Address) -> Receipt:
    return chain.send(caller, htlc_id, "refund")


def chain_open(chain: Chain, deployer, hash_lock: bytes, hops: Iterable[Hop], base_timeout: int,
               decrement: int) -> Receipt:
    return chain.send(deployer, CHANNEL_FACTORY, "chain_open", hash_lock=hash_lock, hops=tuple(hops),
                      base_timeout=base_timeout, decrement=decrement)


def observed_preimage(chain: Chain, hash_lock: bytes) -> bytes | None:
    """The secret for ``hash_lock`` if any claim has published it."""
    for ev in chain.query_events(name="HtlcClaimed", hash_lock=hash_lock):
        return ev.payload["preimage"]
    return None


def chain_propagate(chain: Chain, chain_id: Address, keys: Mapping[Address, object],
                    withholding: Iterable[Address] = ()) -> list[Receipt]:
    """Have each hop's payee, last hop first, claim using the preimage seen
    in the public event log. Payees in ``withholding`` do nothing."""
    record = chain.get(chain_id, HtlcChain)
    skip = set(withholding)
    receipts = []
    for htlc_id in reversed(record.hops):
        htlc = chain.get(htlc_id, Htlc)
        payee = htlc.recipient_a
        if htlc.state is not HtlcState.OPEN or payee in skip or payee not in keys:
            continue
        preimage = observed_preimage(chain, record.hash_lock)
        if preimage is None:
            break
        receipts.append(htlc_claim(chain, keys[payee], htlc_id, preimage))
    return receipts
