"""Token template, token registry and token burning.

A :class:`TokenFactory` system contract spawns one :class:`TokenClass`
contract per token type. The class contract is also the registry for its
tokens: it maps owners to cash balances or voucher IDs to owners, runs the
two-phase request/confirm transfer, holds locks on behalf of escrow, swap
and channel contracts, and burns tokens by one of three methods.

Cash amounts are integers in base units. Vouchers are identified by string
IDs and always move whole.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Any

from . import errors
from .crypto import ZERO_ADDRESS, Address
from .governance import (Attachment, PolicyContract, SpenderMixin, TransferCheck, rule_names,
                         validate_attachments)
from .ledger import Chain, Context, Contract, Event, Receipt, external, internal, system_address

TOKEN_FACTORY = system_address("tokens")
BURN_ADDRESS = ZERO_ADDRESS


class Fungibility(str, enum.Enum):
    CASH = "cash"
    VOUCHER = "voucher"


class TokenState(str, enum.Enum):
    ISSUED = "issued"
    ALLOCATED = "allocated"
    LOCKED = "locked"
    REDEEMED = "redeemed"
    BURNED = "burned"


class BurnMethod(str, enum.Enum):
    BURN_ADDRESS = "burn_address"
    REGISTRY_DELETE = "registry_delete"
    SELF_DESTRUCT_SINK = "self_destruct_sink"


@dataclass(frozen=True)
class TokenClassSpec:
    name: str
    symbol: str
    decimals: int = 0
    total_supply: int = 0
    fungibility: Fungibility = Fungibility.CASH
    mintable: bool = True
    burnable: bool = True

    def __post_init__(self):
        try:
            object.__setattr__(self, "fungibility", Fungibility(self.fungibility))
        except ValueError:
            raise errors.InvalidSpec(f"unknown fungibility {self.fungibility!r}") from None

    def validate(self) -> None:
        if not self.name or not self.symbol:
            raise errors.InvalidSpec("name and symbol are required")
        for attr in ("decimals", "total_supply"):
            value = getattr(self, attr)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise errors.InvalidSpec(f"{attr} must be a non-negative integer")
        if self.decimals > 36:
            raise errors.InvalidSpec("decimals out of range")
        if self.fungibility is Fungibility.VOUCHER and self.decimals != 0:
            raise errors.InvalidSpec("voucher tokens are indivisible (decimals must be 0)")


@dataclass
class Voucher:
    owner: Address | None
    state: TokenState
    holder: Address | None = None
    burn_method: BurnMethod | None = None
    archived: bool = False


@dataclass(frozen=True)
class PendingTransfer:
    sender: Address
    recipient: Address
    amount: int
    token: str | None = None


@dataclass(frozen=True)
class Supply:
    """Where every minted unit of a class currently sits."""

    minted: int
    issued: int
    spendable: int
    pending: int
    locked: int
    redeemed: int
    burned_address: int
    burned_deleted: int
    burned_sink: int
    archived: int

    @property
    def burned(self) -> int:
        return self.burned_address + self.burned_deleted + self.burned_sink

    @property
    def circulating(self) -> int:
        return self.issued + self.spendable + self.redeemed

    @property
    def accounted(self) -> int:
        return self.circulating + self.pending + self.locked + self.burned

    @property
    def conserved(self) -> bool:
        return self.accounted == self.minted


def _nonneg_int(value: Any, what: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise errors.BadArguments(f"{what} must be a non-negative integer")
    return value


def _drop_zero(mapping: dict, key) -> None:
    if mapping.get(key) == 0:
        del mapping[key]


@dataclass(kw_only=True)
class BurnSink(Contract):
    """Accepts exactly one deposit, then refuses every call."""

    kind = "burn_sink"
    destroyed: bool = False

    @internal
    def receive(self, ctx: Context, class_id: Address, amount: int, token: str | None) -> None:
        if self.destroyed:
            raise errors.ContractDestroyed("sink already self-destructed")
        self.destroyed = True
        ctx.emit("SinkDestroyed", class_id=class_id, amount=amount, token=token)

    @external
    def withdraw(self, ctx: Context, **_: Any) -> None:
        raise errors.ContractDestroyed("sink has self-destructed")


@dataclass(kw_only=True)
class TokenClass(SpenderMixin, Contract):
    kind = "token_class"

    spec: TokenClassSpec
    issuer: Address
    frozen: bool = False
    attachments: list[Attachment] = field(default_factory=list)
    token_attachments: dict[str, list[Attachment]] = field(default_factory=dict)
    minted: int = 0
    issued: int = 0
    balances: dict[Address, int] = field(default_factory=dict)
    redeemed: dict[Address, int] = field(default_factory=dict)
    locks: dict[Address, dict[Address, int]] = field(default_factory=dict)
    pending: dict[int, PendingTransfer] = field(default_factory=dict)
    next_transfer_id: int = 1
    burned_address: int = 0
    burned_deleted: int = 0
    burned_sink: dict[Address, int] = field(default_factory=dict)
    burned_from: dict[Address, int] = field(default_factory=dict)
    archive: dict[Address, int] = field(default_factory=dict)
    vouchers: dict[str, Voucher] = field(default_factory=dict)

    @property
    def is_voucher(self) -> bool:
        return self.spec.fungibility is Fungibility.VOUCHER

    # -- unit handling ----------------------------------------------------------

    def _unit(self, amount: int | None, token: str | None) -> tuple[int, str | None]:
        if self.is_voucher:
            if token is None or amount not in (None, 1):
                raise errors.BadArguments("voucher moves take exactly one token id")
            if not isinstance(token, str):
                raise errors.BadArguments("token id must be a string")
            return 1, token
        if token is not None:
            raise errors.BadArguments("cash moves take an amount, not a token id")
        amount = _nonneg_int(amount, "amount")
        if amount == 0:
            raise errors.BadArguments("amount must be positive")
        return amount, None

    def _voucher(self, token: str) -> Voucher:
        voucher = self.vouchers.get(token)
        if voucher is None:
            raise errors.UnknownToken(token)
        return voucher

    def _unspendable_of(self, owner: Address) -> int:
        locked = sum(per.get(owner, 0) for per in self.locks.values())
        pending = sum(p.amount for p in self.pending.values() if p.sender == owner)
        return locked + pending + self.redeemed.get(owner, 0) + self.burned_from.get(owner, 0)

    def _take_spendable(self, owner: Address, amount: int, token: str | None) -> None:
        if self.frozen:
            raise errors.ClassFrozen(self.spec.symbol)
        if token is not None:
            voucher = self._voucher(token)
            if voucher.state is TokenState.BURNED:
                raise errors.TokenNotSpendable(f"{token} is burned")
            if voucher.owner != owner:
                raise errors.NotOwner(token)
            if voucher.state is not TokenState.ALLOCATED:
                raise errors.TokenNotSpendable(f"{token} is {voucher.state.value}")
            return
        have = self.balances.get(owner, 0)
        if have < amount:
            if have + self._unspendable_of(owner) >= amount:
                raise errors.TokenNotSpendable(f"only {have} of the requested {amount} is spendable")
            raise errors.InsufficientBalance(f"balance {have} < {amount}")
        self.balances[owner] = have - amount
        _drop_zero(self.balances, owner)

    def _give(self, to: Address, amount: int, token: str | None) -> None:
        if token is not None:
            voucher = self.vouchers[token]
            voucher.owner = to
            voucher.state = TokenState.ALLOCATED
            voucher.holder = None
        else:
            self.balances[to] = self.balances.get(to, 0) + amount

    def _check_policies(self, ctx: Context, sender: Address, to: Address, amount: int, token: str | None,
                        category: str | None = None) -> None:
        atts = list(self.attachments)
        if token is not None:
            atts += self.token_attachments.get(token, [])
        check = TransferCheck(self.address, token, sender, to, amount, ctx.height, category)
        verdict = validate_attachments(ctx.chain, atts, check)
        if not verdict.ok:
            raise errors.PolicyViolation(verdict.reason)

    def _move_event(self, ctx: Context, name: str, frm: Address | None, to: Address | None,
                    amount: int, token: str | None, **extra: Any) -> Event:
        return ctx.emit(name, **{"from": frm, "to": to, "amount": amount, "token": token}, **extra)

    # -- issuance ---------------------------------------------------------------

    @internal
    def initialize(self, ctx: Context) -> None:
        supply = self.spec.total_supply
        if not supply:
            return
        self.minted = supply
        if self.is_voucher:
            ids = [str(i) for i in range(1, supply + 1)]
            for tid in ids:
                self.vouchers[tid] = Voucher(owner=self.issuer, state=TokenState.ISSUED)
            for tid in ids:
                self._move_event(ctx, "Issued", None, self.issuer, 1, tid)
        else:
            self.issued = supply
            self._move_event(ctx, "Issued", None, self.issuer, supply, None)

    def _require_issuer(self, ctx: Context) -> None:
        if ctx.sender != self.issuer:
            raise errors.NotIssuer("caller is not the token issuer")

    @external
    def allocate(self, ctx: Context, to: Address, amount: int | None = None, token: str | None = None) -> None:
        """Hand pre-issued supply to a holder's wallet."""
        self._require_issuer(ctx)
        amount, token = self._unit(amount, token)
        if token is not None:
            voucher = self._voucher(token)
            if voucher.state is not TokenState.ISSUED:
                raise errors.TokenNotSpendable(f"{token} is {voucher.state.value}, not issued")
            voucher.owner, voucher.state = to, TokenState.ALLOCATED
        else:
            if self.issued < amount:
                raise errors.InsufficientBalance(f"only {self.issued} unallocated")
            self.issued -= amount
            self._give(to, amount, None)
        self._move_event(ctx, "Allocated", self.issuer, to, amount, token)

    @external
    def mint(self, ctx: Context, to: Address, amount: int | None = None,
             tokens: list[str] | tuple[str, ...] | None = None) -> None:
        self._require_issuer(ctx)
        if not self.spec.mintable:
            raise errors.NotMintable(self.spec.symbol)
        if self.is_voucher:
            if not tokens or amount is not None:
                raise errors.BadArguments("voucher mint takes a list of token ids")
            if len(set(tokens)) != len(tokens):
                raise errors.DuplicateToken("repeated id in mint")
            for tid in tokens:
                if not isinstance(tid, str):
                    raise errors.BadArguments("token id must be a string")
                if tid in self.vouchers:
                    raise errors.DuplicateToken(tid)
            for tid in tokens:
                self.vouchers[tid] = Voucher(owner=to, state=TokenState.ALLOCATED)
                self.minted += 1
                self._move_event(ctx, "Minted", None, to, 1, tid)
        else:
            if tokens is not None:
                raise errors.BadArguments("cash mint takes an amount")
            amount = _nonneg_int(amount, "amount")
            if amount == 0:
                raise errors.BadArguments("amount must be positive")
            self.minted += amount
            self._give(to, amount, None)
            self._move_event(ctx, "Minted", None, to, amount, None)

    @external
    def set_frozen(self, ctx: Context, frozen: bool) -> None:
        self._require_issuer(ctx)
        self.frozen = bool(frozen)
        ctx.emit("ClassFrozen" if self.frozen else "ClassUnfrozen")

    # -- two-phase transfer -----------------------------------------------------

    @external
    def request_transfer(self, ctx: Context, to: Address, amount: int | None = None, token: str | None = None,
                         category: str | None = None) -> int:
        amount, token = self._unit(amount, token)
        sender = ctx.sender
        self._check_policies(ctx, sender, to, amount, token, category)
        self._take_spendable(sender, amount, token)
        if token is not None:
            voucher = self.vouchers[token]
            voucher.state, voucher.holder = TokenState.LOCKED, self.address
        tid = self.next_transfer_id
        self.next_transfer_id += 1
        self.pending[tid] = PendingTransfer(sender, to, amount, token)
        self._move_event(ctx, "TransferRequested", sender, to, amount, token, transfer_id=tid, category=category)
        return tid

    @external
    def confirm_transfer(self, ctx: Context, transfer_id: int) -> None:
        pend = self.pending.get(transfer_id)
        if pend is None:
            raise errors.UnknownTransfer(str(transfer_id))
        if ctx.sender != pend.recipient:
            raise errors.NotRecipient("only the recipient can confirm")
        del self.pending[transfer_id]
        self._give(pend.recipient, pend.amount, pend.token)
        self._move_event(ctx, "TransferSettled", pend.sender, pend.recipient, pend.amount, pend.token,
                         transfer_id=transfer_id)

    @external
    def reject_transfer(self, ctx: Context, transfer_id: int) -> None:
        pend = self.pending.get(transfer_id)
        if pend is None:
            raise errors.UnknownTransfer(str(transfer_id))
        if ctx.sender not in (pend.recipient, self.issuer):
            raise errors.NotRecipient("only the recipient or issuer can reject")
        del self.pending[transfer_id]
        self._give(pend.sender, pend.amount, pend.token)
        self._move_event(ctx, "TransferRejected", pend.sender, pend.recipient, pend.amount, pend.token,
                         transfer_id=transfer_id)

    @external
    def forced_transfer(self, ctx: Context, frm: Address, to: Address, amount: int | None = None,
                        token: str | None = None) -> None:
        self._require_issuer(ctx)
        amount, token = self._unit(amount, token)
        self._take_spendable(frm, amount, token)
        self._give(to, amount, token)
        self._move_event(ctx, "ForcedTransfer", frm, to, amount, token)

    # -- locks held by other contracts -----------------------------------------

    @internal
    def lock(self, ctx: Context, owner: Address, amount: int | None = None, token: str | None = None,
             beneficiary: Address | None = None) -> None:
        """Move spendable value of ``owner`` under the calling contract's control.

        Only the transaction signer can lock their own tokens.
        """
        if ctx.origin != owner:
            raise errors.NotOwner("tokens can only be locked by their owner")
        amount, token = self._unit(amount, token)
        if beneficiary is not None:
            self._check_policies(ctx, owner, beneficiary, amount, token)
        self._take_spendable(owner, amount, token)
        holder = ctx.sender
        if token is not None:
            voucher = self.vouchers[token]
            voucher.state, voucher.holder = TokenState.LOCKED, holder
        else:
            per = self.locks.setdefault(holder, {})
            per[owner] = per.get(owner, 0) + amount
        self._move_event(ctx, "Locked", owner, holder, amount, token)

    @internal
    def unlock(self, ctx: Context, owner: Address, to: Address, amount: int | None = None,
               token: str | None = None) -> None:
        holder = ctx.sender
        amount, token = self._unit(amount, token)
        if token is not None:
            voucher = self._voucher(token)
            if voucher.state is not TokenState.LOCKED or voucher.holder != holder or voucher.owner != owner:
                raise errors.TokenNotSpendable(f"{token} is not locked by caller")
        else:
            per = self.locks.get(holder, {})
            if per.get(owner, 0) < amount:
                raise errors.InsufficientBalance("lock holds less than requested")
            per[owner] -= amount
            _drop_zero(per, owner)
            if not per:
                self.locks.pop(holder, None)
        self._give(to, amount, token)
        self._move_event(ctx, "Unlocked", owner, to, amount, token, holder=holder)

    # -- redemption and burning -------------------------------------------------

    @external
    def redeem(self, ctx: Context, amount: int | None = None, token: str | None = None) -> None:
        amount, token = self._unit(amount, token)
        owner = ctx.sender
        self._take_spendable(owner, amount, token)
        if token is not None:
            self.vouchers[token].state = TokenState.REDEEMED
        else:
            self.redeemed[owner] = self.redeemed.get(owner, 0) + amount
        self._move_event(ctx, "Redeemed", owner, None, amount, token)

    @external
    def burn(self, ctx: Context, method: BurnMethod | str, amount: int | None = None, token: str | None = None,
             archive: bool = False) -> Address | None:
        try:
            method = BurnMethod(method)
        except ValueError:
            raise errors.BadArguments(f"unknown burn method {method!r}") from None
        if not self.spec.burnable:
            raise errors.NotAuthorized(f"{self.spec.symbol} is not burnable")
        amount, token = self._unit(amount, token)
        owner = ctx.sender
        from_redeemed = 0
        if token is not None:
            voucher = self._voucher(token)
            if voucher.state is TokenState.BURNED:
                raise errors.AlreadyBurned(token)
            if voucher.owner != owner:
                raise errors.NotOwner(token)
            if voucher.state not in (TokenState.ALLOCATED, TokenState.REDEEMED):
                raise errors.TokenNotSpendable(f"{token} is {voucher.state.value}")
            from_redeemed = 1 if voucher.state is TokenState.REDEEMED else 0
        else:
            from_redeemed = min(self.redeemed.get(owner, 0), amount)
            if amount - from_redeemed:
                self._take_spendable(owner, amount - from_redeemed, None)
            if from_redeemed:
                self.redeemed[owner] -= from_redeemed
                _drop_zero(self.redeemed, owner)

        if method is BurnMethod.BURN_ADDRESS:
            holder: Address | None = BURN_ADDRESS
            self.burned_address += 0 if token else amount
        elif method is BurnMethod.REGISTRY_DELETE:
            holder = None
            self.burned_deleted += 0 if token else amount
        else:
            sink = ctx.deploy(BurnSink)
            holder = sink.address
            ctx.call(holder, "receive", class_id=self.address, amount=amount, token=token)
            if token is None:
                self.burned_sink[holder] = amount

        if token is not None:
            voucher.owner = owner if method is BurnMethod.REGISTRY_DELETE else holder
            voucher.state = TokenState.BURNED
            voucher.holder = holder
            voucher.burn_method = method
            voucher.archived = bool(archive)
        else:
            self.burned_from[owner] = self.burned_from.get(owner, 0) + amount
        if archive:
            self.archive[owner] = self.archive.get(owner, 0) + amount
        self._move_event(ctx, "Burned", owner, holder, amount, token, method=method.value,
                         archive=bool(archive), from_redeemed=from_redeemed)
        return holder

    # -- policy attachment --------------------------------------------------------

    @external
    def attach_policy(self, ctx: Context, policy: Address, token: str | None = None,
                      functions: list[str] | tuple[str, ...] = ()) -> None:
        self._require_issuer(ctx)
        if not isinstance(ctx.chain.contracts.get(policy), PolicyContract):
            raise errors.UnknownPolicy(policy.hex() if isinstance(policy, bytes) else str(policy))
        unknown = set(functions) - rule_names()
        if unknown:
            raise errors.InvalidRule(f"unknown policy functions {sorted(unknown)}")
        if token is not None:
            self._voucher(token)
        att = Attachment(policy, tuple(functions))
        target = self.attachments if token is None else self.token_attachments.setdefault(token, [])
        if att not in target:
            target.append(att)
        ctx.emit("PolicyAttached", policy=policy, token=token, functions=tuple(functions))

    @external
    def detach_policy(self, ctx: Context, policy: Address, token: str | None = None) -> None:
        self._require_issuer(ctx)
        target = self.attachments if token is None else self.token_attachments.get(token, [])
        kept = [a for a in target if a.policy != policy]
        if len(kept) == len(target):
            raise errors.UnknownPolicy("policy not attached")
        target[:] = kept
        if token is not None and not kept:
            del self.token_attachments[token]
        ctx.emit("PolicyDetached", policy=policy, token=token)

    # -- read-only queries -------------------------------------------------------

    def spendable_of(self, address: Address) -> int:
        if self.is_voucher:
            return sum(1 for v in self.vouchers.values() if v.owner == address and v.state is TokenState.ALLOCATED)
        return self.balances.get(address, 0)

    def balance_of(self, address: Address) -> int:
        """Units credited to ``address``: spendable plus redeemed-but-unburned,
        plus burned units parked at ``address`` if it is the burn address or a sink."""
        if self.is_voucher:
            return sum(
                1 for v in self.vouchers.values()
                if (v.owner == address and v.state in (TokenState.ALLOCATED, TokenState.REDEEMED, TokenState.ISSUED))
                or (v.state is TokenState.BURNED and v.holder == address)
            )
        held = self.burned_address if address == BURN_ADDRESS else self.burned_sink.get(address, 0)
        return self.balances.get(address, 0) + self.redeemed.get(address, 0) + held

    def owner_of(self, token: str) -> Address | None:
        return self._voucher(token).owner

    def state_of(self, token: str) -> TokenState:
        return self._voucher(token).state

    def locked_by(self, holder: Address) -> int:
        if self.is_voucher:
            return sum(1 for v in self.vouchers.values() if v.state is TokenState.LOCKED and v.holder == holder)
        return sum(self.locks.get(holder, {}).values())

    def supply(self) -> Supply:
        if self.is_voucher:
            states = Counter(v.state for v in self.vouchers.values())
            burned = Counter(v.burn_method for v in self.vouchers.values() if v.state is TokenState.BURNED)
            pending = sum(1 for p in self.pending.values())
            return Supply(
                minted=self.minted,
                issued=states[TokenState.ISSUED],
                spendable=states[TokenState.ALLOCATED],
                pending=pending,
                locked=states[TokenState.LOCKED] - pending,
                redeemed=states[TokenState.REDEEMED],
                burned_address=burned[BurnMethod.BURN_ADDRESS],
                burned_deleted=burned[BurnMethod.REGISTRY_DELETE],
                burned_sink=burned[BurnMethod.SELF_DESTRUCT_SINK],
                archived=sum(self.archive.values()),
            )
        return Supply(
            minted=self.minted,
            issued=self.issued,
            spendable=sum(self.balances.values()),
            pending=sum(p.amount for p in self.pending.values()),
            locked=sum(sum(per.values()) for per in self.locks.values()),
            redeemed=sum(self.redeemed.values()),
            burned_address=self.burned_address,
            burned_deleted=self.burned_deleted,
            burned_sink=sum(self.burned_sink.values()),
            archived=sum(self.archive.values()),
        )

    def registry_view(self) -> "RegistryView":
        return RegistryView(
            balances=dict(self.balances),
            redeemed=dict(self.redeemed),
            issued=self.issued,
            pending={k: (p.sender, p.recipient, p.amount, p.token) for k, p in self.pending.items()},
            locks={h: dict(per) for h, per in self.locks.items() if per},
            vouchers={t: (v.owner, v.state.value) for t, v in self.vouchers.items()},
            burned=self.supply().burned,
        )


@dataclass(kw_only=True)
class TokenFactory(Contract):
    kind = "token_factory"
    classes: list[Address] = field(default_factory=list)

    @external
    def spawn_token_class(self, ctx: Context, spec: TokenClassSpec) -> Address:
        if not isinstance(spec, TokenClassSpec):
            raise errors.InvalidSpec("spec must be a TokenClassSpec")
        spec.validate()
        cls = ctx.deploy(TokenClass, spec=spec, issuer=ctx.sender)
        self.classes.append(cls.address)
        ctx.emit(
            "TokenClassCreated",
            class_id=cls.address,
            issuer=ctx.sender,
            name=spec.name,
            symbol=spec.symbol,
            decimals=spec.decimals,
            total_supply=spec.total_supply,
            fungibility=spec.fungibility.value,
            mintable=spec.mintable,
            burnable=spec.burnable,
        )
        ctx.call(cls.address, "initialize")
        return cls.address


# -- replay ----------------------------------------------------------------------


@dataclass
class RegistryView:
    """Ownership state of one class, comparable between live state and replay."""

    balances: dict
    redeemed: dict
    issued: int
    pending: dict
    locks: dict
    vouchers: dict
    burned: int


def _bump(d: dict, key, delta: int) -> None:
    d[key] = d.get(key, 0) + delta
    if d[key] == 0:
        del d[key]


def replay(events: list[Event]) -> RegistryView:
    """Rebuild a class's registry by folding over its events in order."""
    view = RegistryView({}, {}, 0, {}, {}, {}, 0)
    for ev in events:
        p = ev.payload
        name, frm, to, amt, tok = ev.name, p.get("from"), p.get("to"), p.get("amount"), p.get("token")
        if name == "Issued":
            if tok is None:
                view.issued += amt
            else:
                view.vouchers[tok] = (to, "issued")
        elif name == "Allocated":
            if tok is None:
                view.issued -= amt
                _bump(view.balances, to, amt)
            else:
                view.vouchers[tok] = (to, "allocated")
        elif name == "Minted":
            if tok is None:
                _bump(view.balances, to, amt)
            else:
                view.vouchers[tok] = (to, "allocated")
        elif name == "TransferRequested":
            view.pending[p["transfer_id"]] = (frm, to, amt, tok)
            if tok is None:
                _bump(view.balances, frm, -amt)
            else:
                view.vouchers[tok] = (frm, "locked")
        elif name in ("TransferSettled", "TransferRejected"):
            del view.pending[p["transfer_id"]]
            dest = to if name == "TransferSettled" else frm
            if tok is None:
                _bump(view.balances, dest, amt)
            else:
                view.vouchers[tok] = (dest, "allocated")
        elif name in ("ForcedTransfer", "DelegatedTransfer"):
            if tok is None:
                _bump(view.balances, frm, -amt)
                _bump(view.balances, to, amt)
            else:
                view.vouchers[tok] = (to, "allocated")
        elif name == "Locked":
            if tok is None:
                _bump(view.balances, frm, -amt)
                per = view.locks.setdefault(to, {})
                _bump(per, frm, amt)
            else:
                view.vouchers[tok] = (frm, "locked")
        elif name == "Unlocked":
            if tok is None:
                per = view.locks[p["holder"]]
                _bump(per, frm, -amt)
                if not per:
                    del view.locks[p["holder"]]
                _bump(view.balances, to, amt)
            else:
                view.vouchers[tok] = (to, "allocated")
        elif name == "Redeemed":
            if tok is None:
                _bump(view.balances, frm, -amt)
                _bump(view.redeemed, frm, amt)
            else:
                view.vouchers[tok] = (frm, "redeemed")
        elif name == "Burned":
            view.burned += amt
            if tok is None:
                if p["from_redeemed"]:
                    _bump(view.redeemed, frm, -p["from_redeemed"])
                if amt - p["from_redeemed"]:
                    _bump(view.balances, frm, -(amt - p["from_redeemed"]))
            else:
                owner = frm if p["method"] == BurnMethod.REGISTRY_DELETE.value else to
                view.vouchers[tok] = (owner, "burned")
    return view


# -- client helpers ----------------------------------------------------------------


def token_class(chain: Chain, class_id: Address) -> TokenClass:
    return chain.get(class_id, TokenClass)


def spawn_token_class(chain: Chain, issuer, spec: TokenClassSpec) -> Receipt:
    return chain.send(issuer, TOKEN_FACTORY, "spawn_token_class", spec=spec)


def allocate(chain: Chain, issuer, class_id: Address, to: Address, amount=None, token=None) -> Receipt:
    return chain.send(issuer, class_id, "allocate", to=to, amount=amount, token=token)


def mint(chain: Chain, issuer, class_id: Address, to: Address, amount=None, tokens=None) -> Receipt:
    args: dict[str, Any] = {"to": to}
    if amount is not None:
        args["amount"] = amount
    if tokens is not None:
        args["tokens"] = list(tokens)
    return chain.send(issuer, class_id, "mint", **args)


def request_transfer(chain: Chain, sender, class_id: Address, to: Address, amount=None, token=None,
                     category=None) -> Receipt:
    return chain.send(sender, class_id, "request_transfer", to=to, amount=amount, token=token, category=category)


def confirm_transfer(chain: Chain, recipient, class_id: Address, transfer_id: int) -> Receipt:
    return chain.send(recipient, class_id, "confirm_transfer", transfer_id=transfer_id)


def reject_transfer(chain: Chain, caller, class_id: Address, transfer_id: int) -> Receipt:
    return chain.send(caller, class_id, "reject_transfer", transfer_id=transfer_id)


def transfer(chain: Chain, sender, recipient, class_id: Address, amount=None, token=None,
             category=None) -> tuple[Receipt, Receipt | None]:
    """Request and immediately confirm; returns both receipts."""
    req = request_transfer(chain, sender, class_id, recipient.address, amount, token, category)
    if not req.ok:
        return req, None
    return req, confirm_transfer(chain, recipient, class_id, req.value)


def forced_transfer(chain: Chain, issuer, class_id: Address, frm: Address, to: Address, amount=None,
                    token=None) -> Receipt:
    return chain.send(issuer, class_id, "forced_transfer", frm=frm, to=to, amount=amount, token=token)


def redeem(chain: Chain, owner, class_id: Address, amount=None, token=None) -> Receipt:
    return chain.send(owner, class_id, "redeem", amount=amount, token=token)


def burn(chain: Chain, owner, class_id: Address, method: BurnMethod | str, amount=None, token=None,
         archive: bool = False) -> Receipt:
    return chain.send(owner, class_id, "burn", method=BurnMethod(method), amount=amount, token=token,
                      archive=archive)


def balance_of(chain: Chain, class_id: Address, address: Address) -> int:
    return token_class(chain, class_id).balance_of(address)


def owner_of(chain: Chain, class_id: Address, token: str) -> Address | None:
    return token_class(chain, class_id).owner_of(token)


def history(chain: Chain, class_id: Address, who: Address | str | None = None) -> list[Event]:
    """Ordered registry events of a class, optionally those touching one
    address or voucher id."""
    token_class(chain, class_id)
    events = chain.query_events(emitter=class_id)
    if who is None:
        return events
    if isinstance(who, str):
        return [e for e in events if e.payload.get("token") == who]
    return [e for e in events if who in (e.payload.get("from"), e.payload.get("to"))]
