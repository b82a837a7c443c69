"""Transfer policies, seller credentials and delegated spending."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, ClassVar, Iterable

from . import errors
from .crypto import Address, address_of, verify
from .encoding import EncodingError, Record, decode, encode, sha256
from .ledger import Chain, Context, Contract, Receipt, external, system_address

POLICY_FACTORY = system_address("governance")
CREDENTIAL_REGISTRY = system_address("credentials")


@dataclass(frozen=True)
class TransferCheck:
    """The facts a policy rule may look at."""

    class_id: Address
    token: str | None
    sender: Address
    recipient: Address
    amount: int
    height: int
    category: str | None = None


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


PASS = Verdict(True)


# -- rules ----------------------------------------------------------------------


class Rule:
    name: ClassVar[str]

    def validate(self) -> None:
        pass

    def check(self, chain: Chain, check: TransferCheck, policy_issuer: Address) -> str | None:
        """Return a failure reason, or None if the rule passes."""
        raise NotImplementedError


@dataclass(frozen=True)
class EligibleSellers(Rule):
    """Recipient must be listed, either inline or in a seller registry."""

    name: ClassVar[str] = "eligible_sellers"
    sellers: frozenset[Address] = frozenset()
    registry: Address | None = None

    def validate(self) -> None:
        if not self.sellers and self.registry is None:
            raise errors.InvalidRule("eligible_sellers needs sellers or a registry")

    def check(self, chain, check, policy_issuer):
        if check.recipient in self.sellers:
            return None
        if self.registry is not None:
            reg = chain.contracts.get(self.registry)
            if isinstance(reg, SellerRegistry) and check.recipient in reg.sellers:
                return None
        return "recipient is not an eligible seller"


@dataclass(frozen=True)
class MaxTokensPerTx(Rule):
    name: ClassVar[str] = "max_tokens_per_tx"
    limit: int

    def validate(self) -> None:
        if not isinstance(self.limit, int) or isinstance(self.limit, bool) or self.limit < 0:
            raise errors.InvalidRule("limit must be a non-negative integer")

    def check(self, chain, check, policy_issuer):
        if check.amount > self.limit:
            return f"amount {check.amount} exceeds per-transfer limit {self.limit}"
        return None


@dataclass(frozen=True)
class ProductCategory(Rule):
    name: ClassVar[str] = "product_category"
    codes: frozenset[str]

    def validate(self) -> None:
        if not self.codes or not all(isinstance(c, str) for c in self.codes):
            raise errors.InvalidRule("product_category needs string codes")

    def check(self, chain, check, policy_issuer):
        if check.category not in self.codes:
            return f"category {check.category!r} not permitted"
        return None


@dataclass(frozen=True)
class ExpiryHeight(Rule):
    """Transfers allowed up to and including ``height``."""

    name: ClassVar[str] = "expiry_height"
    height: int

    def validate(self) -> None:
        if not isinstance(self.height, int) or isinstance(self.height, bool) or self.height < 0:
            raise errors.InvalidRule("expiry height must be a non-negative integer")

    def check(self, chain, check, policy_issuer):
        if check.height > self.height:
            return f"token expired at height {self.height}"
        return None


@dataclass(frozen=True)
class RequireCredential(Rule):
    """The recipient (or sender) must hold an active credential with
    ``attributes[key] == value`` from ``issuer`` (default: the policy issuer)."""

    name: ClassVar[str] = "require_credential"
    key: str
    value: Any
    subject: str = "to"
    issuer: Address | None = None

    def validate(self) -> None:
        if not isinstance(self.key, str) or not self.key:
            raise errors.InvalidRule("credential key must be a non-empty string")
        if self.subject not in ("to", "from"):
            raise errors.InvalidRule("credential subject must be 'to' or 'from'")
        if not isinstance(self.value, (str, int)):
            raise errors.InvalidRule("credential value must be a scalar")

    def check(self, chain, check, policy_issuer):
        who = check.recipient if self.subject == "to" else check.sender
        issuer = self.issuer or policy_issuer
        registry = chain.contracts.get(CREDENTIAL_REGISTRY)
        if isinstance(registry, CredentialRegistry):
            for entry in registry.entries.values():
                cred = entry.credential
                if (entry.active and cred.subject == who and cred.issuer == issuer
                        and cred.attributes.get(self.key) == self.value):
                    return None
        return f"{self.subject} party lacks an active {self.key}={self.value!r} credential"


RULE_TYPES: tuple[type[Rule], ...] = (EligibleSellers, MaxTokensPerTx, ProductCategory, ExpiryHeight,
                                      RequireCredential)


def rule_names() -> set[str]:
    return {r.name for r in RULE_TYPES}


@dataclass(frozen=True)
class Attachment:
    policy: Address
    functions: tuple[str, ...] = ()


# -- policy contracts -------------------------------------------------------------


@dataclass(kw_only=True)
class PolicyContract(Contract):
    kind = "policy"
    issuer: Address
    rules: tuple[Rule, ...] = ()

    def evaluate(self, chain: Chain, check: TransferCheck, functions: Iterable[str] = ()) -> Verdict:
        selected = set(functions)
        for rule in self.rules:
            if selected and rule.name not in selected:
                continue
            reason = rule.check(chain, check, self.issuer)
            if reason is not None:
                return Verdict(False, f"{rule.name}: {reason}")
        return PASS

    @external
    def validate(self, ctx: Context, check: TransferCheck, functions: tuple[str, ...] = ()) -> bool:
        return self.evaluate(ctx.chain, check, functions).ok


@dataclass(kw_only=True)
class SellerRegistry(Contract):
    kind = "seller_registry"
    owner: Address
    sellers: set[Address] = field(default_factory=set)

    @external
    def add_seller(self, ctx: Context, seller: Address) -> None:
        if ctx.sender != self.owner:
            raise errors.NotAuthorized("only the registry owner can add sellers")
        self.sellers.add(seller)
        ctx.emit("SellerAdded", seller=seller)

    @external
    def remove_seller(self, ctx: Context, seller: Address) -> None:
        if ctx.sender != self.owner:
            raise errors.NotAuthorized("only the registry owner can remove sellers")
        self.sellers.discard(seller)
        ctx.emit("SellerRemoved", seller=seller)


@dataclass(kw_only=True)
class PolicyFactory(Contract):
    kind = "policy_factory"

    @external
    def deploy_policy(self, ctx: Context, rules: list[Rule] | tuple[Rule, ...] = ()) -> Address:
        rules = tuple(rules)
        for rule in rules:
            if not isinstance(rule, RULE_TYPES):
                raise errors.InvalidRule(f"unknown rule {type(rule).__name__}")
            rule.validate()
        policy = ctx.deploy(PolicyContract, issuer=ctx.sender, rules=rules)
        ctx.emit("PolicyDeployed", policy=policy.address, issuer=ctx.sender, rules=rules)
        return policy.address

    @external
    def deploy_seller_registry(self, ctx: Context, sellers: list[Address] | tuple[Address, ...] = ()) -> Address:
        reg = ctx.deploy(SellerRegistry, owner=ctx.sender, sellers=set(sellers))
        ctx.emit("SellerRegistryDeployed", registry=reg.address, owner=ctx.sender)
        return reg.address


def validate_attachments(chain: Chain, attachments: Iterable[Attachment], check: TransferCheck) -> Verdict:
    for att in attachments:
        policy = chain.contracts.get(att.policy)
        if not isinstance(policy, PolicyContract):
            return Verdict(False, "attached policy no longer exists")
        verdict = policy.evaluate(chain, check, att.functions)
        if not verdict.ok:
            return verdict
    return PASS


def validate_policy(chain: Chain, class_id: Address, token: str | None, sender: Address, recipient: Address,
                    amount: int, height: int | None = None, category: str | None = None) -> Verdict:
    """Judge a hypothetical transfer against every policy currently attached
    to the class and, for vouchers, to the token."""
    from .tokens import TokenClass

    cls = chain.get(class_id, TokenClass)
    atts = list(cls.attachments)
    if token is not None:
        atts += cls.token_attachments.get(token, [])
    h = chain.height if height is None else height
    return validate_attachments(chain, atts, TransferCheck(class_id, token, sender, recipient, amount, h, category))


# -- credentials -------------------------------------------------------------------


@dataclass(frozen=True)
class Credential:
    credential_id: bytes
    issuer: Address
    issuer_key: bytes
    subject: Address
    attributes: dict[str, Any]
    serial: int
    issued_at: int
    signature: bytes

    @staticmethod
    def payload(issuer: Address, issuer_key: bytes, subject: Address, attributes: dict[str, Any],
                serial: int, issued_at: int) -> bytes:
        return encode(["paysim/credential", issuer, issuer_key, subject, attributes, serial, issued_at])

    def signed_payload(self) -> bytes:
        return self.payload(self.issuer, self.issuer_key, self.subject, self.attributes, self.serial,
                            self.issued_at)

    def to_bytes(self) -> bytes:
        return encode(self)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Credential":
        rec = decode(data)
        if not isinstance(rec, Record) or rec.name != cls.__name__:
            raise EncodingError("not a credential")
        try:
            return cls(**rec.as_dict())
        except TypeError as exc:
            raise EncodingError(str(exc)) from None


def make_credential(issuer_keys, subject: Address, attributes: dict[str, Any], serial: int,
                    issued_at: int) -> Credential:
    for k, v in attributes.items():
        if not isinstance(k, str) or not isinstance(v, (str, int)):
            raise ValueError("attributes map string keys to scalar values")
    attributes = dict(attributes)
    payload = Credential.payload(issuer_keys.address, issuer_keys.public, subject, attributes, serial, issued_at)
    return Credential(
        credential_id=sha256(payload),
        issuer=issuer_keys.address,
        issuer_key=issuer_keys.public,
        subject=subject,
        attributes=attributes,
        serial=serial,
        issued_at=issued_at,
        signature=issuer_keys.sign(payload),
    )


def _signature_ok(cred: Credential) -> bool:
    if address_of(cred.issuer_key) != cred.issuer:
        return False
    payload = cred.signed_payload()
    return sha256(payload) == cred.credential_id and verify(cred.issuer_key, cred.signature, payload)


@dataclass
class CredentialEntry:
    credential: Credential
    active: bool = True


@dataclass(kw_only=True)
class CredentialRegistry(Contract):
    kind = "credential_registry"
    entries: dict[bytes, CredentialEntry] = field(default_factory=dict)

    @external
    def issue(self, ctx: Context, credential: Credential) -> bytes:
        if not isinstance(credential, Credential):
            raise errors.BadArguments("expected a Credential")
        if credential.issuer != ctx.sender:
            raise errors.NotIssuer("credential must be registered by its issuer")
        if not _signature_ok(credential):
            raise errors.BadArguments("credential signature does not verify")
        if credential.credential_id in self.entries:
            raise errors.DuplicateCredential(credential.credential_id.hex())
        self.entries[credential.credential_id] = CredentialEntry(credential)
        ctx.emit("CredentialIssued", credential_id=credential.credential_id, issuer=credential.issuer,
                 subject=credential.subject)
        return credential.credential_id

    @external
    def revoke(self, ctx: Context, credential_id: bytes) -> None:
        entry = self.entries.get(credential_id)
        if entry is None:
            raise errors.UnknownCredential(bytes(credential_id).hex())
        if entry.credential.issuer != ctx.sender:
            raise errors.NotIssuer("only the credential issuer can revoke")
        entry.active = False
        ctx.emit("CredentialRevoked", credential_id=credential_id)

    def serial_for(self, issuer: Address) -> int:
        return sum(1 for e in self.entries.values() if e.credential.issuer == issuer)


def verify_credential(chain: Chain, presented: Credential | bytes) -> Verdict:
    if isinstance(presented, (bytes, bytearray)):
        try:
            presented = Credential.from_bytes(bytes(presented))
        except EncodingError as exc:
            return Verdict(False, f"malformed credential: {exc}")
    registry = chain.get(CREDENTIAL_REGISTRY, CredentialRegistry)
    entry = registry.entries.get(presented.credential_id)
    if entry is None:
        return Verdict(False, "unknown credential")
    if entry.credential.to_bytes() != presented.to_bytes():
        return Verdict(False, "presented copy differs from registry copy")
    if not _signature_ok(presented):
        return Verdict(False, "bad issuer signature")
    if not entry.active:
        return Verdict(False, "credential revoked")
    return PASS


# -- delegated spending ------------------------------------------------------------


@dataclass(kw_only=True)
class SpenderMixin:
    """Allowance bookkeeping mixed into the token class contract."""

    allowances: dict[Address, dict[Address, int]] = field(default_factory=dict)

    def allowance(self, owner: Address, spender: Address) -> int:
        return self.allowances.get(owner, {}).get(spender, 0)

    @external
    def approve(self, ctx: Context, spender: Address, amount: int) -> None:
        """Set (not add to) ``spender``'s allowance over the caller's tokens."""
        if not isinstance(amount, int) or isinstance(amount, bool) or amount < 0:
            raise errors.BadArguments("allowance must be a non-negative integer")
        owner = ctx.sender
        if self.frozen:
            raise errors.ClassFrozen(self.spec.symbol)
        if amount > self.spendable_of(owner):
            raise errors.InsufficientBalance(f"cannot approve {amount}, spendable {self.spendable_of(owner)}")
        per = self.allowances.setdefault(owner, {})
        if amount:
            per[spender] = amount
        else:
            per.pop(spender, None)
            if not per:
                del self.allowances[owner]
        ctx.emit("Approval", owner=owner, spender=spender, amount=amount)

    @external
    def transfer_from(self, ctx: Context, owner: Address, to: Address, amount: int | None = None,
                      token: str | None = None, category: str | None = None) -> None:
        amount, token = self._unit(amount, token)
        spender = ctx.sender
        remaining = self.allowance(owner, spender)
        if amount > remaining:
            raise errors.AllowanceExceeded(f"allowance {remaining} < {amount}")
        self._check_policies(ctx, owner, to, amount, token, category)
        self._take_spendable(owner, amount, token)
        self._give(to, amount, token)
        left = remaining - amount
        if left:
            self.allowances[owner][spender] = left
        else:
            del self.allowances[owner][spender]
            if not self.allowances[owner]:
                del self.allowances[owner]
        self._move_event(ctx, "DelegatedTransfer", owner, to, amount, token, spender=spender, remaining=left)


# -- client helpers ------------------------------------------------------------------


def deploy_policy(chain: Chain, issuer, rules: Iterable[Rule] = ()) -> Receipt:
    return chain.send(issuer, POLICY_FACTORY, "deploy_policy", rules=tuple(rules))


def deploy_seller_registry(chain: Chain, owner, sellers: Iterable[Address] = ()) -> Receipt:
    return chain.send(owner, POLICY_FACTORY, "deploy_seller_registry", sellers=tuple(sellers))


def attach_policy(chain: Chain, issuer, class_id: Address, policy: Address, token: str | None = None,
                  functions: Iterable[str] = ()) -> Receipt:
    return chain.send(issuer, class_id, "attach_policy", policy=policy, token=token, functions=tuple(functions))


def detach_policy(chain: Chain, issuer, class_id: Address, policy: Address, token: str | None = None) -> Receipt:
    return chain.send(issuer, class_id, "detach_policy", policy=policy, token=token)


def issue_credential(chain: Chain, issuer, subject: Address, attributes: dict[str, Any]
                     ) -> tuple[Receipt, Credential]:
    """Sign a credential for ``subject`` and register it. The returned
    credential is the subject's wallet copy."""
    registry = chain.get(CREDENTIAL_REGISTRY, CredentialRegistry)
    cred = make_credential(issuer, subject, attributes, registry.serial_for(issuer.address), chain.height)
    return chain.send(issuer, CREDENTIAL_REGISTRY, "issue", credential=cred), cred


def revoke_credential(chain: Chain, issuer, credential_id: bytes) -> Receipt:
    return chain.send(issuer, CREDENTIAL_REGISTRY, "revoke", credential_id=credential_id)


def approve(chain: Chain, owner, class_id: Address, spender: Address, amount: int) -> Receipt:
    return chain.send(owner, class_id, "approve", spender=spender, amount=amount)


def transfer_from(chain: Chain, spender, class_id: Address, owner: Address, to: Address, amount=None,
                  token=None, category=None) -> Receipt:
    return chain.send(spender, class_id, "transfer_from", owner=owner, to=to, amount=amount, token=token,
                      category=category)
