"""Scenario verbs: one per ledger operation plus the ``mine`` and ``expect`` built-ins.

Handlers receive the runtime, the acting key pair and arguments with every
``@actor`` and ``$var`` reference already resolved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable

from .. import channels as C
from .. import errors
from .. import governance as G
from .. import privacy as P
from .. import settlement as S
from .. import tokens as T
from ..encoding import sha256

if TYPE_CHECKING:
    from .runner import Runtime


@dataclass(frozen=True)
class Offchain:
    """Result of a step that never touches the ledger."""

    value: Any = None


@dataclass(frozen=True)
class Verb:
    name: str
    handler: Callable
    required: frozenset[str] = frozenset()
    optional: frozenset[str] = frozenset()
    patterns: tuple[str, ...] = ()
    operations: tuple[str, ...] = ()
    max_positional: int = 0

    def check_syntax(self, line: int, positional: list, args: dict, error: type) -> None:
        if len(positional) > self.max_positional:
            raise error(line, f"{self.name} takes at most {self.max_positional} positional values")
        missing = self.required - args.keys()
        if missing:
            raise error(line, f"{self.name} is missing {', '.join(sorted(missing))}")
        extra = args.keys() - self.required - self.optional
        if extra:
            raise error(line, f"{self.name} does not take {', '.join(sorted(extra))}")


VERBS: dict[str, Verb] = {}
BUILTINS: dict[str, Verb] = {}


def verb(name: str, required: str = "", optional: str = "", patterns: str = "", operations: str = ""):
    def register(fn: Callable) -> Callable:
        VERBS[name] = Verb(name, fn, frozenset(required.split()), frozenset(optional.split()),
                           tuple(patterns.split()), tuple(operations.split()))
        return fn
    return register


def _unit(args: dict) -> dict:
    token = args.get("token")
    return {"amount": args.get("amount"), "token": None if token is None else str(token)}


# -- ledger ------------------------------------------------------------------------


@verb("pay_native", "to amount", operations="submit_tx")
def _pay_native(rt: Runtime, me, a):
    return rt.chain.send(me, a["to"], "transfer", amount=a["amount"])


# -- token template / registry / burn ---------------------------------------------------


@verb("spawn_token_class", "name symbol", "decimals supply fungibility mintable burnable",
      "token_template", "spawn_token_class")
def _spawn(rt, me, a):
    spec = T.TokenClassSpec(
        name=str(a["name"]), symbol=str(a["symbol"]), decimals=a.get("decimals", 0),
        total_supply=a.get("supply", 0), fungibility=a.get("fungibility", "cash"),
        mintable=a.get("mintable", True), burnable=a.get("burnable", True))
    return T.spawn_token_class(rt.chain, me, spec)


@verb("allocate", "class to", "amount token", "token_registry", "mint")
def _allocate(rt, me, a):
    return T.allocate(rt.chain, me, a["class"], a["to"], **_unit(a))


@verb("mint", "class to", "amount tokens", "token_template", "mint")
def _mint(rt, me, a):
    tokens = a.get("tokens")
    return T.mint(rt.chain, me, a["class"], a["to"], a.get("amount"),
                  None if tokens is None else [str(t) for t in tokens])


@verb("request_transfer", "class to", "amount token category", "token_registry", "request_transfer")
def _request(rt, me, a):
    return T.request_transfer(rt.chain, me, a["class"], a["to"], category=a.get("category"), **_unit(a))


@verb("confirm_transfer", "class transfer", "", "token_registry", "confirm_transfer")
def _confirm(rt, me, a):
    return T.confirm_transfer(rt.chain, me, a["class"], a["transfer"])


@verb("reject_transfer", "class transfer", "", "token_registry", "reject_transfer")
def _reject(rt, me, a):
    return T.reject_transfer(rt.chain, me, a["class"], a["transfer"])


@verb("forced_transfer", "class from to", "amount token", "token_registry", "forced_transfer")
def _forced(rt, me, a):
    return T.forced_transfer(rt.chain, me, a["class"], a["from"], a["to"], **_unit(a))


@verb("redeem", "class", "amount token", "token_registry", "redeem")
def _redeem(rt, me, a):
    return T.redeem(rt.chain, me, a["class"], **_unit(a))


@verb("burn", "class method", "amount token archive", "burned_token", "burn")
def _burn(rt, me, a):
    return T.burn(rt.chain, me, a["class"], a["method"], archive=a.get("archive", False), **_unit(a))


@verb("set_frozen", "class frozen", "", "token_template")
def _freeze(rt, me, a):
    return rt.chain.send(me, a["class"], "set_frozen", frozen=a["frozen"])


@verb("history", "class", "of token", "token_registry", "balance_of query_events")
def _history(rt, me, a):
    who = a.get("of", a.get("token"))
    return Offchain(len(T.history(rt.chain, a["class"], None if who is None else (
        str(who) if "token" in a else who))))


# -- governance ---------------------------------------------------------------------------


def _rules(a: dict) -> list[G.Rule]:
    rules: list[G.Rule] = []
    if "sellers" in a or "registry" in a:
        rules.append(G.EligibleSellers(frozenset(a.get("sellers", [])), a.get("registry")))
    if "max_per_tx" in a:
        rules.append(G.MaxTokensPerTx(a["max_per_tx"]))
    if "categories" in a:
        rules.append(G.ProductCategory(frozenset(str(c) for c in a["categories"])))
    if "expiry" in a:
        rules.append(G.ExpiryHeight(a["expiry"]))
    if "credential" in a:
        key, sep, value = str(a["credential"]).partition(":")
        if not sep:
            raise errors.InvalidRule("credential rule is key:value")
        rules.append(G.RequireCredential(key, int(value) if value.lstrip("-").isdigit() else value,
                                         a.get("credential_subject", "to"), a.get("credential_issuer")))
    return rules


@verb("deploy_policy", "", "sellers registry max_per_tx categories expiry credential credential_subject "
      "credential_issuer", "policy_contract", "deploy_policy")
def _deploy_policy(rt, me, a):
    return G.deploy_policy(rt.chain, me, _rules(a))


@verb("deploy_seller_registry", "", "sellers", "policy_contract")
def _deploy_registry(rt, me, a):
    return G.deploy_seller_registry(rt.chain, me, a.get("sellers", []))


@verb("add_seller", "registry seller", "", "policy_contract")
def _add_seller(rt, me, a):
    return rt.chain.send(me, a["registry"], "add_seller", seller=a["seller"])


@verb("remove_seller", "registry seller", "", "policy_contract")
def _remove_seller(rt, me, a):
    return rt.chain.send(me, a["registry"], "remove_seller", seller=a["seller"])


@verb("attach_policy", "class policy", "token functions", "policy_contract", "attach_policy")
def _attach(rt, me, a):
    token = a.get("token")
    return G.attach_policy(rt.chain, me, a["class"], a["policy"], None if token is None else str(token),
                           [str(f) for f in a.get("functions", [])])


@verb("detach_policy", "class policy", "token", "policy_contract", "attach_policy")
def _detach(rt, me, a):
    token = a.get("token")
    return G.detach_policy(rt.chain, me, a["class"], a["policy"], None if token is None else str(token))


@verb("validate_policy", "class to", "amount token category", "policy_contract", "validate_policy")
def _validate(rt, me, a):
    token = a.get("token")
    verdict = G.validate_policy(rt.chain, a["class"], None if token is None else str(token), me.address, a["to"],
                                a.get("amount") or 1, category=a.get("category"))
    return Offchain("pass" if verdict.ok else "fail")


@verb("issue_credential", "subject attributes", "", "seller_credential", "issue_credential")
def _issue(rt, me, a):
    attrs = {}
    for item in a["attributes"] if isinstance(a["attributes"], list) else [a["attributes"]]:
        key, sep, value = str(item).partition(":")
        if not sep:
            raise errors.BadArguments("attributes are key:value")
        attrs[key] = int(value) if value.lstrip("-").isdigit() else value
    receipt, cred = G.issue_credential(rt.chain, me, a["subject"], attrs)
    rt.wallet(a["subject"]).append(cred)
    return receipt, cred


@verb("revoke_credential", "credential", "", "seller_credential", "revoke_credential")
def _revoke(rt, me, a):
    return G.revoke_credential(rt.chain, me, a["credential"].credential_id)


@verb("present_credential", "credential", "", "seller_credential", "verify_credential")
def _present(rt, me, a):
    """Off-chain: the actor shows a credential and the verifier checks it against the registry."""
    return Offchain("pass" if G.verify_credential(rt.chain, a["credential"]).ok else "fail")


@verb("approve", "class spender amount", "", "authorised_spender", "approve")
def _approve(rt, me, a):
    return G.approve(rt.chain, me, a["class"], a["spender"], a["amount"])


@verb("transfer_from", "class owner to", "amount token category", "authorised_spender", "transfer_from")
def _transfer_from(rt, me, a):
    return G.transfer_from(rt.chain, me, a["class"], a["owner"], a["to"], category=a.get("category"), **_unit(a))


# -- settlement ----------------------------------------------------------------------------


@verb("open_escrow", "buyer seller class deadline", "amount token feed key expected multisig", "escrow",
      "open_escrow")
def _open_escrow(rt, me, a):
    if "multisig" in a:
        cond: S.Condition = S.MultisigApproves(a["multisig"])
    elif "feed" in a and "key" in a:
        cond = S.OracleConfirms(a["feed"], str(a["key"]), a.get("expected", True))
    else:
        raise errors.BadArguments("escrow needs feed+key or multisig")
    return S.open_escrow(rt.chain, me, a["buyer"], a["seller"], a["class"], cond, a["deadline"], **_unit(a))


@verb("fund_escrow", "escrow", "", "escrow", "fund_escrow")
def _fund_escrow(rt, me, a):
    return S.fund_escrow(rt.chain, me, a["escrow"])


@verb("claim_escrow", "escrow", "", "escrow", "claim_escrow")
def _claim_escrow(rt, me, a):
    return S.claim_escrow(rt.chain, me, a["escrow"])


@verb("create_multisig", "signers threshold", "", "multisig")
def _create_multisig(rt, me, a):
    return S.create_multisig(rt.chain, me, a["signers"], a["threshold"])


@verb("multisig_sign", "multisig", "payload escrow", "multisig", "multisig_sign")
def _multisig_sign(rt, me, a):
    payload = S.release_payload(a["escrow"]) if "escrow" in a else a.get("payload")
    if not isinstance(payload, bytes):
        raise errors.BadArguments("multisig_sign needs payload=0x.. or escrow=")
    return S.multisig_sign(rt.chain, me, a["multisig"], payload)


@verb("multisig_update_pool", "multisig signers threshold", "", "multisig", "multisig_update_pool")
def _update_pool(rt, me, a):
    return S.multisig_update_pool(rt.chain, me, a["multisig"], a["signers"], a["threshold"])


@verb("create_feed", "attestors", "quorum mode", "oracle")
def _create_feed(rt, me, a):
    return S.create_feed(rt.chain, me, a["attestors"], a.get("quorum", 1), a.get("mode", "push"))


@verb("oracle_push", "feed key value", "", "oracle", "oracle_push")
def _push(rt, me, a):
    return S.oracle_push(rt.chain, me, a["feed"], str(a["key"]), a["value"])


@verb("create_consumer", "", "", "oracle")
def _create_consumer(rt, me, a):
    return rt.chain.send(me, S.SETTLEMENT_FACTORY, "create_consumer")


@verb("oracle_request", "consumer feed key", "subscribe", "oracle", "oracle_request")
def _request_data(rt, me, a):
    return rt.chain.send(me, a["consumer"], "ask", feed=a["feed"], key=str(a["key"]),
                         subscribe=a.get("subscribe", False))


@verb("oracle_respond", "feed key value", "", "oracle", "oracle_request")
def _respond(rt, me, a):
    return S.oracle_respond(rt.chain, me, a["feed"], str(a["key"]), a["value"])


@verb("oracle_read", "feed key", "", "oracle", "oracle_read")
def _read(rt, me, a):
    try:
        return Offchain(S.oracle_read(rt.chain, a["feed"], str(a["key"]))[0])
    except errors.NotAvailable:
        return Offchain("unavailable")


# -- channels and swaps ------------------------------------------------------------------------


@verb("open_channel", "counterparty class deposit", "counter_deposit window", "payment_channel", "open_channel")
def _open_channel(rt, me, a):
    dep_b = a.get("counter_deposit", 0)
    receipt = C.open_channel(rt.chain, me, a["counterparty"], a["class"], a["deposit"], dep_b,
                             a.get("window", C.DEFAULT_CHALLENGE_WINDOW))
    if receipt.ok:
        rt.sessions[receipt.value] = C.ChannelSession(receipt.value, me, rt.keys_of(a["counterparty"]),
                                                      a["deposit"], dep_b)
    return receipt


@verb("channel_deposit", "channel", "", "payment_channel", "open_channel")
def _channel_deposit(rt, me, a):
    return C.deposit(rt.chain, me, a["channel"])


@verb("channel.pay", "channel amount", "", "payment_channel", "make_update")
def _channel_pay(rt, me, a):
    return Offchain(rt.sessions[a["channel"]].pay(me.address, a["amount"]).seq)


@verb("channel.update", "channel seq balance_a balance_b", "", "payment_channel", "make_update")
def _channel_update(rt, me, a):
    return Offchain(rt.sessions[a["channel"]].make_update(a["seq"], a["balance_a"], a["balance_b"]).seq)


def _update_arg(rt, a) -> C.ChannelUpdate:
    session = rt.sessions[a["channel"]]
    return session.update(a["seq"]) if "seq" in a else session.latest


@verb("cooperative_settle", "channel", "seq", "payment_channel", "cooperative_settle")
def _coop(rt, me, a):
    return C.cooperative_settle(rt.chain, me, a["channel"], _update_arg(rt, a))


@verb("dispute", "channel", "seq", "payment_channel", "dispute_settle")
def _dispute(rt, me, a):
    return C.dispute(rt.chain, me, a["channel"], _update_arg(rt, a))


@verb("challenge", "channel", "seq", "payment_channel", "dispute_settle")
def _challenge(rt, me, a):
    return C.challenge(rt.chain, me, a["channel"], _update_arg(rt, a))


@verb("finalize", "channel", "", "payment_channel", "dispute_settle")
def _finalize(rt, me, a):
    return C.finalize(rt.chain, me, a["channel"])


def _hash_lock(a: dict) -> bytes:
    if "hash_lock" in a:
        return a["hash_lock"]
    return sha256(a["secret"])


@verb("htlc_open", "timeout counterparty class_a class_b", "secret hash_lock amount_a token_a amount_b token_b",
      "token_swap", "htlc_open")
def _htlc_open(rt, me, a):
    def leg(owner, suffix):
        token = a.get(f"token_{suffix}")
        return C.Leg(owner, a[f"class_{suffix}"], a.get(f"amount_{suffix}"), None if token is None else str(token))
    return C.htlc_open(rt.chain, me, _hash_lock(a), a["timeout"], leg(me.address, "a"),
                       leg(a["counterparty"], "b"))


@verb("htlc_fund", "htlc", "leg", "token_swap", "htlc_open")
def _htlc_fund(rt, me, a):
    return C.htlc_fund(rt.chain, me, a["htlc"], str(a.get("leg", "a")))


@verb("htlc_claim", "htlc preimage", "", "token_swap", "htlc_claim")
def _htlc_claim(rt, me, a):
    return C.htlc_claim(rt.chain, me, a["htlc"], a["preimage"])


@verb("htlc_refund", "htlc", "", "token_swap", "htlc_refund")
def _htlc_refund(rt, me, a):
    return C.htlc_refund(rt.chain, me, a["htlc"])


@verb("chain_open", "payers payees classes amounts base_timeout decrement", "secret hash_lock", "token_swap",
      "chain_open")
def _chain_open(rt, me, a):
    if not len(a["payers"]) == len(a["payees"]) == len(a["classes"]) == len(a["amounts"]):
        raise errors.BadArguments("hop lists differ in length")
    hops = [C.Hop(p, q, c, n) for p, q, c, n in zip(a["payers"], a["payees"], a["classes"], a["amounts"])]
    return C.chain_open(rt.chain, me, _hash_lock(a), hops, a["base_timeout"], a["decrement"])


@verb("chain_hop", "chain index", "", "token_swap", "chain_open")
def _chain_hop(rt, me, a):
    return Offchain(rt.chain.get(a["chain"], C.HtlcChain).hops[a["index"]])


@verb("chain_propagate", "chain", "withhold", "token_swap", "chain_propagate")
def _chain_propagate(rt, me, a):
    receipts = C.chain_propagate(rt.chain, a["chain"], rt.keys_by_address(), a.get("withhold", []))
    rt.extra_receipts(receipts)
    return Offchain([r.status for r in receipts])


# -- privacy -----------------------------------------------------------------------------------


@verb("stealth.derive", "secret recipient index", "", "stealth_address", "derive_stealth_address next_seed")
def _stealth_derive(rt, me, a):
    return Offchain(P.derive_stealth_address(a["secret"], rt.keys_of(a["recipient"]).public, a["index"]))


@verb("stealth.confirm_transfer", "secret index class transfer", "", "stealth_address")
def _stealth_confirm(rt, me, a):
    return T.confirm_transfer(rt.chain, P.derive_stealth_keys(me, a["secret"], a["index"]), a["class"],
                              a["transfer"])


@verb("stealth.scan", "secret max_index", "class", "stealth_address", "scan_for_payments")
def _stealth_scan(rt, me, a):
    found = P.scan_for_payments(me, a["secret"], rt.chain.snapshot(), a["max_index"], a.get("class"))
    return Offchain(sum(p.amount for p in found))


# -- built-ins ---------------------------------------------------------------------------------


def _mine_syntax(line, positional, args, error):
    if args or len(positional) > 1 or (positional and (not isinstance(positional[0], int)
                                                       or isinstance(positional[0], bool) or positional[0] < 0)):
        raise error(line, "expected 'mine [k]' with k a non-negative integer")


EXPECT_QUERIES = {
    "status": "", "reason": "", "value": "", "height": "",
    "balance": "class of", "spendable": "class of", "owner": "class token", "state": "class token",
    "supply": "class field", "conserved": "class", "allowance": "class owner spender", "native": "of",
    "escrow": "escrow", "htlc": "htlc", "channel": "channel field", "authorized": "multisig payload",
    "oracle": "feed key", "consumer": "consumer key", "credential": "credential", "events": "name",
    "var": "name",
}


@dataclass(frozen=True)
class _Builtin(Verb):
    syntax: Callable | None = field(default=None)

    def check_syntax(self, line, positional, args, error):
        self.syntax(line, positional, args, error)


def _expect_syntax(line, positional, args, error):
    if len(positional) != 1 or not isinstance(positional[0], str) or positional[0] not in EXPECT_QUERIES:
        raise error(line, f"expect needs one query from {sorted(EXPECT_QUERIES)}")
    if "equals" not in args:
        raise error(line, "expect needs equals=")
    allowed = set(EXPECT_QUERIES[positional[0]].split()) | {"equals", "emitter"}
    if positional[0] == "owner" or positional[0] == "state":
        allowed |= {"token"}
    if not set(args) <= allowed:
        raise error(line, f"expect {positional[0]} does not take {sorted(set(args) - allowed)}")
    missing = set(EXPECT_QUERIES[positional[0]].split()) - set(args)
    if missing and positional[0] != "events":
        raise error(line, f"expect {positional[0]} is missing {sorted(missing)}")


BUILTINS["mine"] = _Builtin("mine", None, operations=("mine_block",), max_positional=1, syntax=_mine_syntax)
BUILTINS["expect"] = _Builtin("expect", None, operations=("query_events",), max_positional=1,
                              syntax=_expect_syntax)

PATTERNS = (
    "token_template", "token_registry", "policy_contract", "burned_token", "seller_credential", "escrow",
    "payment_channel", "stealth_address", "oracle", "multisig", "token_swap", "authorised_spender",
)

OPERATIONS = (
    "create_account", "submit_tx", "mine_block", "query_events",
    "spawn_token_class", "mint", "request_transfer", "confirm_transfer", "reject_transfer", "forced_transfer",
    "burn", "balance_of",
    "deploy_policy", "attach_policy", "validate_policy", "issue_credential", "revoke_credential",
    "verify_credential", "approve", "transfer_from",
    "open_escrow", "fund_escrow", "claim_escrow", "multisig_sign", "multisig_update_pool", "oracle_push",
    "oracle_request", "oracle_read",
    "open_channel", "make_update", "cooperative_settle", "dispute_settle", "htlc_open", "htlc_claim",
    "htlc_refund", "chain_open", "chain_propagate",
    "derive_stealth_address", "next_seed", "scan_for_payments",
    "parse_scenario", "run_scenario", "cli",
)
