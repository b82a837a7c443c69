"""Execute a scenario against a fresh chain and produce a JSON transcript."""

from __future__ import annotations

import dataclasses
import enum
import json
from typing import Any

from .. import channels as C
from .. import errors
from .. import governance as G
from .. import settlement as S
from .. import tokens as T
from ..crypto import Address, KeyPair
from ..encoding import encode, sha256
from ..ledger import Event, Receipt
from ..world import new_chain
from .dsl import ActorRef, Script, Step, VarRef, parse_scenario, serialize_scenario
from .verbs import BUILTINS, VERBS, Offchain

LIFECYCLE_LABELS = {
    "Issued": "issued",
    "Allocated": "allocated",
    "Minted": "allocated",
    "TransferSettled": "transferred",
    "ForcedTransfer": "transferred",
    "DelegatedTransfer": "transferred",
    "Locked": "locked",
    "Redeemed": "redeemed",
    "Burned": "burned",
}


class RunError(Exception):
    def __init__(self, line: int, message: str, transcript: dict | None = None):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.transcript = transcript


class ExpectationFailed(RunError):
    def __init__(self, line: int, step: int, query: str, expected: Any, actual: Any, transcript: dict):
        super().__init__(line, f"expect {query}: expected {expected!r}, got {actual!r}", transcript)
        self.step = step
        self.expected = expected
        self.actual = actual


def to_json(value: Any) -> Any:
    """Plain JSON form used for transcripts and for comparing expectations."""
    if value is None or isinstance(value, (bool, int, str)):
        return value.value if isinstance(value, enum.Enum) else value
    if isinstance(value, enum.Enum):
        return to_json(value.value)
    if isinstance(value, (bytes, bytearray)):
        return "0x" + bytes(value).hex()
    if isinstance(value, (list, tuple)):
        return [to_json(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted((to_json(v) for v in value), key=lambda v: json.dumps(v, sort_keys=True))
    if isinstance(value, dict):
        return {str(to_json(k)): to_json(v) for k, v in value.items()}
    if isinstance(value, Event):
        return {"height": value.height, "index": value.index, "emitter": to_json(value.emitter),
                "name": value.name, "payload": to_json(value.payload)}
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        out = {"type": type(value).__name__}
        out.update({f.name: to_json(getattr(value, f.name)) for f in dataclasses.fields(value)})
        return out
    raise TypeError(f"cannot render {type(value).__name__}")


def actor_seed(seed: int, name: str) -> bytes:
    return sha256(encode(["paysim/actor", seed, name]))


class Runtime:
    """Mutable state of one scenario run, handed to verb handlers."""

    NATIVE_ENDOWMENT = 1000

    def __init__(self, seed: int, actors: list[str]):
        self.chain = new_chain()
        self.actors: dict[str, KeyPair] = {
            name: self.chain.create_account(actor_seed(seed, name), self.NATIVE_ENDOWMENT) for name in actors
        }
        self._by_address = {k.address: k for k in self.actors.values()}
        self.vars: dict[str, Any] = {}
        self.sessions: dict[Address, C.ChannelSession] = {}
        self.wallets: dict[Address, list[G.Credential]] = {}
        self._extra: list[Receipt] = []

    def keys_of(self, address: Address) -> KeyPair:
        try:
            return self._by_address[address]
        except KeyError:
            raise errors.UnknownTarget("no actor holds that address") from None

    def keys_by_address(self) -> dict[Address, KeyPair]:
        return dict(self._by_address)

    def wallet(self, address: Address) -> list[G.Credential]:
        return self.wallets.setdefault(address, [])

    def extra_receipts(self, receipts: list[Receipt]) -> None:
        self._extra.extend(receipts)

    def resolve(self, value: Any, line: int) -> Any:
        if isinstance(value, ActorRef):
            return self.actors[value.name].address
        if isinstance(value, VarRef):
            if value.name not in self.vars:
                raise RunError(line, f"${value.name} is not bound")
            return self.vars[value.name]
        if isinstance(value, list):
            return [self.resolve(v, line) for v in value]
        return value


def _query(rt: Runtime, query: str, a: dict) -> Any:
    chain = rt.chain
    if query == "height":
        return chain.height
    if query in ("balance", "spendable"):
        cls = T.token_class(chain, a["class"])
        return cls.balance_of(a["of"]) if query == "balance" else cls.spendable_of(a["of"])
    if query == "owner":
        return T.owner_of(chain, a["class"], str(a["token"]))
    if query == "state":
        return T.token_class(chain, a["class"]).state_of(str(a["token"]))
    if query == "supply":
        return getattr(T.token_class(chain, a["class"]).supply(), str(a["field"]))
    if query == "conserved":
        return T.token_class(chain, a["class"]).supply().conserved
    if query == "allowance":
        return T.token_class(chain, a["class"]).allowance(a["owner"], a["spender"])
    if query == "native":
        return chain.native_balance(a["of"])
    if query == "escrow":
        return chain.get(a["escrow"], S.Escrow).state
    if query == "htlc":
        return chain.get(a["htlc"], C.Htlc).state
    if query == "channel":
        return getattr(chain.get(a["channel"], C.Channel), str(a["field"]))
    if query == "authorized":
        payload = a["payload"]
        if isinstance(chain.contracts.get(payload), S.Escrow):
            payload = S.release_payload(payload)
        return chain.get(a["multisig"], S.Multisig).is_authorized(payload)
    if query == "oracle":
        try:
            return S.oracle_read(chain, a["feed"], str(a["key"]))[0]
        except errors.NotAvailable:
            return "unavailable"
    if query == "consumer":
        try:
            return chain.get(a["consumer"], S.OracleConsumer).latest(str(a["key"]))
        except errors.NotAvailable:
            return "unavailable"
    if query == "credential":
        return "pass" if G.verify_credential(chain, a["credential"]).ok else "fail"
    if query == "events":
        return len(chain.query_events(emitter=a.get("emitter"), name=a.get("name")))
    if query == "var":
        return rt.vars.get(str(a["name"]))
    raise KeyError(query)


def _receipt_record(receipt: Receipt) -> dict:
    return {
        "status": receipt.status,
        "reason": receipt.reason,
        "value": to_json(receipt.value),
        "fee": receipt.fee,
        "events": [to_json(e) for e in receipt.events],
    }


def run_scenario(source: Script | str, seed: int | None = None) -> dict:
    """Run a script on a fresh chain. Raises :class:`ExpectationFailed` when an
    ``expect`` step does not hold; the partial transcript rides on the error."""
    if isinstance(source, Script):
        script, text = source, serialize_scenario(source)
    else:
        script, text = parse_scenario(source), source
    seed = script.seed if seed is None else seed
    rt = Runtime(seed, script.actors)
    transcript: dict[str, Any] = {
        "header": {
            "description": script.description,
            "seed": seed,
            "script": text,
            "actors": {name: to_json(k.address) for name, k in rt.actors.items()},
        },
        "steps": [],
    }
    last: dict | None = None
    for index, step in enumerate(script.steps):
        record = {"index": index, "line": step.line, "actor": step.actor, "verb": step.verb}
        transcript["steps"].append(record)
        if step.verb == "mine":
            rt.chain.mine(step.positional[0] if step.positional else 1)
            record.update(height=rt.chain.height, status="mine", reason=None, value=rt.chain.height, events=[])
            continue
        args = {k: rt.resolve(v, step.line) for k, v in step.args.items()}
        if step.verb == "expect":
            query = step.positional[0]
            expected = args.pop("equals")
            if query in ("status", "reason", "value"):
                if last is None:
                    raise RunError(step.line, f"expect {query} with no prior step", transcript)
                actual = last[query]
            else:
                try:
                    actual = _query(rt, query, args)
                except errors.LedgerError as exc:
                    actual = exc.reason
            record.update(height=rt.chain.height, status="expect", reason=None, value=to_json(actual), events=[])
            if to_json(actual) != to_json(expected):
                record["status"] = "failed"
                transcript["final_digest"] = rt.chain.digest()
                raise ExpectationFailed(step.line, index, query, to_json(expected), to_json(actual), transcript)
            continue
        record.update(_execute(rt, step, args))
        if step.bind and record.pop("_bind_ok"):
            rt.vars[step.bind] = record.pop("_bind")
        else:
            record.pop("_bind", None)
            record.pop("_bind_ok", None)
        last = record
    transcript["final_digest"] = rt.chain.digest()
    return transcript


def _execute(rt: Runtime, step: Step, args: dict) -> dict:
    height = rt.chain.height
    rt._extra = []
    try:
        result = VERBS[step.verb].handler(rt, rt.actors[step.actor], args)
    except errors.LedgerError as exc:
        return {"height": height, "status": "rejected", "reason": exc.reason, "value": None, "fee": 0,
                "events": [], "_bind": None, "_bind_ok": False}
    except (KeyError, ValueError, TypeError) as exc:
        raise RunError(step.line, f"{step.verb}: {exc!r}") from None
    bind_value: Any = None
    if isinstance(result, tuple):
        result, bind_value = result
    elif isinstance(result, Receipt):
        bind_value = result.value
    if isinstance(result, Offchain):
        out = {"status": "offchain", "reason": None, "value": to_json(result.value), "fee": 0, "events": []}
        if rt._extra:
            out["receipts"] = [_receipt_record(r) for r in rt._extra]
        ok = True
        bind_value = result.value
    else:
        out = _receipt_record(result)
        ok = result.ok
    out["height"] = height
    out["_bind"], out["_bind_ok"] = bind_value, ok
    return out


def render_transcript(transcript: dict) -> str:
    return json.dumps(transcript, sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def render_text(transcript: dict) -> str:
    lines = [f"# {transcript['header']['description']} (seed {transcript['header']['seed']})"]
    for s in transcript["steps"]:
        head = f"{s['actor']}.{s['verb']}" if s["actor"] else s["verb"]
        tail = f" {s['reason']}" if s.get("reason") else ""
        lines.append(f"[{s['index']:3d}] h={s['height']:<4d} {head:<36s} {s['status']}{tail}")
    lines.append(f"final_digest {transcript['final_digest']}")
    return "\n".join(lines) + "\n"


def token_lifecycle(transcript: dict, class_id: str, token: str) -> list[str]:
    """Ordered lifecycle labels one voucher passed through, read from transcript events."""
    labels = []
    for step in transcript["steps"]:
        for ev in step.get("events", []):
            if ev["emitter"] == class_id and ev["payload"].get("token") == token and ev["name"] in LIFECYCLE_LABELS:
                labels.append(LIFECYCLE_LABELS[ev["name"]])
    return labels


def operations_exercised(script: Script) -> set[str]:
    ops = {"parse_scenario", "run_scenario"}
    if script.actors:
        ops.add("create_account")
    for step in script.steps:
        spec = BUILTINS.get(step.verb) or VERBS[step.verb]
        ops.update(spec.operations)
        if step.actor is not None and not step.verb.startswith(("channel.", "stealth.derive", "stealth.scan")):
            ops.add("submit_tx")
    return ops


def patterns_exercised(script: Script) -> set[str]:
    return {p for step in script.steps if step.verb in VERBS for p in VERBS[step.verb].patterns}
