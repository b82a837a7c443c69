import dataclasses
import random
from dataclasses import dataclass, field

import pytest
from hypothesis import given, settings, strategies as st

from paysim import errors
from paysim.crypto import KeyPair
from paysim.ledger import Chain, Context, Contract, Transaction, external, internal, system_address


@dataclass(kw_only=True)
class Counter(Contract):
    kind = "counter"
    value: int = 0
    log: list[int] = field(default_factory=list)

    @external
    def bump(self, ctx: Context, by: int = 1) -> int:
        self.value += by
        self.log.append(by)
        ctx.emit("Bumped", by=by)
        return self.value

    @external
    def bump_then_fail(self, ctx: Context, by: int) -> None:
        self.value += by
        self.log.append(by)
        ctx.emit("Bumped", by=by)
        ctx.call(self.address, "poke")
        raise errors.NotAuthorized("fails after writing")

    @external
    def spawn_and_fail(self, ctx: Context) -> None:
        ctx.deploy(Counter)
        raise errors.BadArguments("no")

    @external
    def crash(self, ctx: Context) -> None:
        self.value = -1
        raise ZeroDivisionError

    @internal
    def poke(self, ctx: Context) -> None:
        self.log.append(0)


COUNTER = system_address("counter")


@pytest.fixture
def chain():
    c = Chain()
    c.install(Counter(address=COUNTER))
    return c


@pytest.fixture
def alice(chain):
    return chain.create_account(b"a" * 32, native_balance=100)


def test_create_account_idempotent(chain):
    k1 = chain.create_account(bytes(32))
    k2 = chain.create_account(bytes(32))
    assert k1 == k2
    assert chain.nonce_of(k1.address) == 0
    assert chain.native_balance(k1.address) == 0


def test_success_bumps_nonce_and_fee(chain, alice):
    r = chain.send(alice, COUNTER, "bump", by=3)
    assert r.ok and r.value == 3 and r.fee == 1
    assert chain.nonce_of(alice.address) == 1
    assert chain.accounts[alice.address].fees_paid == 1
    assert [e.name for e in r.events] == ["Bumped"]


def test_replay_rejected_with_bad_nonce(chain, alice):
    tx = chain.build_tx(alice, COUNTER, "bump", by=1)
    assert chain.submit_tx(tx).ok
    before = chain.serialize()
    r = chain.submit_tx(tx)
    assert r.status == "rejected" and r.reason == "BadNonce"
    assert chain.serialize() == before


def test_bad_signature_and_unknown_target(chain, alice):
    mallory = chain.create_account(b"m" * 32)
    tx = chain.build_tx(alice, COUNTER, "bump")
    forged = dataclasses.replace(tx, signature=mallory.sign(tx.signing_bytes()))
    before = chain.serialize()
    assert chain.submit_tx(forged).reason == "BadSignature"
    spoofed = dataclasses.replace(tx, public_key=mallory.public).signed(mallory)
    assert chain.submit_tx(spoofed).reason == "BadSignature"
    assert chain.send(alice, b"\x09" * 32, "bump").reason == "UnknownTarget"
    assert chain.send(alice, COUNTER, "nope").reason == "UnknownMethod"
    assert chain.send(alice, COUNTER, "poke").reason == "UnknownMethod"
    assert chain.serialize() == before


def test_execution_failure_rolls_back_everything_but_nonce(chain, alice):
    chain.send(alice, COUNTER, "bump", by=5)
    contracts_before = chain.contracts[COUNTER]
    snapshot = dataclasses.replace(contracts_before, log=list(contracts_before.log))
    events_before = len(chain.events)
    r = chain.send(alice, COUNTER, "bump_then_fail", by=7)
    assert r.status == "rejected" and r.reason == "NotAuthorized" and r.fee == 1
    assert chain.contracts[COUNTER] == snapshot
    assert len(chain.events) == events_before
    assert chain.nonce_of(alice.address) == 2


def test_rolled_back_deploy_frees_instance(chain, alice):
    n = len(chain.contracts)
    counter = chain.instance_counter
    assert chain.send(alice, COUNTER, "spawn_and_fail").reason == "BadArguments"
    assert len(chain.contracts) == n and chain.instance_counter == counter


def test_bad_arguments(chain, alice):
    assert chain.send(alice, COUNTER, "bump", wrong=1).reason == "BadArguments"


def test_programming_errors_propagate_after_rollback(chain, alice):
    with pytest.raises(ZeroDivisionError):
        chain.send(alice, COUNTER, "crash")
    assert chain.contracts[COUNTER].value == 0


def test_native_transfer(chain, alice):
    bob = chain.create_account(b"b" * 32)
    assert chain.send(alice, bob.address, "transfer", amount=40).ok
    assert chain.native_balance(bob.address) == 40
    assert chain.native_balance(alice.address) == 60
    r = chain.send(alice, bob.address, "transfer", amount=61)
    assert r.reason == "InsufficientBalance"
    assert chain.native_balance(alice.address) == 60


def test_mine_block(chain):
    assert chain.height == 0
    assert chain.mine_block() == 1
    assert chain.mine(4) == 5
    assert [b.number for b in chain.blocks] == [0, 1, 2, 3, 4]
    assert chain.blocks[1].parent == chain.blocks[0].hash


def test_query_events_height_window(chain, alice):
    assert chain.query_events() == []
    chain.mine(3)
    chain.send(alice, COUNTER, "bump")
    chain.mine()
    chain.send(alice, COUNTER, "bump", by=2)
    hits = chain.query_events(start=3, end=3)
    assert [e.payload["by"] for e in hits] == [1]
    assert [e.height for e in chain.query_events(name="Bumped")] == [3, 4]
    assert chain.query_events(by=2)[0].height == 4


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=1, max_size=25))
def test_per_emitter_logs_partition_full_log(emitters):
    chain = Chain()
    addrs = [system_address(f"c{i}") for i in range(3)]
    for a in addrs:
        chain.install(Counter(address=a))
    k = chain.create_account(b"k" * 32)
    for i, e in enumerate(emitters):
        chain.send(k, addrs[e], "bump", by=i)
        if i % 4 == 3:
            chain.mine()
    merged = sorted((ev for a in addrs for ev in chain.query_events(emitter=a)), key=lambda ev: ev.index)
    assert merged == chain.query_events()
    assert [ev.index for ev in chain.events] == list(range(len(chain.events)))


def _replay(ops, seed):
    chain = Chain()
    chain.install(Counter(address=COUNTER))
    keys = [chain.create_account(bytes([seed, i]) * 16) for i in range(3)]
    for who, op in ops:
        if op == "mine":
            chain.mine()
        else:
            chain.send(keys[who], COUNTER, op, by=who + 1)
    return chain


def test_determinism_and_monotone_time():
    rng = random.Random(5)
    ops = [(rng.randrange(3), rng.choice(["bump", "bump_then_fail", "mine"])) for _ in range(60)]
    a, b = _replay(ops, 1), _replay(ops, 1)
    assert a.serialize() == b.serialize() and a.digest() == b.digest()
    assert _replay(ops, 2).digest() != a.digest()
    heights = [ev.height for ev in a.events]
    assert heights == sorted(heights)


def test_snapshot_is_read_only(chain, alice):
    chain.send(alice, COUNTER, "bump")
    snap = chain.snapshot()
    assert snap.digest() == chain.digest()
    with pytest.raises(RuntimeError):
        snap.mine_block()
    with pytest.raises(RuntimeError):
        snap.send(alice, COUNTER, "bump")
    chain.send(alice, COUNTER, "bump")
    assert snap.contracts[COUNTER].value == 1


def test_transaction_hash_covers_signature(chain, alice):
    tx = Transaction(alice.address, COUNTER, "bump", {}, 0, alice.public)
    assert tx.signed(alice).hash != tx.hash


def test_address_collision_is_fatal(chain):
    k = KeyPair.from_seed(b"z" * 32)
    chain.accounts[k.address] = dataclasses.replace(chain.accounts.get(k.address) or
                                                    __import__("paysim.ledger").ledger.Account(), public_key=b"x" * 32)
    with pytest.raises(RuntimeError):
        chain.create_account(b"z" * 32)
