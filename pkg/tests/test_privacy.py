import dataclasses
import random

from hypothesis import given, settings, strategies as st

from paysim import privacy as P
from paysim import tokens as T
from paysim.crypto import address_of
from paysim.ledger import Transaction

SECRET = b"s" * 32


def test_derivation_deterministic(world):
    root = world.recipient
    assert P.derive_stealth_address(SECRET, root.public, 3) == P.derive_stealth_address(SECRET, root.public, 3)
    assert P.derive_addresses(SECRET, root.public, 4)[3] == P.derive_stealth_address(SECRET, root.public, 3)


def test_hundred_distinct_addresses(world):
    root = world.recipient
    addrs = P.derive_addresses(SECRET, root.public, 100)
    assert len(set(addrs)) == 100 and root.address not in addrs


def test_seed_chain_has_no_repeats():
    seen, seed = set(), bytes(32)
    for _ in range(1000):
        seen.add(seed)
        seed = P.next_seed(seed)
    assert len(seen) == 1000


@settings(max_examples=10, deadline=None)
@given(st.binary(min_size=1, max_size=40), st.integers(0, 20))
def test_recipient_key_matches_address(secret, index):
    from paysim.crypto import KeyPair
    root = KeyPair.from_seed(b"r" * 32)
    keys = P.derive_stealth_keys(root, secret, index)
    assert keys.address == P.derive_stealth_address(secret, root.public, index)
    assert address_of(keys.public) == keys.address


def _pay(world, cls, secret, index, amount):
    addr = P.derive_stealth_address(secret, world.recipient.public, index)
    T.request_transfer(world.chain, world.alice, cls, addr, amount).raise_for_status()
    return addr


def test_scan_recovers_exact_payments(world, cash):
    world.fund(cash, "alice", 100)
    for i, amt in enumerate([5, 11, 17]):
        _pay(world, cash, SECRET, i, amt)
    found = P.scan_for_payments(world.recipient, SECRET, world.chain.snapshot(), 9)
    assert [(p.index, p.amount) for p in found] == [(0, 5), (1, 11), (2, 17)]
    assert P.scan_for_payments(world.recipient, b"w" * 32, world.chain.snapshot(), 9) == []


def test_gap_limit(world, cash):
    world.fund(cash, "alice", 100)
    _pay(world, cash, SECRET, 5, 9)
    assert P.scan_for_payments(world.recipient, SECRET, world.chain.snapshot(), 3) == []
    assert [p.index for p in P.scan_for_payments(world.recipient, SECRET, world.chain.snapshot(), 5)] == [5]


def test_rejected_payment_is_netted_out(world, cash):
    world.fund(cash, "alice", 100)
    addr = _pay(world, cash, SECRET, 0, 9)
    keys = P.derive_stealth_keys(world.recipient, SECRET, 0)
    tid = T.token_class(world.chain, cash).next_transfer_id - 1
    T.reject_transfer(world.chain, keys, cash, tid).raise_for_status()
    assert P.scan_for_payments(world.recipient, SECRET, world.chain.snapshot(), 2) == []
    assert world.balance(cash, "alice") == 100 and T.balance_of(world.chain, cash, addr) == 0


def test_randomized_scan_oracle(world, cash):
    rng = random.Random(3)
    world.fund(cash, "alice", 10_000)
    expected: dict[int, int] = {}
    for _ in range(25):
        i, amt = rng.randrange(12), rng.randrange(1, 50)
        _pay(world, cash, SECRET, i, amt)
        expected[i] = expected.get(i, 0) + amt
    found = P.scan_for_payments(world.recipient, SECRET, world.chain.snapshot(), 7, class_id=cash)
    assert {p.index: p.amount for p in found} == {i: a for i, a in expected.items() if i <= 7}


def test_recipient_spends_but_sender_cannot(world, cash):
    chain = world.chain
    world.fund(cash, "alice", 100)
    addr = _pay(world, cash, SECRET, 2, 30)
    keys = P.derive_stealth_keys(world.recipient, SECRET, 2)
    tid = T.token_class(chain, cash).next_transfer_id - 1
    T.confirm_transfer(chain, keys, cash, tid).raise_for_status()
    assert T.balance_of(chain, cash, addr) == 30

    stealth_pub = P.derive_stealth_public(SECRET, world.recipient.public, 2)
    tx = Transaction(addr, cash, "request_transfer", {"to": world.alice.address, "amount": 30, "token": None,
                                                      "category": None}, 0, stealth_pub)
    before = chain.serialize()
    assert chain.submit_tx(tx.signed(world.alice)).reason == "BadSignature"
    guessed = P.derive_stealth_keys(world.alice, SECRET, 2)
    assert guessed.address != addr
    assert chain.submit_tx(dataclasses.replace(tx, signature=guessed.sign(tx.signing_bytes()))).reason == \
        "BadSignature"
    assert chain.serialize() == before

    assert T.request_transfer(chain, keys, cash, world.bob.address, 30).ok
