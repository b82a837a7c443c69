import pytest

from paysim import channels as C
from paysim import errors
from paysim import tokens as T
from paysim.encoding import sha256

from .helpers import contract_key, explore, tx_count


@pytest.fixture
def funded(world, cash):
    world.fund(cash, "alice", 100)
    world.fund(cash, "bob", 50)
    return cash


def _open(world, cash, da=100, db=0, window=3):
    chain = world.chain
    cid = C.open_channel(chain, world.alice, world.bob.address, cash, da, db, window).raise_for_status().value
    if db:
        C.deposit(chain, world.bob, cid).raise_for_status()
    return cid, C.ChannelSession(cid, world.alice, world.bob, da, db)


def test_one_way_channel_opens(world, funded):
    cid, _ = _open(world, funded)
    ch = world.chain.contracts[cid]
    assert ch.state is C.ChannelState.OPEN
    assert T.token_class(world.chain, funded).locked_by(cid) == 100


def test_degenerate_zero_deposit(world, funded):
    cid, s = _open(world, funded, 0, 0)
    assert C.cooperative_settle(world.chain, world.alice, cid, s.initial()).ok
    assert world.balance(funded, "alice") == 100


def test_two_sided_deposit_waits_for_b(world, funded):
    chain = world.chain
    cid = C.open_channel(chain, world.alice, world.bob.address, funded, 10, 20).value
    assert chain.contracts[cid].state is C.ChannelState.OPENING
    assert C.deposit(chain, world.alice, cid).reason == "WrongParty"
    C.deposit(chain, world.bob, cid).raise_for_status()
    assert chain.contracts[cid].state is C.ChannelState.OPEN


def test_vouchers_rejected(world):
    v = world.voucher_class()
    assert C.open_channel(world.chain, world.alice, world.bob.address, v, 0).reason == "BadArguments"


def test_update_conservation_and_monotone_seq(world, funded):
    _, s = _open(world, funded)
    assert s.make_update(1, 70, 30).seq == 1
    with pytest.raises(errors.ConservationViolated):
        s.make_update(2, 70, 40)
    with pytest.raises(errors.NonMonotoneSeq):
        s.make_update(1, 60, 40)


def test_micro_payments_are_off_chain(world, funded):
    chain = world.chain
    cid, s = _open(world, funded)
    txs = tx_count(chain)
    for _ in range(50):
        s.pay(world.alice.address, 1)
    assert tx_count(chain) == txs
    C.cooperative_settle(chain, world.bob, cid, s.latest).raise_for_status()
    assert (world.balance(funded, "alice"), world.balance(funded, "bob")) == (50, 100)


def test_settle_identity_and_reuse(world, funded):
    chain = world.chain
    cid, s = _open(world, funded, 100, 50)
    C.cooperative_settle(chain, world.alice, cid, s.initial()).raise_for_status()
    assert (world.balance(funded, "alice"), world.balance(funded, "bob")) == (100, 50)
    assert C.cooperative_settle(chain, world.alice, cid, s.initial()).reason == "WrongState"
    assert C.dispute(chain, world.alice, cid, s.initial()).reason == "WrongState"


def test_settle_seq7(world, funded):
    cid, s = _open(world, funded)
    for i in range(1, 8):
        s.make_update(i, 100 - 10 * i + 0 if i < 7 else 70, 10 * i if i < 7 else 30)
    C.cooperative_settle(world.chain, world.alice, cid, s.update(7)).raise_for_status()
    ch = world.chain.contracts[cid]
    assert (ch.payout_a, ch.payout_b) == (70, 30)


def test_outsider_and_forgery(world, funded):
    chain = world.chain
    cid, s = _open(world, funded)
    u = s.make_update(1, 60, 40)
    assert C.cooperative_settle(chain, world.carol, cid, u).reason == "NotAParty"
    forged = C.ChannelUpdate(cid, 2, 0, 100, u.sig_a, u.sig_b)
    assert C.cooperative_settle(chain, world.bob, cid, forged).reason == "BadSignature"


def test_stale_dispute_loses_to_challenge(world, funded):
    chain = world.chain
    cid, s = _open(world, funded, window=3)
    for i in range(1, 8):
        s.make_update(i, 100 - 5 * i, 5 * i)
    deadline = C.dispute(chain, world.alice, cid, s.update(3)).value
    assert C.finalize(chain, world.alice, cid).reason == "NotExpired"
    chain.mine(deadline - chain.height)
    C.challenge(chain, world.bob, cid, s.update(7)).raise_for_status()
    assert C.challenge(chain, world.alice, cid, s.update(5)).reason == "StaleUpdate"
    chain.mine()
    assert C.challenge(chain, world.bob, cid, s.update(7)).reason == "ChallengeClosed"
    C.finalize(chain, world.carol, cid).raise_for_status()
    assert (world.balance(funded, "alice"), world.balance(funded, "bob")) == (65, 85)


def test_dispute_orderings_enumerated(world, funded):
    """Every schedule of up to five dispute/challenge/mine/finalize steps:
    once closed, payouts follow the highest accepted sequence number."""
    chain = world.chain
    cid, s = _open(world, funded, 100, 50, window=1)
    ups = {0: s.initial(), 2: s.make_update(2, 40, 110), 3: s.make_update(3, 130, 20)}
    actions = [("dispute", q) for q in ups] + [("challenge", q) for q in ups] + [("mine", None), ("finalize", None)]

    def step(state, action):
        c, best = state
        c = c.fork()
        kind, q = action
        if kind == "mine":
            c.mine()
            return c, best
        if kind == "finalize":
            C.finalize(c, world.alice, cid)
            return c, best
        fn = C.dispute if kind == "dispute" else C.challenge
        ch = c.contracts[cid]
        was, deadline = ch.state, ch.challenge_deadline
        r = fn(c, world.alice if kind == "dispute" else world.bob, cid, ups[q])
        if kind == "dispute":
            assert r.ok == (was is C.ChannelState.OPEN)
        elif was is C.ChannelState.SETTLING and c.height <= deadline:
            assert r.ok == (q > best)
        if r.ok:
            best = q
        return c, best

    closed = []

    def visit(state):
        c, best = state
        ch = c.contracts[cid]
        total = T.balance_of(c, funded, world.alice.address) + T.balance_of(c, funded, world.bob.address)
        assert total + T.token_class(c, funded).locked_by(cid) == 150
        if ch.state is C.ChannelState.CLOSED:
            closed.append(best)
            assert (ch.payout_a, ch.payout_b) == (ups[best].balance_a, ups[best].balance_b)
            assert T.balance_of(c, funded, world.alice.address) == ups[best].balance_a

    n = explore((chain, -1), lambda st: actions, step, lambda st: contract_key(st[0], st[1]), visit, 5)
    assert n > 50 and set(closed) == {0, 2, 3}


# -- HTLC ---------------------------------------------------------------------------


SECRET = b"open sesame"
LOCK = sha256(SECRET)


@pytest.fixture
def swap(world, funded):
    chain = world.chain
    other = world.cash_class(issuer="issuer2")
    world.fund(other, "bob", 7, issuer="issuer2")
    legs = C.Leg(world.alice.address, funded, 20), C.Leg(world.bob.address, other, 7)
    hid = C.htlc_open(chain, world.alice, LOCK, chain.height + 5, *legs).raise_for_status().value
    return hid, other


def test_swap_atomic(world, funded, swap):
    chain = world.chain
    hid, other = swap
    C.htlc_fund(chain, world.alice, hid, "a").raise_for_status()
    assert C.htlc_claim(chain, world.bob, hid, SECRET).reason == "BothLegsRequired"
    assert C.htlc_fund(chain, world.alice, hid, "b").reason == "WrongParty"
    C.htlc_fund(chain, world.bob, hid, "b").raise_for_status()
    before = chain.serialize()
    assert C.htlc_claim(chain, world.bob, hid, b"nope").reason == "BadPreimage"
    assert chain.contracts[hid].state is C.HtlcState.OPEN
    r = C.htlc_claim(chain, world.bob, hid, SECRET)
    assert r.ok and [e.name for e in r.events].count("Unlocked") == 2
    assert world.balance(funded, "bob") == 70 and world.balance(other, "alice") == 7
    assert C.observed_preimage(chain, LOCK) == SECRET
    assert C.htlc_refund(chain, world.alice, hid).reason == "WrongState"
    assert before != chain.serialize()


def test_refund_boundary_and_partial(world, funded, swap):
    chain = world.chain
    hid, other = swap
    C.htlc_fund(chain, world.alice, hid, "a").raise_for_status()
    chain.mine(5)
    assert chain.height == chain.contracts[hid].timeout
    assert C.htlc_refund(chain, world.alice, hid).reason == "NotExpired"
    chain.mine()
    assert C.htlc_fund(chain, world.bob, hid, "b").reason == "Expired"
    r = C.htlc_refund(chain, world.bob, hid)
    assert r.ok and r.events[-1].payload["legs"] == ("a",)
    assert world.balance(funded, "alice") == 100 and world.balance(other, "bob") == 7


def test_chain_open_validation(world, funded):
    hop = C.Hop(world.alice.address, world.bob.address, funded, 1)
    assert C.chain_open(world.chain, world.alice, LOCK, [hop, hop], 10, 0).reason == "TimeoutOrderingViolated"
    assert C.chain_open(world.chain, world.alice, LOCK, [hop, hop, hop], 4, 2).reason == "TimeoutOrderingViolated"
    cid = C.chain_open(world.chain, world.alice, LOCK, [hop, hop, hop], 20, 3).raise_for_status().value
    timeouts = [world.chain.contracts[h].timeout for h in world.chain.contracts[cid].hops]
    assert timeouts == [20, 17, 14]
