"""Shared builders for tests."""

from __future__ import annotations

from dataclasses import dataclass, field

from paysim import tokens as T
from paysim.crypto import KeyPair
from paysim.encoding import sha256
from paysim.ledger import Chain


@dataclass
class World:
    chain: Chain
    _accounts: dict[str, KeyPair] = field(default_factory=dict)

    def __getattr__(self, name: str) -> KeyPair:
        if name.startswith("_"):
            raise AttributeError(name)
        return self.account(name)

    def account(self, name: str) -> KeyPair:
        if name not in self._accounts:
            self._accounts[name] = self.chain.create_account(sha256(b"test-actor/" + name.encode()))
        return self._accounts[name]

    def cash_class(self, supply: int = 0, issuer: str = "issuer", **kw) -> bytes:
        spec = T.TokenClassSpec(name="Cash", symbol="CSH", decimals=2, total_supply=supply, **kw)
        return T.spawn_token_class(self.chain, self.account(issuer), spec).raise_for_status().value

    def voucher_class(self, supply: int = 0, issuer: str = "issuer", **kw) -> bytes:
        spec = T.TokenClassSpec(name="Voucher", symbol="VCH", total_supply=supply, fungibility="voucher", **kw)
        return T.spawn_token_class(self.chain, self.account(issuer), spec).raise_for_status().value

    def fund(self, class_id: bytes, who: str, amount: int, issuer: str = "issuer") -> None:
        T.mint(self.chain, self.account(issuer), class_id, self.account(who).address, amount).raise_for_status()

    def balance(self, class_id: bytes, who: str) -> int:
        return T.balance_of(self.chain, class_id, self.account(who).address)

    def supply(self, class_id: bytes) -> T.Supply:
        return T.token_class(self.chain, class_id).supply()


def explore(root, actions, step, key, visit, depth: int) -> int:
    """Depth-bounded DFS over every schedule from ``root``.

    A state is expanded again only when reached with more depth left than
    before, so the search covers all schedules of length <= ``depth`` while
    visiting each distinct (state, remaining depth) once. ``step`` must not
    mutate its input. Returns the number of distinct states seen.
    """
    seen: dict = {}

    def go(state, left: int) -> None:
        k = key(state)
        if seen.get(k, -1) >= left:
            return
        seen[k] = left
        visit(state)
        if left:
            for action in actions(state):
                go(step(state, action), left - 1)

    go(root, depth)
    return len(seen)


def contract_key(chain: Chain, *extra) -> bytes:
    from paysim.encoding import encode
    return encode([chain.height, chain.contracts, list(extra)])


def tx_count(chain: Chain) -> int:
    """Transactions included on-chain so far, mined or pending."""
    return len(chain._pending) + sum(len(b.tx_hashes) for b in chain.blocks)
