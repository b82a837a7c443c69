"""Genesis: a fresh chain with every system contract installed."""

from __future__ import annotations

from .channels import CHANNEL_FACTORY, ChannelFactory
from .governance import CREDENTIAL_REGISTRY, POLICY_FACTORY, CredentialRegistry, PolicyFactory
from .ledger import Chain
from .settlement import SETTLEMENT_FACTORY, SettlementFactory
from .tokens import TOKEN_FACTORY, TokenFactory


def new_chain() -> Chain:
    chain = Chain()
    chain.install(TokenFactory(address=TOKEN_FACTORY))
    chain.install(PolicyFactory(address=POLICY_FACTORY))
    chain.install(CredentialRegistry(address=CREDENTIAL_REGISTRY))
    chain.install(SettlementFactory(address=SETTLEMENT_FACTORY))
    chain.install(ChannelFactory(address=CHANNEL_FACTORY))
    return chain
