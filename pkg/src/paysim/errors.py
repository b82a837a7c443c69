"""Ledger and contract errors.

Raising any :class:`LedgerError` inside a contract method reverts the whole
transaction. The receipt records the class name as the rejection reason.
"""


class LedgerError(Exception):
    """Base class. Raised before execution (signature, nonce, target checks)
    the transaction leaves no trace; raised during execution it is reverted
    but the nonce and fee are still charged."""

    @property
    def reason(self) -> str:
        return type(self).__name__


class BadSignature(LedgerError):
    pass


class BadNonce(LedgerError):
    pass


class UnknownTarget(LedgerError):
    pass


class UnknownMethod(LedgerError):
    pass


class ContractError(LedgerError):
    """Raised during execution; the transaction is reverted."""


class BadArguments(ContractError):
    pass


class NotAuthorized(ContractError):
    pass


class ContractDestroyed(ContractError):
    pass


# token_core
class InvalidSpec(ContractError):
    pass


class NotIssuer(ContractError):
    pass


class NotMintable(ContractError):
    pass


class InsufficientBalance(ContractError):
    pass


class PolicyViolation(ContractError):
    pass


class TokenNotSpendable(ContractError):
    pass


class UnknownTransfer(ContractError):
    pass


class NotRecipient(ContractError):
    pass


class NotOwner(ContractError):
    pass


class AlreadyBurned(ContractError):
    pass


class UnknownToken(ContractError):
    pass


class DuplicateToken(ContractError):
    pass


class ClassFrozen(ContractError):
    pass


# governance
class InvalidRule(ContractError):
    pass


class UnknownPolicy(ContractError):
    pass


class UnknownCredential(ContractError):
    pass


class DuplicateCredential(ContractError):
    pass


class AllowanceExceeded(ContractError):
    pass


# settlement
class DeadlineInPast(ContractError):
    pass


class WrongState(ContractError):
    pass


class NotAParty(ContractError):
    pass


class NotASigner(ContractError):
    pass


class InvalidThreshold(ContractError):
    pass


class NotAttestor(ContractError):
    pass


class NoPendingRequest(ContractError):
    pass


class WrongMode(ContractError):
    pass


class NotAvailable(ContractError):
    pass


# channels
class ConservationViolated(ContractError):
    pass


class NonMonotoneSeq(ContractError):
    pass


class StaleUpdate(ContractError):
    pass


class ChallengeClosed(ContractError):
    pass


class WrongParty(ContractError):
    pass


class BadPreimage(ContractError):
    pass


class Expired(ContractError):
    pass


class BothLegsRequired(ContractError):
    pass


class NotExpired(ContractError):
    pass


class TimeoutOrderingViolated(ContractError):
    pass
