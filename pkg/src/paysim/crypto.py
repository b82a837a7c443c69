"""Keys, signatures and addresses.

Ordinary accounts use Ed25519 through ``cryptography``. Stealth accounts need
one operation the library does not expose, adding a tweak to a public key,
so the small amount of Edwards-curve arithmetic required for that lives here.
Signatures made with a tweaked scalar are plain Ed25519 signatures and are
verified by the same code path as every other signature.
"""

from __future__ import annotations

import functools
import hashlib
from dataclasses import dataclass, field
from typing import NewType

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from .encoding import sha256

Address = NewType("Address", bytes)

ADDRESS_SIZE = 32
ZERO_ADDRESS = Address(bytes(ADDRESS_SIZE))

# curve25519 / Ed25519 parameters
_P = 2**255 - 19
_L = 2**252 + 27742317777372353535851937790883648493
_D = -121665 * pow(121666, -1, _P) % _P
_SQRT_M1 = pow(2, (_P - 1) // 4, _P)


def address_of(public_key: bytes) -> Address:
    return Address(sha256(public_key))


def hexaddr(address: bytes) -> str:
    return address.hex()


def short(address: bytes) -> str:
    return address.hex()[:8]


# -- Edwards point arithmetic (extended coordinates) -------------------------


def _pt_add(p1, p2):
    x1, y1, z1, t1 = p1
    x2, y2, z2, t2 = p2
    a = (y1 - x1) * (y2 - x2) % _P
    b = (y1 + x1) * (y2 + x2) % _P
    c = 2 * t1 * t2 * _D % _P
    d = 2 * z1 * z2 % _P
    e, f, g, h = b - a, d - c, d + c, b + a
    return (e * f % _P, g * h % _P, f * g % _P, e * h % _P)


def _pt_mul(s: int, pt):
    q = (0, 1, 1, 0)
    while s > 0:
        if s & 1:
            q = _pt_add(q, pt)
        pt = _pt_add(pt, pt)
        s >>= 1
    return q


def _recover_x(y: int, sign: int) -> int | None:
    if y >= _P:
        return None
    x2 = (y * y - 1) * pow(_D * y * y + 1, -1, _P) % _P
    if x2 == 0:
        return None if sign else 0
    x = pow(x2, (_P + 3) // 8, _P)
    if (x * x - x2) % _P != 0:
        x = x * _SQRT_M1 % _P
    if (x * x - x2) % _P != 0:
        return None
    if (x & 1) != sign:
        x = _P - x
    return x


_BY = 4 * pow(5, -1, _P) % _P
_BASE = (_recover_x(_BY, 0), _BY, 1, _recover_x(_BY, 0) * _BY % _P)


def _pt_encode(pt) -> bytes:
    x, y, z, _ = pt
    zinv = pow(z, -1, _P)
    x, y = x * zinv % _P, y * zinv % _P
    return int.to_bytes(y | ((x & 1) << 255), 32, "little")


def _pt_decode(data: bytes):
    if len(data) != 32:
        raise ValueError("point must be 32 bytes")
    y = int.from_bytes(data, "little")
    sign = y >> 255
    y &= (1 << 255) - 1
    x = _recover_x(y, sign)
    if x is None:
        raise ValueError("not a curve point")
    return (x, y, 1, x * y % _P)


def _expand_seed(seed: bytes) -> tuple[int, bytes]:
    h = hashlib.sha512(seed).digest()
    a = int.from_bytes(h[:32], "little")
    a &= (1 << 254) - 8
    a |= 1 << 254
    return a, h[32:]


def _scalar(data: bytes) -> int:
    return int.from_bytes(hashlib.sha512(data).digest(), "little") % _L


def tweak_public_key(public_key: bytes, tweak: int) -> bytes:
    """Return ``public_key + tweak * B`` as an encoded Ed25519 point."""
    return _pt_encode(_pt_add(_pt_decode(public_key), _pt_mul(tweak % _L, _BASE)))


def tweak_scalar(seed: bytes, tweak: int) -> int:
    """The private scalar matching :func:`tweak_public_key` for a seed-derived key."""
    a, _ = _expand_seed(seed)
    return (a + tweak) % _L


def hash_to_scalar(*chunks: bytes) -> int:
    return _scalar(b"".join(chunks))


# -- key pairs ----------------------------------------------------------------


@functools.lru_cache(maxsize=4096)
def _public_key_obj(public_key: bytes) -> Ed25519PublicKey:
    return Ed25519PublicKey.from_public_bytes(public_key)


def verify(public_key: bytes, signature: bytes, message: bytes) -> bool:
    try:
        _public_key_obj(bytes(public_key)).verify(bytes(signature), bytes(message))
    except (InvalidSignature, ValueError):
        return False
    return True


@dataclass(frozen=True)
class KeyPair:
    """Ed25519 key pair generated deterministically from a 32-byte seed."""

    private: bytes = field(repr=False)
    public: bytes
    address: Address

    @classmethod
    def from_seed(cls, seed: bytes) -> "KeyPair":
        if len(seed) != 32:
            raise ValueError("seed must be 32 bytes")
        pub = (
            Ed25519PrivateKey.from_private_bytes(seed)
            .public_key()
            .public_bytes(Encoding.Raw, PublicFormat.Raw)
        )
        return cls(bytes(seed), pub, address_of(pub))

    def sign(self, message: bytes) -> bytes:
        return _private_key_obj(self.private).sign(message)


@functools.lru_cache(maxsize=4096)
def _private_key_obj(seed: bytes) -> Ed25519PrivateKey:
    return Ed25519PrivateKey.from_private_bytes(seed)


@dataclass(frozen=True)
class ScalarKeyPair:
    """Key pair held as a raw scalar, as produced by additive key tweaking.

    Signs with the deterministic Ed25519 construction, deriving the nonce
    prefix from the scalar itself.
    """

    scalar: int = field(repr=False)
    public: bytes
    address: Address

    @classmethod
    def from_scalar(cls, scalar: int) -> "ScalarKeyPair":
        scalar %= _L
        pub = _pt_encode(_pt_mul(scalar, _BASE))
        return cls(scalar, pub, address_of(pub))

    def sign(self, message: bytes) -> bytes:
        prefix = hashlib.sha512(b"paysim/scalar-nonce" + self.scalar.to_bytes(32, "little")).digest()[32:]
        r = _scalar(prefix + message)
        big_r = _pt_encode(_pt_mul(r, _BASE))
        k = _scalar(big_r + self.public + message)
        s = (r + k * self.scalar) % _L
        return big_r + s.to_bytes(32, "little")
