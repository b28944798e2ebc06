"""Prime-order cyclic groups with scalar field arithmetic.

Two named groups are registered:

* ``sg256`` -- the order-q subgroup of squares modulo a 257-bit safe prime
  (q is a 256-bit prime).  This is the production group.
* ``mod23`` -- the order-11 subgroup of the integers modulo 23.  Every value
  in this group is small enough to check by hand, which is what the test
  suite and the golden vectors use.

Exponentiation is NOT constant-time and this module makes no side-channel
claims; it is a protocol study, not production crypto.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field

try:
    from gmpy2 import powmod as _powmod
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    _powmod = pow


class UnknownGroupError(ValueError):
    """Raised for a group_id that is not in the registry."""


class ElementDecodeError(ValueError):
    """Raised when bytes do not decode to a canonical subgroup element."""


# 256-bit prime q with p = 2q + 1 also prime; the group is the subgroup of
# squares mod p, which has order exactly q.
_SG256_Q = 0xC0DE00000000000000000000000000000000000000000000000000000001B5D5
_SG256_P = 2 * _SG256_Q + 1
_SG256_G = 4  # 2^2, a square, hence a generator of the order-q subgroup

# Tiny hand-checkable group: squares mod 23 form the order-11 subgroup.
_MOD23_P = 23
_MOD23_Q = 11
_MOD23_G = 4

PROD_GROUP_ID = "sg256"
TEST_GROUP_ID = "mod23"

_REGISTRY: dict[str, tuple[int, int, int]] = {
    PROD_GROUP_ID: (_SG256_P, _SG256_Q, _SG256_G),
    TEST_GROUP_ID: (_MOD23_P, _MOD23_Q, _MOD23_G),
}

# Default domain-separation tag for deriving the second generator h.
DEFAULT_DOMAIN_TAG = b"privbill-generator-h-v2"

_H_DERIVE_PREFIX = b"pedersen-h"


@dataclass(frozen=True)
class GroupParams:
    """A prime-order group (p, q) with two independent generators g and h."""

    group_id: str
    p: int
    q: int
    g: int
    h: int
    element_len: int = field(init=False)
    scalar_len: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "element_len", (self.p.bit_length() + 7) // 8)
        object.__setattr__(self, "scalar_len", (self.q.bit_length() + 7) // 8)
        # Cached native-integer forms of the fixed bases; commitments are the
        # hot path (two fixed-base exponentiations per metered interval).
        if _powmod is not pow:  # pragma: no branch
            import gmpy2

            object.__setattr__(self, "_gz", gmpy2.mpz(self.g))
            object.__setattr__(self, "_hz", gmpy2.mpz(self.h))
            object.__setattr__(self, "_pz", gmpy2.mpz(self.p))
        else:  # pragma: no cover
            object.__setattr__(self, "_gz", self.g)
            object.__setattr__(self, "_hz", self.h)
            object.__setattr__(self, "_pz", self.p)

    # -- scalar field -----------------------------------------------------

    def reduce_scalar(self, x: int) -> int:
        return x % self.q

    def scalar_add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def scalar_mul(self, a: int, b: int) -> int:
        return (a * b) % self.q

    def scalar_inv(self, a: int) -> int:
        return pow(a % self.q, -1, self.q)

    def sample_scalar(self, rng: random.Random) -> int:
        """Uniform scalar in [0, q) from the given randomness source."""
        return rng.randrange(self.q)

    # -- group law --------------------------------------------------------

    @property
    def identity(self) -> int:
        return 1

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.p

    def exp(self, a: int, k: int) -> int:
        # Subgroup elements have order dividing q, so adding q to the reduced
        # exponent does not change the result; it keeps the exponent width
        # fixed so the cost of an exponentiation is independent of k.
        return int(_powmod(a, (k % self.q) + self.q, self.p))

    def exp_g(self, k: int) -> int:
        """`exp(g, k)` through the cached base (hot path for commitments)."""
        return int(_powmod(self._gz, (k % self.q) + self.q, self._pz))

    def exp_h(self, k: int) -> int:
        """`exp(h, k)` through the cached base (hot path for commitments)."""
        return int(_powmod(self._hz, (k % self.q) + self.q, self._pz))

    def inv(self, a: int) -> int:
        return int(_powmod(a, self.p - 2, self.p))

    def is_element(self, e: int) -> bool:
        """Membership in the order-q subgroup (identity included)."""
        return 0 < e < self.p and int(_powmod(e, self.q, self.p)) == 1

    # -- canonical encodings ----------------------------------------------

    def encode_element(self, e: int) -> bytes:
        return e.to_bytes(self.element_len, "big")

    def decode_element(self, data: bytes) -> int:
        if len(data) != self.element_len:
            raise ElementDecodeError(
                f"expected {self.element_len} bytes, got {len(data)}"
            )
        e = int.from_bytes(data, "big")
        if not self.is_element(e):
            raise ElementDecodeError("not a canonical subgroup element")
        return e

    def encode_scalar(self, x: int) -> bytes:
        return x.to_bytes(self.scalar_len, "big")

    def decode_scalar(self, data: bytes) -> int:
        if len(data) != self.scalar_len:
            raise ElementDecodeError(
                f"expected {self.scalar_len} bytes, got {len(data)}"
            )
        x = int.from_bytes(data, "big")
        if x >= self.q:
            raise ElementDecodeError("scalar not reduced mod q")
        return x


def _hash_to_group(p: int, q: int, g: int, domain_tag: bytes) -> int:
    """Map (g, tag) one-way into the subgroup, avoiding 1 and g.

    Hash with an incrementing counter, then clear the cofactor; the discrete
    log of the result base g is not known to anyone.
    """
    element_len = (p.bit_length() + 7) // 8
    seed = _H_DERIVE_PREFIX + g.to_bytes(element_len, "big") + domain_tag
    cofactor = (p - 1) // q
    for counter in range(256):
        digest = hashlib.sha256(seed + bytes([counter])).digest()
        candidate = pow(int.from_bytes(digest, "big") % p, cofactor, p)
        if candidate not in (1, g):
            return candidate
    raise RuntimeError("hash-to-group failed to find a usable element")


def derive_params(group_id: str, domain_tag: bytes = DEFAULT_DOMAIN_TAG) -> GroupParams:
    """Named group plus a second generator h derived from g and the tag."""
    try:
        p, q, g = _REGISTRY[group_id]
    except KeyError:
        raise UnknownGroupError(f"unknown group_id: {group_id!r}") from None
    h = _hash_to_group(p, q, g, domain_tag)
    return GroupParams(group_id=group_id, p=p, q=q, g=g, h=h)


def system_rng() -> random.Random:
    """Cryptographically strong randomness source for production mode."""
    return random.SystemRandom()
