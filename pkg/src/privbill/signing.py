"""Meter signing keys and the canonical signed payload.

The meter signs exactly (i0, COMM): the 8-byte big-endian starting interval
followed by the canonical encodings of the commitment column, in row order.
The plaintext value and blinding columns are deliberately outside the signed
region so they can be stripped without breaking the signature.

Ed25519 is used: deterministic, EUF-CMA, and the verifier needs no meter
secrets.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .group import GroupParams


@dataclass
class MeterKeypair:
    meter_id: str
    private_key: Ed25519PrivateKey
    public_key: Ed25519PublicKey

    @classmethod
    def generate(cls, meter_id: str) -> "MeterKeypair":
        priv = Ed25519PrivateKey.generate()
        return cls(meter_id=meter_id, private_key=priv, public_key=priv.public_key())

    def public_bytes(self) -> bytes:
        return self.public_key.public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )

    def save(self, priv_path: Path, pub_path: Path) -> None:
        priv_pem = self.private_key.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        )
        pub_pem = self.public_key.public_bytes(
            serialization.Encoding.PEM, serialization.PublicFormat.SubjectPublicKeyInfo
        )
        priv_path.write_bytes(priv_pem)
        pub_path.write_bytes(pub_pem)

    @classmethod
    def load(cls, meter_id: str, priv_path: Path) -> "MeterKeypair":
        priv = serialization.load_pem_private_key(priv_path.read_bytes(), password=None)
        if not isinstance(priv, Ed25519PrivateKey):
            raise ValueError("not an Ed25519 private key")
        return cls(meter_id=meter_id, private_key=priv, public_key=priv.public_key())


def load_public_key(pub_path: Path) -> Ed25519PublicKey:
    pub = serialization.load_pem_public_key(pub_path.read_bytes())
    if not isinstance(pub, Ed25519PublicKey):
        raise ValueError("not an Ed25519 public key")
    return pub


def signing_payload(params: GroupParams, i0: int, comm_column: list[int]) -> bytes:
    """Canonical byte region covered by the meter signature."""
    out = [i0.to_bytes(8, "big")]
    out.extend(params.encode_element(c) for c in comm_column)
    return b"".join(out)


def sign_report(
    keys: MeterKeypair, params: GroupParams, i0: int, comm_column: list[int]
) -> bytes:
    return keys.private_key.sign(signing_payload(params, i0, comm_column))


def verify_report_signature(
    pubkey: Ed25519PublicKey,
    params: GroupParams,
    i0: int,
    comm_column: list[int],
    sig: bytes,
) -> bool:
    """Accept iff sig is valid over canonical (i0, COMM). Malformed sig rejects."""
    try:
        pubkey.verify(sig, signing_payload(params, i0, comm_column))
        return True
    except InvalidSignature:
        return False
    except ValueError:
        return False
