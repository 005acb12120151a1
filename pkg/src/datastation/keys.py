"""Contributor signing keys.

Contributors sign the SHA-256 digest of the exact byte stream they upload
with an Ed25519 key. The station stores only the public key, rendered as
64 lowercase hex chars (the raw 32-byte key), which doubles as the owner
fingerprint everywhere else in the system.
"""

from __future__ import annotations

import hashlib

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)


def generate_keypair() -> tuple[bytes, str]:
    """Return (private key raw bytes, public fingerprint hex)."""
    private = Ed25519PrivateKey.generate()
    public = private.public_key().public_bytes_raw()
    return private.private_bytes_raw(), public.hex()


def content_digest(content: bytes) -> bytes:
    return hashlib.sha256(content).digest()


def sign_content(private_raw: bytes, content: bytes) -> str:
    """Sign the SHA-256 digest of `content`; returns hex signature."""
    key = Ed25519PrivateKey.from_private_bytes(private_raw)
    return key.sign(content_digest(content)).hex()


def verify_content(fingerprint_hex: str, signature_hex: str, content: bytes) -> bool:
    try:
        public = Ed25519PublicKey.from_public_bytes(bytes.fromhex(fingerprint_hex))
        public.verify(bytes.fromhex(signature_hex), content_digest(content))
        return True
    except (InvalidSignature, ValueError):
        return False
