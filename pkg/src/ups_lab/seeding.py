"""Deterministic seed derivation shared by every stochastic component.

All randomness in the lab flows through 64-bit seeds derived here. Child seeds
are a stable hash of their parent seed plus context labels, so reruns with the
same master seed reproduce every stream bit-for-bit, while distinct contexts
(iteration index, pass index, purpose tag) get statistically independent
streams.
"""

import hashlib


def derive_seed(*parts: int | str) -> int:
    """Derive a 64-bit unsigned seed from a mix of integers and strings.

    The derivation hashes the textual form of the parts, which is stable
    across platforms, processes, and numpy versions.
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")
