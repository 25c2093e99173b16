"""
Seed derivation.

Every random stream in the pipeline is seeded with
``derive_seed(master, *labels)``: the first 8 bytes (little endian) of the
BLAKE2b digest of ``"<master>/<label1>/<label2>/..."``. Streams with distinct
purpose labels are independent, and any single stream can be recreated
without replaying the others.
"""

import hashlib


def derive_seed(master: int, *labels) -> int:
    key = "/".join([str(int(master))] + [str(label) for label in labels])
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")
