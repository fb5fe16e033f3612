from Crypto.Hash import keccak as _keccak


def keccak256(data: bytes) -> bytes:
    """Ethereum keccak-256 (original Keccak padding, not FIPS SHA3-256)."""
    return _keccak.new(digest_bits=256, data=data).digest()


def keccak_int(data: bytes) -> int:
    return int.from_bytes(keccak256(data), "big")
