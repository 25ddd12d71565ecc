"""IPv4 address and /24 block helpers.

Addresses are plain unsigned 32-bit integers throughout the package. A "block"
is the upper 24 bits of an address (address >> 8), i.e. the /24 the address
belongs to.
"""

from __future__ import annotations

from .errors import DataError

# Valid octet spellings: "0".."255", no leading zeros. Shared by the text
# parsers so that the strict grammar is identical everywhere.
OCTETS: dict[str, int] = {str(v): v for v in range(256)}
OCTET_BYTES: dict[bytes, int] = {str(v).encode(): v for v in range(256)}


def ip_to_int(text: str) -> int:
    """Parse a dotted quad into an int, rejecting anything non-canonical."""
    parts = text.split(".")
    if len(parts) != 4:
        raise DataError(f"bad IPv4 address {text!r}")
    try:
        return (
            (OCTETS[parts[0]] << 24)
            | (OCTETS[parts[1]] << 16)
            | (OCTETS[parts[2]] << 8)
            | OCTETS[parts[3]]
        )
    except KeyError:
        raise DataError(f"bad IPv4 address {text!r}") from None


def int_to_ip(value: int) -> str:
    return f"{(value >> 24) & 0xFF}.{(value >> 16) & 0xFF}.{(value >> 8) & 0xFF}.{value & 0xFF}"


def block_of(ip: int) -> int:
    return ip >> 8


def block_base(block: int) -> int:
    return block << 8


def block_to_str(block: int) -> str:
    """Render a block id as its /24 in CIDR notation."""
    return int_to_ip(block << 8) + "/24"


def parse_prefix(text: str) -> tuple[int, int]:
    """Parse "a.b.c.d/len" into (network address, prefix length).

    The address must be the true network address: set host bits are an error,
    since silently masking them tends to hide upstream data problems.
    """
    base_text, sep, len_text = text.partition("/")
    if not sep or not len_text.isdigit():
        raise DataError(f"bad prefix {text!r}")
    plen = int(len_text)
    if plen > 32:
        raise DataError(f"bad prefix length in {text!r}")
    base = ip_to_int(base_text)
    if plen < 32 and base & ((1 << (32 - plen)) - 1):
        raise DataError(f"host bits set in prefix {text!r}")
    return base, plen


def prefix_to_str(base: int, plen: int) -> str:
    return f"{int_to_ip(base)}/{plen}"


def prefix_range(addr: int, plen: int) -> tuple[int, int]:
    """Inclusive address range of the length-plen prefix containing addr."""
    span = 1 << (32 - plen)
    lo = addr & ~(span - 1) & 0xFFFFFFFF
    return lo, lo + span - 1
