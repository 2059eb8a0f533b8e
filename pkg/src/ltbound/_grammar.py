"""Helpers for the small `kind:key=value,...` text grammars."""

from .errors import ParseError


def split_kind(text):
    text = text.strip()
    kind, sep, body = text.partition(":")
    if not sep or not kind:
        raise ParseError(f"expected '<kind>:<args>', got {text!r}")
    return kind.strip().lower(), body.strip()


def parse_number(token, what="value"):
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"{what} {token!r} is not a number") from None


def parse_keyvals(body, allowed, required=None):
    """Parse ``k=v,k=v`` into a dict of floats, rejecting unknown keys."""
    out = {}
    for item in filter(None, (s.strip() for s in body.split(","))):
        key, sep, val = item.partition("=")
        key = key.strip().lower()
        if not sep:
            raise ParseError(f"expected key=value, got {item!r}")
        if key not in allowed:
            raise ParseError(f"unknown key {key!r} (allowed: {', '.join(allowed)})")
        if key in out:
            raise ParseError(f"duplicate key {key!r}")
        out[key] = parse_number(val.strip(), key)
    missing = [k for k in (required if required is not None else allowed) if k not in out]
    if missing:
        raise ParseError(f"missing key(s): {', '.join(missing)}")
    return out
