"""Flat ``key = value`` scenario files and the builders that read them.

Sections are dotted prefixes (``modulus.kind``, ``diffeo.epsilon``);
lists are comma separated.  ``#`` starts a comment and values may be
wrapped in matching quotes.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Mapping

from .diffeo import Block, Diffeo, PastedSpec, from_modulus, identity, moebius_test, paste, sharpness_family
from .errors import SpecError
from .modulus import Modulus

DIFFEO_KINDS = ("from_modulus", "sharpness", "pasted", "identity", "moebius_test")


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    cfg: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise SpecError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        value = value.strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        cfg[key.strip()] = value
    return cfg


def load(path) -> dict[str, str]:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"cannot read scenario {p}: {exc}") from None
    return parse_text(text, str(p))


def dump(cfg: Mapping[str, str]) -> str:
    """Canonical text form: sorted keys, one per line."""
    return "".join(f"{k} = {cfg[k]}\n" for k in sorted(cfg))


def config_hash(cfg: Mapping[str, str]) -> str:
    return hashlib.sha256(dump(cfg).encode("utf-8")).hexdigest()


def section(cfg: Mapping[str, str], prefix: str) -> dict[str, str]:
    head = prefix + "."
    return {k[len(head):]: v for k, v in cfg.items() if k.startswith(head)}


def parse_list(value: str | None) -> list[str]:
    if not value:
        return []
    return [v.strip() for v in value.split(",") if v.strip()]


def get_float(cfg: Mapping[str, str], key: str, default: float | None = None) -> float:
    if key not in cfg:
        if default is None:
            raise SpecError(f"missing required key {key!r}")
        return default
    try:
        return float(cfg[key])
    except ValueError:
        raise SpecError(f"{key} must be a number, got {cfg[key]!r}") from None


def get_int(cfg: Mapping[str, str], key: str, default: int | None = None) -> int:
    v = get_float(cfg, key, None if default is None else float(default))
    if v != int(v):
        raise SpecError(f"{key} must be an integer, got {cfg[key]!r}")
    return int(v)


def get_bool(cfg: Mapping[str, str], key: str, default: bool = False) -> bool:
    if key not in cfg:
        return default
    v = cfg[key].strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise SpecError(f"{key} must be true or false, got {cfg[key]!r}")


def build_modulus(cfg: Mapping[str, str], base_dir: Path | None = None) -> Modulus:
    """From ``modulus = holder:0.5`` or the ``modulus.*`` keys."""
    if "modulus" in cfg:
        return Modulus.parse(cfg["modulus"], base_dir)
    sub = section(cfg, "modulus")
    if not sub:
        raise SpecError("scenario has no modulus")
    return Modulus.from_config(sub, base_dir)


def parse_blocks(text: str) -> list[tuple[float, float, float]]:
    """``"0.55:0.95:0.5, 0.05:0.45:0.25"`` -> ``[(a, b, eps), ...]``."""
    out = []
    for item in parse_list(text):
        parts = item.split(":")
        if len(parts) != 3:
            raise SpecError(f"block {item!r} must be a:b:epsilon")
        try:
            out.append(tuple(float(p) for p in parts))
        except ValueError:
            raise SpecError(f"block {item!r} has a non-numeric field") from None
    return out


def build_diffeo(sub: Mapping[str, str], m: Modulus | None) -> Diffeo:
    """Construct a map from ``diffeo.*`` keys (prefix stripped)."""
    kind = sub.get("kind", "identity").strip()
    if kind not in DIFFEO_KINDS:
        raise SpecError(f"diffeo.kind must be one of {', '.join(DIFFEO_KINDS)}, got {kind!r}")
    if kind == "identity":
        return identity()
    if kind == "moebius_test":
        return moebius_test()
    if m is None:
        raise SpecError(f"diffeo kind {kind} needs a modulus")
    if kind == "from_modulus":
        return from_modulus(m, get_float(sub, "epsilon", 0.25), sub.get("sign", "contracting"))
    if kind == "sharpness":
        return sharpness_family(m, get_float(sub, "epsilon", 0.5), get_int(sub, "k_min", 32),
                                get_float(sub, "c_abs", 1000.0))
    k_min = get_int(sub, "block_k_min", 1024)
    c_abs = get_float(sub, "c_abs", 1000.0)
    blocks = tuple(Block(a, b, sharpness_family(m, eps, k_min, c_abs), eps)
                   for a, b, eps in parse_blocks(sub.get("blocks", "")))
    return paste(PastedSpec(blocks))
