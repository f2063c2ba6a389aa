"""Strict TOML run configuration.

Grammar: TOML 1.0. Top-level keys ``scenario``, ``seed``, ``output``,
``format`` and ``threads``; every other top-level table must be one of the
scenario's parameter blocks, and nested keys must exist in that block's
defaults. Values must match the default's type (integers are accepted where
floats are expected; fixed-length arrays keep their length). Unknown keys and
type mismatches raise :class:`ConfigError` with a ``line:column`` location.
"""

import copy
import re

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .scenarios import REGISTRY

FORMATS = ("csv", "json", "snapshot")
TOP_LEVEL = {"scenario": str, "seed": int, "output": str, "format": str, "threads": int}
MATTER_PARAMS = {"none": set(), "constant": {"value"}, "harmonic": {"mass", "center"}}
SEED_MAX = 2**64 - 1

_TABLE = re.compile(r"^\s*\[\s*([^\[\]]+?)\s*\]\s*(#.*)?$")
_KEY = re.compile(r"^\s*([A-Za-z0-9_\-\.\"' ]+?)\s*=")


def _split_key(text):
    return [p.strip().strip("\"'") for p in text.split(".")]


def locate(source, path):
    """(line, column), 1-based, of the key at ``path`` in the TOML text."""
    table = []
    best = None
    for ln, line in enumerate(source.splitlines(), 1):
        m = _TABLE.match(line)
        if m:
            table = _split_key(m.group(1))
            if table == list(path):
                best = best or (ln, line.index("[") + 1)
            continue
        m = _KEY.match(line)
        if not m:
            continue
        full = table + _split_key(m.group(1))
        if full == list(path):
            return ln, line.index(m.group(1)) + 1
        # inline table: look for the last key inside the braces
        if full == list(path[: len(full)]) and "{" in line:
            tail = path[-1]
            pos = re.search(r"[{,]\s*" + re.escape(tail) + r"\s*=", line)
            if pos:
                return ln, pos.start() + pos.group(0).index(tail) + 1
    return best or (1, 1)


def _fail(source, path, msg, name):
    ln, col = locate(source, path) if source is not None else (1, 1)
    raise ConfigError(f"{name}:{ln}:{col}: {msg}")


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_value(default, value, path, source, name):
    key = ".".join(path)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            _fail(source, path, f"{key} must be a boolean", name)
    elif isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            _fail(source, path, f"{key} must be an integer", name)
    elif isinstance(default, float):
        if not _is_number(value):
            _fail(source, path, f"{key} must be a number", name)
        return float(value)
    elif isinstance(default, str):
        if not isinstance(value, str):
            _fail(source, path, f"{key} must be a string", name)
    elif isinstance(default, list):
        if not isinstance(value, list) or len(value) != len(default):
            _fail(source, path, f"{key} must be an array of {len(default)} values", name)
        out = []
        for d, v in zip(default, value):
            if not _is_number(v):
                _fail(source, path, f"{key} must hold numbers", name)
            out.append(int(v) if isinstance(d, int) and not isinstance(d, bool) else float(v))
            if isinstance(d, int) and not isinstance(d, bool) and not isinstance(v, int):
                _fail(source, path, f"{key} entry {v!r} must be an integer", name)
        return out
    return value


def _merge(defaults, given, path, source, name):
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        p = path + (k,)
        if k not in defaults:
            where = f"[{'.'.join(path)}]" if path else "top level"
            _fail(source, p, f"unknown key '{k}' in {where}", name)
        d = defaults[k]
        if k == "params" and path and path[-1] == "matter_potential":
            if not isinstance(v, dict):
                _fail(source, p, "matter_potential.params must be a table", name)
            out[k] = dict(v)
            for pk, pv in v.items():
                if not _is_number(pv):
                    _fail(source, p + (pk,), f"parameter '{pk}' must be a number", name)
            continue
        if isinstance(d, dict):
            if not isinstance(v, dict):
                _fail(source, p, f"'{'.'.join(p)}' must be a table", name)
            out[k] = _merge(d, v, p, source, name)
        else:
            out[k] = _check_value(d, v, p, source, name)
    return out


def _check_matter(params, source, name):
    block = params.get("model", {}).get("matter_potential")
    if block is None:
        return
    kind = block["kind"]
    if kind not in MATTER_PARAMS:
        _fail(source, ("model", "matter_potential", "kind"), f"unknown matter potential '{kind}'", name)
    extra = set(block["params"]) - MATTER_PARAMS[kind]
    if extra:
        k = sorted(extra)[0]
        _fail(source, ("model", "matter_potential", "params", k),
              f"unknown key '{k}' for matter potential '{kind}'", name)


def resolve(data, source=None, name="<config>", overrides=None):
    """Validate parsed TOML ``data`` and merge it over the scenario defaults.

    ``overrides`` (from command-line flags) take precedence. Returns the fully
    resolved config dict: top-level settings plus a ``params`` block.
    """
    data = dict(data)
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    scen = overrides.get("scenario", data.get("scenario"))
    if scen is None:
        raise ConfigError(f"{name}:1:1: no scenario given")
    if not isinstance(scen, str) or scen not in REGISTRY:
        _fail(source, ("scenario",), f"unknown scenario '{scen}'", name)
    entry = REGISTRY[scen]
    top = {}
    blocks = {}
    for k, v in data.items():
        if k in TOP_LEVEL:
            if not isinstance(v, TOP_LEVEL[k]) or isinstance(v, bool):
                _fail(source, (k,), f"'{k}' must be of type {TOP_LEVEL[k].__name__}", name)
            top[k] = v
        else:
            blocks[k] = v
    params = _merge(entry.defaults, blocks, (), source, name)
    _check_matter(params, source, name)
    cfg = {"scenario": scen, "seed": 0, "output": None, "format": "csv", "threads": 1}
    cfg.update(top)
    cfg.update({k: v for k, v in overrides.items() if k in TOP_LEVEL})
    if cfg["format"] not in FORMATS:
        _fail(source, ("format",), f"format must be one of {', '.join(FORMATS)}", name)
    if not 0 <= cfg["seed"] <= SEED_MAX:
        _fail(source, ("seed",), "seed must be an unsigned 64-bit integer", name)
    if cfg["threads"] < 1:
        _fail(source, ("threads",), "threads must be at least 1", name)
    cfg["params"] = params
    return cfg


def load(path, overrides=None):
    """Parse and validate a config file."""
    with open(path, "rb") as fh:
        source = fh.read().decode("utf-8", errors="replace")
    return loads(source, overrides, str(path))


def loads(text, overrides=None, name="<config>"):
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+), column (\d+)", str(exc))
        loc = f"{m.group(1)}:{m.group(2)}" if m else "1:1"
        raise ConfigError(f"{name}:{loc}: {exc}") from None
    return resolve(data, text, name, overrides)
