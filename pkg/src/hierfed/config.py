"""``key = value`` run configuration for the command-line front end."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional

from .field import MERSENNE_31, is_prime

COMMANDS = ("simulate", "sweep", "audit", "train")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


def _int(text: str) -> int:
    return int(text.replace("_", ""))


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _range(text: str) -> tuple[int, int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return _int(lo.strip()), _int(hi.strip())
    v = _int(text)
    return v, v


def _sets(text: str) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(_int(x) for x in part.split(",") if x.strip()) for part in text.split(";"))


def _ints(text: str) -> tuple[int, ...]:
    return tuple(_int(x) for x in text.split(",") if x.strip())


def _command(text: str) -> str:
    if text not in COMMANDS:
        raise ValueError(f"unknown command {text!r}, expected one of {', '.join(COMMANDS)}")
    return text


@dataclass
class RunConfig:
    command: Optional[str] = None
    N: Optional[int] = None
    B: Optional[int] = None
    z_bs: int = 0
    z_ue: int = 0
    nu: Optional[tuple] = None
    gamma: Optional[tuple] = None
    main_bs: Optional[tuple] = None
    q: int = MERSENNE_31
    d: Optional[int] = None
    seed: int = 0
    out: Optional[str] = None
    broken: bool = False
    # audit
    prior: str = "uniform"
    point: Optional[tuple] = None
    budget: int = 10**8
    # train
    eta: float = 0.1
    iters: int = 20
    scale_bits: int = 16
    clip: float = 2.0**20
    samples: int = 8
    dataset: str = "synthetic"
    compare_plaintext: bool = False
    lines: dict = field(default_factory=dict, repr=False)

    @property
    def inline_topology(self) -> bool:
        return self.gamma is not None


PARSERS = {
    "command": _command,
    "N": _int,
    "B": _int,
    "z_bs": _int,
    "z_ue": _int,
    "nu": _range,
    "gamma": _sets,
    "main_bs": _ints,
    "q": _int,
    "d": _int,
    "seed": _int,
    "out": str,
    "broken": _bool,
    "prior": str,
    "point": _sets,
    "budget": _int,
    "eta": float,
    "iters": _int,
    "scale_bits": _int,
    "clip": float,
    "samples": _int,
    "dataset": str,
    "compare_plaintext": _bool,
}

REQUIRED = {
    "simulate": ("N", "B", "d"),
    "sweep": ("N", "B", "d", "nu"),
    "audit": ("N", "B"),
    "train": ("N", "B", "d"),
}


def parse_config(text: str, command: str | None = None) -> RunConfig:
    cfg = RunConfig()
    names = {f.name for f in fields(RunConfig)} - {"lines"}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in names:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in cfg.lines:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        try:
            setattr(cfg, key, PARSERS[key](value))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno) from None
        cfg.lines[key] = lineno
    if command is not None:
        if cfg.command not in (None, command):
            raise ConfigError(
                f"config is for {cfg.command!r}, invoked as {command!r}", cfg.lines["command"]
            )
        cfg.command = _command(command)
    if cfg.command is None:
        raise ConfigError("missing required key 'command'")
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    ln = cfg.lines.get
    for key in REQUIRED[cfg.command]:
        if getattr(cfg, key) is None:
            raise ConfigError(f"missing required key {key!r} for {cfg.command}")
    if cfg.command == "simulate" or cfg.command == "train" or cfg.command == "audit":
        if cfg.gamma is None and cfg.nu is None:
            raise ConfigError(f"{cfg.command} needs either 'gamma' (inline topology) or 'nu'")
        if (cfg.gamma is None) != (cfg.main_bs is None):
            raise ConfigError("'gamma' and 'main_bs' must be given together", ln("gamma") or ln("main_bs"))
    if not is_prime(cfg.q):
        raise ConfigError(f"q = {cfg.q} is not prime", ln("q"))
    if cfg.command != "sweep" and cfg.q <= cfg.B:
        raise ConfigError(f"q = {cfg.q} must exceed B = {cfg.B}", ln("q"))
    for key in ("N", "B", "d", "iters", "samples"):
        v = getattr(cfg, key)
        if v is not None and v < 1:
            raise ConfigError(f"{key} must be >= 1", ln(key))
    for key in ("z_bs", "z_ue"):
        if getattr(cfg, key) < 0:
            raise ConfigError(f"{key} must be >= 0", ln(key))
    if cfg.nu is not None and not 1 <= cfg.nu[0] <= cfg.nu[1]:
        raise ConfigError(f"invalid nu range {cfg.nu[0]}..{cfg.nu[1]}", ln("nu"))
    if cfg.prior not in ("uniform", "point"):
        raise ConfigError(f"prior must be 'uniform' or 'point', got {cfg.prior!r}", ln("prior"))
    if cfg.dataset not in ("synthetic", "ones"):
        raise ConfigError(f"dataset must be 'synthetic' or 'ones', got {cfg.dataset!r}", ln("dataset"))
    if cfg.eta < 0:
        raise ConfigError("eta must be >= 0", ln("eta"))
