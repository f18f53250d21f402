"""Experiment configuration: ``key=value`` text or a single JSON object."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import ConfigurationError, ParameterError, UnsupportedRegimeError
from .hardy import Parameters, mu_critical

KINDS = ("hardy", "identities", "observability", "hum", "eigen")

# key -> default; None means "derived from other keys"
DEFAULTS: dict[str, Any] = {
    "kind": None,
    "alpha": "0",
    "mu": "0",
    "N": "1000",
    "T": None,
    "dt": "auto",
    "K": None,
    "seed": "0",
    "out": None,
    "count": "200",
    "modes": "10",
    "data": "20",
    "mode": "1",
    "levels": "3",
    "cg_tol": "1e-8",
    "max_iter": "500",
    "target": "1e-3",
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    alphas: tuple[float, ...]
    mus: tuple[float, ...]
    N: int
    T: tuple[float, ...]
    dt: float
    dt_auto: bool
    K: int
    seed: int
    out: Optional[str] = None
    count: int = 200
    modes: int = 10
    data: int = 20
    mode: int = 1
    levels: int = 3
    cg_tol: float = 1e-8
    max_iter: int = 500
    target: float = 1e-3
    mu_spec: str = field(default="0", compare=False)

    @property
    def alpha(self) -> float:
        return self.alphas[0]

    @property
    def mu(self) -> float:
        return self.mus[0]

    def parameters(self) -> list[Parameters]:
        return [Parameters(a, m) for a, m in zip(self.alphas, self.mus)]


def _kind(value: str, line: Optional[int]) -> str:
    if value not in KINDS:
        raise ConfigurationError(_where(line) + f"unknown experiment kind {value!r}; "
                                 f"expected one of {', '.join(KINDS)}")
    return value


def _where(line: Optional[int]) -> str:
    return f"line {line}: " if line is not None else ""


def _split_list(value: Any) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [s for s in str(value).split(",") if s.strip()]


def _float(key: str, value: Any, line: Optional[int]) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(_where(line) + f"{key}: expected a number, got {value!r}") from None


def _int(key: str, value: Any, line: Optional[int], minimum: int = 0) -> int:
    try:
        f = float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(_where(line) + f"{key}: expected an integer, got {value!r}") from None
    if f != int(f) or f < minimum:
        raise ConfigurationError(_where(line) + f"{key}: expected an integer >= {minimum}, got {value!r}")
    return int(f)


def _parse_pairs(text: str) -> dict[str, tuple[Any, Optional[int]]]:
    pairs: dict[str, tuple[Any, Optional[int]]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        for token in line.split():
            key, sep, value = token.partition("=")
            if not sep or not key or not value:
                raise ConfigurationError(f"line {lineno}: expected key=value, got {token!r}")
            if key in pairs:
                raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
            pairs[key] = (value, lineno)
    return pairs


def _parse_json(text: str) -> dict[str, tuple[Any, Optional[int]]]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"line {exc.lineno}: malformed JSON ({exc.msg})") from None
    if not isinstance(doc, dict):
        raise ConfigurationError("line 1: JSON configuration must be an object")
    return {str(k): (v, None) for k, v in doc.items()}


def parse_config(text: str, kind: Optional[str] = None) -> ExperimentConfig:
    """Parse and validate a configuration, resolving every default.

    ``mu=critical`` resolves to ``(1 - alpha)^2 / 4`` per alpha, ``dt=auto``
    to ``1/N``, ``K`` defaults to ``N // 10`` and ``T`` to ``T_alpha + 1``
    of the first alpha (``2`` for the identity study).  A ``kind`` argument
    (e.g. from the command line) must agree with any ``kind`` key.
    """
    stripped = text.lstrip()
    raw = _parse_json(text) if stripped.startswith("{") else _parse_pairs(text)
    for key, (_, line) in raw.items():
        if key not in DEFAULTS:
            raise ConfigurationError(_where(line) + f"unknown key {key!r}")

    def get(key):
        if key in raw:
            return raw[key]
        return DEFAULTS[key], None

    kind_v, kind_line = get("kind")
    if kind is not None:
        _kind(kind, None)
        if kind_v is not None and str(kind_v) != kind:
            raise ConfigurationError(_where(kind_line) + f"configuration is for kind {kind_v!r}, "
                                     f"command asked for {kind!r}")
        kind_v = kind
    kind = _kind(str(kind_v), kind_line) if kind_v is not None else "hardy"

    a_v, a_line = get("alpha")
    alphas = tuple(_float("alpha", s, a_line) for s in _split_list(a_v))
    if not alphas:
        raise ConfigurationError(_where(a_line) + "alpha: empty list")
    mu_v, mu_line = get("mu")
    mu_spec = str(mu_v).strip()
    mus = []
    for a in alphas:
        if a == 1.0:
            raise ConfigurationError(_where(a_line) + "alpha = 1 is an excluded regime")
        if not 0.0 <= a < 2.0:
            raise ConfigurationError(_where(a_line) + f"alpha = {a} outside [0, 2)")
        m = mu_critical(a) if mu_spec == "critical" else _float("mu", mu_v, mu_line)
        try:
            Parameters(a, m)
        except UnsupportedRegimeError as exc:  # pragma: no cover - alpha = 1 caught above
            raise ConfigurationError(_where(a_line) + str(exc)) from None
        except ParameterError as exc:
            raise ConfigurationError(_where(mu_line) + f"mu out of range: {exc}") from None
        mus.append(m)

    N_v, N_line = get("N")
    N = _int("N", N_v, N_line, minimum=4)

    dt_v, dt_line = get("dt")
    dt_auto = str(dt_v).strip() == "auto"
    dt = 1.0 / N if dt_auto else _float("dt", dt_v, dt_line)
    if not dt > 0:
        raise ConfigurationError(_where(dt_line) + "dt must be positive")

    T_v, T_line = get("T")
    if T_v is None:
        T = (2.0,) if kind == "identities" else (4.0 / (2.0 - alphas[0]) + 1.0,)
    else:
        T = tuple(_float("T", s, T_line) for s in _split_list(T_v))
        if not T or any(t <= 0 for t in T):
            raise ConfigurationError(_where(T_line) + "T must be a list of positive times")

    K_v, K_line = get("K")
    K = max(1, N // 10) if K_v is None else _int("K", K_v, K_line, minimum=1)

    vals = {key: get(key) for key in ("seed", "count", "modes", "data", "mode", "levels",
                                      "max_iter")}
    ints = {k: _int(k, v, ln, minimum=1 if k in ("count", "mode", "levels", "max_iter") else 0)
            for k, (v, ln) in vals.items()}
    floats = {}
    for key in ("cg_tol", "target"):
        v, ln = get(key)
        floats[key] = _float(key, v, ln)
        if not floats[key] > 0:
            raise ConfigurationError(_where(ln) + f"{key} must be positive")
    out_v, _ = get("out")

    return ExperimentConfig(kind=kind, alphas=alphas, mus=tuple(mus), N=N, T=T, dt=dt,
                            dt_auto=dt_auto, K=K, out=None if out_v is None else str(out_v),
                            mu_spec=mu_spec, **ints, **floats)


def load_config(path, kind: Optional[str] = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read configuration {path}: {exc.strerror}") from None
    return parse_config(text, kind)
