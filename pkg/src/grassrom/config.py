"""Plain-text run configuration: ``[section]`` headers and ``key = value`` lines.

Every key mirrors one library option. Unknown sections or keys, duplicate
keys and malformed values are rejected with the offending line number.
``#`` and ``;`` start comment lines.
"""

from pathlib import Path

from .errors import ConfigError

__all__ = ["SCHEMA", "RunConfig", "parse_config", "load_config"]


def _bool(text):
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def parse_floats(text):
    return tuple(float(x) for x in text.split(","))


def _index(text):
    return None if text == "nearest" else int(text)


def _optional(conv):
    def parse(text):
        return None if text in ("none", "") else conv(text)

    return parse


def _bounds(text):
    """``lo:hi`` pairs separated by commas, one per parameter."""
    pairs = []
    for item in text.split(","):
        lo, sep, hi = item.partition(":")
        if not sep:
            raise ValueError(f"expected lo:hi, got {item!r}")
        pairs.append((float(lo), float(hi)))
    return tuple(pairs)


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return parse


def _format_value(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ",".join(f"{lo!r}:{hi!r}" for lo, hi in value)
        return ",".join(repr(float(v)) for v in value)
    return str(value)


# section -> key -> (parser, default)
SCHEMA = {
    "samples": {
        "family": (_choice("pulse", "rotation"), "pulse"),
        "n_points": (int, 512),
        "n_times": (int, 128),
        "width": (float, 0.25),
        "subspace_dim": (int, 3),
        "gammas": (parse_floats, (0.1, 0.3, 0.5, 0.7, 0.9)),
        "manifest": (_optional(str), None),
    },
    "pod": {
        "rule": (_choice("rank", "energy"), "rank"),
        "rank": (int, 8),
        "energy": (float, 0.999),
        "center": (_bool, False),
        "method": (_choice("svd", "snapshots"), "svd"),
    },
    "interpolator": {
        "method": (_choice("auto", "lagrange", "rbf", "idw"), "auto"),
        "kernel": (_choice("gaussian", "multiquadric", "thin-plate"), "gaussian"),
        "shape": (_optional(float), None),
        "power": (float, 2.0),
        "ref_index": (_index, None),
        "anchor_index": (_index, None),
        "calibration": (_choice("blend", "anchor"), "blend"),
    },
    "ga": {
        "population_size": (int, 30),
        "generations": (int, 40),
        "crossover_rate": (float, 0.9),
        "mutation_rate": (float, 0.2),
        "mutation_sigma": (float, 0.1),
        "elitism_count": (int, 1),
        "bounds": (_optional(_bounds), None),
        "tournament_size": (int, 3),
        "rng_seed": (int, 0),
        "blend_alpha": (float, 0.5),
        "stagnation": (_optional(int), None),
        "target_gamma": (parse_floats, (0.6,)),
        "workers": (int, 1),
    },
    "bench": {
        "n_queries": (int, 20),
        "seed": (int, 0),
    },
    "paths": {
        "out": (str, "."),
        "target": (_optional(str), None),
        "format": (_choice("bin", "csv"), "bin"),
    },
}


class RunConfig:
    """Resolved configuration: schema defaults overlaid with file values.

    Access values as ``cfg["ga"]["rng_seed"]``.
    """

    def __init__(self, values=None):
        self.values = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
        for sec, keys in (values or {}).items():
            for key, val in keys.items():
                self.set(sec, key, val)

    def __getitem__(self, section):
        return self.values[section]

    def set(self, section, key, value):
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown option [{section}] {key}")
        self.values[section][key] = value

    def set_text(self, section, key, text, line=None):
        """Parse ``text`` with the schema converter and store it."""
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", line=line)
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", line=line)
        conv = SCHEMA[section][key][0]
        try:
            value = conv(text)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}", line=line) from None
        self.values[section][key] = value

    def dumps(self):
        """Canonical text form; parsing it gives back the same configuration."""
        lines = []
        for sec in SCHEMA:
            lines.append(f"[{sec}]")
            for key, val in self.values[sec].items():
                text = "nearest" if val is None and SCHEMA[sec][key][0] is _index else _format_value(val)
                lines.append(f"{key} = {text}")
            lines.append("")
        return "\n".join(lines)


def parse_config(text, base=None):
    """Parse configuration text, overlaying ``base`` (a `RunConfig`) or the defaults."""
    cfg = RunConfig(base.values if base is not None else None)
    section = None
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", line=lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", line=lineno)
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"expected key = value, got {line!r}", line=lineno)
        if section is None:
            raise ConfigError("key outside of any [section]", line=lineno)
        key = key.strip()
        if (section, key) in seen:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", line=lineno)
        seen.add((section, key))
        cfg.set_text(section, key, value.strip(), line=lineno)
    return cfg


def load_config(path, base=None):
    path = Path(path)
    try:
        return parse_config(path.read_text(), base)
    except ConfigError as exc:
        err = ConfigError(f"{path}: {exc}")
        err.line = exc.line
        raise err from None
