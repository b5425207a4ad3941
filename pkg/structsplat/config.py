import logging

from .consistency import Thresholds
from .densify import SplitConfig
from .exceptions import InvalidConfigError
from .imaging import ScaleSpaceConfig
from .metric import MetricConfig
from .trainer import TrainerConfig
from .utils import coerce_value

logger = logging.getLogger("structsplat.config")


class RunConfig:
    """
    Every tunable of a run: top-level keys plus one section per module.

    Serialized as ``key = value`` lines with dotted section keys
    (``scale_space.gamma = 3.0``); ``#`` starts a comment.
    """

    sections = {
        "scale_space": ScaleSpaceConfig,
        "thresholds": Thresholds,
        "split": SplitConfig,
        "metric": MetricConfig,
        "trainer": TrainerConfig,
    }
    top_level = {"seed": 0, "threads": 1, "output": ""}

    def __init__(self, **values):
        for key, default in self.top_level.items():
            setattr(self, key, coerce_value(values.pop(key, default), default, key))
        for name, section in self.sections.items():
            value = values.pop(name, None)
            setattr(self, name, section() if value is None else value)
        if values:
            raise InvalidConfigError(
                "Unknown config keys: %s" % ", ".join(sorted(values))
            )
        if self.seed < 0:
            raise InvalidConfigError("seed must be >= 0, got %r" % self.seed)
        if self.threads < 1:
            raise InvalidConfigError(
                "threads must be at least 1, got %r" % self.threads
            )

    @classmethod
    def from_pairs(cls, pairs):
        """
        Builds a config from (dotted key, value) pairs; later pairs win.
        """
        top = {}
        grouped = {name: {} for name in cls.sections}
        for key, value in pairs:
            if "." in key:
                section, name = key.split(".", 1)
                if section not in cls.sections:
                    raise InvalidConfigError("Unknown config section %r" % section)
                grouped[section][name] = value
            elif key in cls.top_level:
                top[key] = value
            else:
                raise InvalidConfigError("Unknown config key %r" % key)
        sections = {
            name: cls.sections[name](**values) for name, values in grouped.items()
        }
        return cls(**top, **sections)

    def as_pairs(self):
        pairs = [(key, getattr(self, key)) for key in self.top_level]
        for name in self.sections:
            for key, value in getattr(self, name).items():
                pairs.append(("%s.%s" % (name, key), value))
        return pairs

    def with_overrides(self, overrides):
        """
        Applies ``key=value`` strings on top of this config.
        """
        pairs = [parse_assignment(override) for override in overrides]
        return self.from_pairs(self.as_pairs() + pairs)

    @classmethod
    def load(cls, path, overrides=()):
        pairs = []
        with open(path) as fh:
            for number, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                try:
                    pairs.append(parse_assignment(line))
                except InvalidConfigError as exc:
                    raise InvalidConfigError("%s:%d: %s" % (path, number, exc))
        config = cls.from_pairs(pairs)
        return config.with_overrides(overrides) if overrides else config

    def dumps(self):
        lines = []
        section = None
        for key, value in self.as_pairs():
            current = key.split(".", 1)[0] if "." in key else None
            if current != section:
                lines.append("")
                lines.append("# %s" % current)
                section = current
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append("%s = %s" % (key, value))
        return "\n".join(lines).lstrip("\n") + "\n"

    def dump(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.as_pairs() == other.as_pairs()


def parse_assignment(text):
    if "=" not in text:
        raise InvalidConfigError("Expected key = value, got %r" % text)
    key, value = text.split("=", 1)
    key = key.strip()
    if not key:
        raise InvalidConfigError("Missing key in %r" % text)
    return key, value.strip()
