import csv
import math

import numpy as np

from .exceptions import InvalidConfigError

TRUE_STRINGS = ("true", "yes", "on", "1")
FALSE_STRINGS = ("false", "no", "off", "0")


def coerce_value(value, default, key):
    """
    Converts value to the type of default, raising InvalidConfigError with
    the offending key when it cannot.
    """
    try:
        if isinstance(default, bool):
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in TRUE_STRINGS:
                return True
            if text in FALSE_STRINGS:
                return False
            raise ValueError("not a boolean")
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError("not an integer")
            return int(value)
        if isinstance(default, float):
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise InvalidConfigError("Invalid value for %s: %r" % (key, value))


class ConfigSection:
    """
    Base class for a named group of configuration values.

    Subclasses list their keys and defaults in ``defaults``; constructor values
    are coerced to the type of the matching default and then checked by
    ``validate()``, which raises InvalidConfigError.
    """

    name = None
    defaults = {}

    def __init__(self, **values):
        unknown = sorted(set(values) - set(self.defaults))
        if unknown:
            raise InvalidConfigError(
                "Unknown %s keys: %s" % (self.name, ", ".join(unknown))
            )
        for key, default in self.defaults.items():
            value = values.get(key, default)
            setattr(self, key, coerce_value(value, default, self.key(key)))
        self.validate()

    def key(self, name):
        return "%s.%s" % (self.name, name)

    def validate(self):
        pass

    def check(self, condition, name, requirement):
        if not condition:
            raise InvalidConfigError(
                "%s must be %s, got %r"
                % (self.key(name), requirement, getattr(self, name))
            )

    def check_finite(self, *names):
        for name in names:
            self.check(math.isfinite(getattr(self, name)), name, "finite")

    def items(self):
        return [(key, getattr(self, key)) for key in self.defaults]

    def replace(self, **changes):
        values = dict(self.items())
        values.update(changes)
        return self.__class__(**values)

    def __eq__(self, other):
        return type(self) is type(other) and self.items() == other.items()

    def __repr__(self):
        return "<%s %s>" % (
            self.__class__.__name__,
            " ".join("%s=%r" % item for item in self.items()),
        )


def seed_sequence(*keys):
    """
    Builds a SeedSequence from a global seed followed by any number of
    non-negative integer coordinates (Gaussian id, view id, iteration...).
    """
    if not keys:
        raise ValueError("seed_sequence needs at least a global seed")
    keys = [int(key) for key in keys]
    if any(key < 0 for key in keys):
        raise ValueError("Seed keys must be non-negative, got %r" % (keys,))
    return np.random.SeedSequence(entropy=keys[0], spawn_key=tuple(keys[1:]))


def derive_seed(*keys):
    """
    Returns a 64-bit integer seed that is a pure function of the keys.
    """
    return int(seed_sequence(*keys).generate_state(1, dtype=np.uint64)[0])


def rng_for(*keys):
    return np.random.default_rng(seed_sequence(*keys))


def keyed_uniforms(ids, shape, *keys):
    """
    Uniforms in [0, 1) with one block of the given shape per id. The block
    for an id depends only on keys and the id itself (it is read from that
    position of the stream seeded by keys), so reordering ids reorders the
    blocks and nothing else.
    """
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    shape = tuple(shape)
    if not len(ids):
        return np.zeros((0,) + shape)
    if ids.min() < 0:
        raise ValueError("ids must be non-negative")
    return rng_for(*keys).random((int(ids.max()) + 1,) + shape)[ids]


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(value) for value in row])


def format_cell(value):
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def read_csv(path):
    """
    Returns (header, rows) with every cell left as a string.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return [], []
        return header, [row for row in reader if row]
