"""Hierarchical configuration database keyed by dotted component paths."""

from fnmatch import fnmatchcase

_MISSING = object()


def glob_match(pattern, path):
    """Match a dotted path against a dotted glob.

    ``*`` (or any fnmatch expression) matches exactly one segment, ``**``
    matches any number of segments including none.
    """
    return _match(pattern.split("."), path.split("."))


def _match(pat, segs):
    if not pat:
        return not segs
    head = pat[0]
    if head == "**":
        return any(_match(pat[1:], segs[i:]) for i in range(len(segs) + 1))
    if not segs:
        return False
    return fnmatchcase(segs[0], head) and _match(pat[1:], segs[1:])


class ConfigDB:
    """Ordered ``(pattern, key, value)`` entries; the latest matching set wins."""

    def __init__(self):
        self.entries = []

    def set(self, pattern, key, value):
        self.entries.append((pattern, key, value))

    def lookup(self, path, key):
        """Return ``(found, value)``."""
        for pattern, k, value in reversed(self.entries):
            if k == key and glob_match(pattern, path):
                return True, value
        return False, None

    def get(self, path, key, default=None):
        found, value = self.lookup(path, key)
        return value if found else default

    def load_text(self, text, source="<config>"):
        """Apply ``pattern key value`` lines; ``#`` starts a comment."""
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split(None, 2)
            if len(parts) != 3:
                raise ValueError(f"{source}:{lineno}: expected 'pattern key value', got {raw!r}")
            pattern, key, value = parts
            self.set(pattern, key, parse_value(value))


def parse_value(text):
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(text, 0)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def config_set(db, pattern, key, value):
    db.set(pattern, key, value)


def config_get(db, path, key):
    return db.get(path, key)
