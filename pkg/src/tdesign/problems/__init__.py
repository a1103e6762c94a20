"""Shipped problem files reproducing the worked examples."""

from importlib import resources

_PACKAGE = __name__


def names() -> list[str]:
    out = []
    for entry in resources.files(_PACKAGE).iterdir():
        if entry.name.endswith(".txt"):
            out.append(entry.name[: -len(".txt")])
    return sorted(out)


def load(name: str) -> str:
    path = resources.files(_PACKAGE) / f"{name}.txt"
    if not path.is_file():
        raise KeyError(f"no shipped problem named {name!r}; available: {', '.join(names())}")
    return path.read_text()
