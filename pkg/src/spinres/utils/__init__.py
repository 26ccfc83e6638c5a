import hashlib
import importlib.metadata
import os
import string
import tempfile
from pathlib import Path

_VALID_CHARS = frozenset(f"-_.{string.ascii_letters}{string.digits}")


def is_prod() -> bool:
    """Is spinres running without DEBUG=1?"""
    return os.getenv("DEBUG") != "1"


def get_spinres_version() -> str:
    try:
        return importlib.metadata.version("spinres")
    except importlib.metadata.PackageNotFoundError:
        # running from a source checkout
        return "0+unknown"


def slugify(s: str) -> str:
    """
    :param s: string to slugify
    :return: a clean string for filenames
    """

    return "".join(char if char in _VALID_CHARS else "_" for char in s)


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def atomic_write_text(path: Path, text: str) -> None:
    """Write through a temporary file in the same directory, then rename over path"""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
