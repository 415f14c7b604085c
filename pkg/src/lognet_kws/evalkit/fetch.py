"""Download and unpack the Speech Commands archive (only the four command folders)."""

from __future__ import annotations

import hashlib
import logging
import os
import shutil
import tarfile
import tempfile
import urllib.request
from pathlib import Path

from ..lognet import DEFAULT_LABELS

log = logging.getLogger(__name__)

DEFAULT_URL = "http://download.tensorflow.org/data/speech_commands_v0.02.tar.gz"
DATA_ENV = "LOGNET_KWS_DATA"


def default_data_dir() -> Path:
    """``$LOGNET_KWS_DATA`` or ``~/.cache/lognet_kws/speech_commands``."""
    env = os.environ.get(DATA_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "lognet_kws" / "speech_commands"


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _wanted(member: tarfile.TarInfo, labels) -> bool:
    name = member.name.lstrip("./")
    parts = Path(name).parts
    if not member.isfile() or len(parts) != 2 or parts[0] not in labels:
        return False
    return parts[1].endswith(".wav") and ".." not in parts


def fetch_dataset(dest=None, url=DEFAULT_URL, sha256=None, labels=DEFAULT_LABELS,
                  force=False) -> Path:
    """Ensure ``dest/<label>/*.wav`` exists for every label; return ``dest``.

    Skips the download when all folders are already present (unless
    ``force``). ``url`` may also be a ``file://`` URL or a local path.
    """
    dest = Path(dest) if dest is not None else default_data_dir()
    if not force and all((dest / lab).is_dir() and any((dest / lab).glob("*.wav")) for lab in labels):
        log.info("dataset already present at %s", dest)
        return dest
    dest.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=dest) as tmp:
        archive = Path(tmp) / "archive.tar.gz"
        if os.path.exists(url):
            shutil.copyfile(url, archive)
        else:
            log.info("downloading %s", url)
            with urllib.request.urlopen(url) as resp, open(archive, "wb") as out:
                shutil.copyfileobj(resp, out)
        if sha256 is not None and sha256_of(archive) != sha256:
            raise ValueError(f"checksum mismatch for {url}")
        staging = Path(tmp) / "extract"
        with tarfile.open(archive, "r:*") as tar:
            members = [m for m in tar.getmembers() if _wanted(m, labels)]
            if not members:
                raise ValueError(f"{url} contains none of the folders {labels}")
            for m in members:
                m.name = m.name.lstrip("./")
                tar.extract(m, staging)
        for lab in labels:
            src = staging / lab
            if not src.is_dir():
                raise ValueError(f"archive has no '{lab}' folder")
            target = dest / lab
            if target.exists():
                shutil.rmtree(target)
            os.replace(src, target)
    return dest
