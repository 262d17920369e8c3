"""Min-max construction of minimal hypersurfaces with boundary."""

from __future__ import annotations

import json
import logging
from pathlib import Path

from .const import DOMAIN

_LOGGER = logging.getLogger(__name__)


def _read_version() -> str:
    try:
        manifest = json.loads((Path(__file__).parent / "manifest.json").read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        _LOGGER.warning("Cannot read manifest.json: %s", err)
        return "0.0.0"
    return str(manifest.get("version", "0.0.0"))


__version__ = _read_version()

__all__ = ["DOMAIN", "__version__"]
