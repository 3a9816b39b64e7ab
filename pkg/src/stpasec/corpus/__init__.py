"""The bundled digital-key case study."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

CORPUS_FILE = "digital_key.stpa"


def corpus_path() -> Path:
    return Path(str(resources.files(__name__).joinpath(CORPUS_FILE)))


def corpus_source() -> str:
    return resources.files(__name__).joinpath(CORPUS_FILE).read_text(encoding="utf-8")


def load_corpus():
    from ..dsl import parse_model

    model, diagnostics = parse_model(corpus_source(), CORPUS_FILE)
    if model is None:
        raise RuntimeError("bundled corpus failed validation:\n" + "\n".join(d.format() for d in diagnostics))
    return model
