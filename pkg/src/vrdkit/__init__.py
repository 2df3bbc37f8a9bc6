"""Layout-aware information extraction for visually rich documents."""

from .docmodel import (
    CorpusError,
    Document,
    Page,
    Span,
    TextBox,
    TokenSequence,
    Vocabulary,
    build_vocab,
    merge_close_boxes,
    parse_corpus,
    project_labels,
    serialize_corpus,
    tokenize,
)
from .estimator import VrdExtractor
from .extractor import ExtractorOptions, Model

__all__ = [
    "CorpusError",
    "Document",
    "Page",
    "Span",
    "TextBox",
    "TokenSequence",
    "Vocabulary",
    "build_vocab",
    "merge_close_boxes",
    "parse_corpus",
    "project_labels",
    "serialize_corpus",
    "tokenize",
    "VrdExtractor",
    "ExtractorOptions",
    "Model",
]

__version__ = "0.1.0"
