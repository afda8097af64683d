"""Toolkit for finding topic-related webpages in large scraped corpora.

The pipeline: ingest or generate a corpus of labeled URLs, fetch and extract
page text, split pages into token-bounded chunks, build train/test splits
with negative sampling, train baseline or backend-served classifiers, score
chunks, aggregate to document labels, and evaluate under class imbalance.
"""

__version__ = "0.1.0"

from webtopic.errors import BackendError, CorpusError, InputError, ProtocolError, TransportError

__all__ = [
    "BackendError",
    "CorpusError",
    "InputError",
    "ProtocolError",
    "TransportError",
    "__version__",
]
