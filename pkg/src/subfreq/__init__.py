"""Word-frequency norms from subtitle corpora, and their psycholinguistic evaluation."""

__version__ = "0.1.0"
