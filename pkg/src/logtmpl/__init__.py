"""Online log template extraction with keyword buckets, punctuation-vector recall
and entropy-gated LCS matching."""

__version__ = "0.1.0"
