"""Claim extraction toolkit for scientific abstracts.

Pretrain a Bi-LSTM CRF sentence tagger on discourse-structured abstracts,
transfer it to binary claim tagging, compare against rule-based and
embedding baselines, and serve predictions plus an expert annotation
workflow over HTTP.
"""

from . import baselines, corpus, crf, metrics, nn, tagger, text
from .errors import (
    CheckpointError,
    ClaimTaggerError,
    ContractError,
    FormatError,
    IntegrityError,
    NumericError,
)

__version__ = "0.1.0"
