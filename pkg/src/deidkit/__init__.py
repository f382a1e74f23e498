"""deidkit: end-to-end de-identification for clinical narrative text.

Three components: annotation (revisioned store + inter-annotator
agreement), modelling (pluggable base taggers combined by voting and
stacking ensembles), and redaction (surrogate replacement with leakage
audit), wired together by a CLI and an HTTP annotation service.
"""
from .textcore import (  # noqa: F401
    BIO_TAGS,
    CATEGORIES,
    BioSequence,
    Document,
    PiiSpan,
    Token,
    bio_to_spans,
    repair_bio,
    spans_to_bio,
    tokenize,
)

__version__ = "0.1.0"
