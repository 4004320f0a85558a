"""Exception types shared across the toolkit.

Every error carries a short machine-parsable code; the CLI prints it as a
single-line ``CODE: message`` prefix and exits nonzero.
"""

from __future__ import annotations


class ToolError(Exception):
    """Base class for all toolkit errors."""

    code = "E_GENERIC"


class ManifestError(ToolError):
    """Malformed manifest line or utterance invariant violation."""

    code = "E_MANIFEST"


class CasingError(ToolError):
    """Text cannot be represented or inverted under the casing scheme."""

    code = "E_CASING"


class TagError(ToolError):
    """Malformed language-tag markup."""

    code = "E_TAGS"


class VocabError(ToolError):
    """Vocabulary construction or consistency failure."""

    code = "E_VOCAB"


class LmError(ToolError):
    """Language model training or query failure."""

    code = "E_LM"


class ArpaError(ToolError):
    """Malformed ARPA file."""

    code = "E_ARPA"


class LogitError(ToolError):
    """Malformed logit matrix or CSLG container."""

    code = "E_LOGITS"


class DecodeError(ToolError):
    """Decoder misconfiguration."""

    code = "E_DECODE"


class MetricError(ToolError):
    """Metric undefined for the given input (e.g. empty reference)."""

    code = "E_METRIC"


class LidError(ToolError):
    """Frame-level language-ID input failure."""

    code = "E_LID"


class PipelineError(ToolError):
    """Experiment pipeline misconfiguration or missing artifact."""

    code = "E_PIPELINE"
