"""Exception classes shared across the package.

The CLI maps these onto distinct exit codes (config=2, data=3, runtime=4),
so raising the right class matters more than the message format.
"""


class ConceptLMError(Exception):
    """Base class for all package errors."""


class ConfigError(ConceptLMError):
    """Invalid or missing configuration (files, keys, flag values)."""


class DataError(ConceptLMError):
    """Malformed or insufficient input data (lexicons, record files, splits)."""


class TransportError(ConceptLMError):
    """Concept-service transport failure after retries.

    Carries the originating query so failed extractions can be retried
    or stubbed out via a cassette.
    """

    def __init__(self, message, query=None):
        super().__init__(message)
        self.query = query
