# Utils package
from .errors import (
    AvseError,
    CodecError,
    CoherenceWarning,
    ConfigError,
    EmptyPlayback,
    IncompleteLog,
    InsufficientInput,
    InvalidInput,
    ProtocolError,
    ShapeError,
    UndefinedMetric,
)
