"""Exception hierarchy shared by the library and the CLI"""


class FountainError(Exception):
    """Base class for every error raised by slidingfountain"""


class ConfigError(FountainError, ValueError):
    """Invalid configuration or experiment file"""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")


class EncodingError(FountainError, ValueError):
    """Data handed to the encoder does not match its configuration"""


class OrderingError(FountainError, ValueError):
    """Decoder input arrived out of sequence order or twice"""


class DecodingFault(FountainError, RuntimeError):
    """The decoder reached an impossible state (inconsistent system, wrong symbol value)"""


class UndefinedRunError(FountainError, ValueError):
    """Metrics requested for a run that transmitted nothing"""
