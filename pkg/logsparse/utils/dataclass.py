from pydantic import TypeAdapter, ValidationError
from pydantic.dataclasses import ConfigDict, dataclass  # noqa: F401

from .log import error
from .errors import InvalidParams

__all__ = ["strict_record", "dataclass", "validate_as"]

# Parameter records reject unknown keys and non-finite numbers.
strict_record = ConfigDict(extra="forbid", str_strip_whitespace=True, allow_inf_nan=False, arbitrary_types_allowed=True)


def validate_as(kind: type, data: dict, caller: object = None, exc: type = InvalidParams):
    """
    Validates a plain mapping against a pydantic dataclass or model.

    :param kind:        Target type
    :param data:        Mapping, usually read from an ini section or a json document
    :param caller:      Used as the log prefix
    :param exc:         Exception raised on validation failure
    """
    try:
        return TypeAdapter(kind).validate_python(data)
    except ValidationError as e:
        details = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors())
        raise error(f"Invalid {getattr(kind, '__name__', 'record')}: {details}", caller, exc)
