"""IHC quantification pipeline bindings."""

from ._core import (
    Error,
    adjust,
    decode,
    encode_png,
    fixture_from_spec,
    optical_density,
    process,
    random_fixture,
    unmix,
)

__all__ = [
    "Error",
    "adjust",
    "decode",
    "encode_png",
    "fixture_from_spec",
    "optical_density",
    "process",
    "random_fixture",
    "unmix",
]
