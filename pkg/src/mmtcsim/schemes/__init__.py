"""Access scheme implementations behind one engine-facing interface.

Every scheme consumes the devices dispatched to it each TTI and reports
successes and failures back to the engine; frame-oriented schemes buffer
devices across TTIs. Schemes are selected by name through the registry.
"""

from __future__ import annotations

from ..core import ArqConfig, Scheme, SchemeReport
from .aloha import NotaftScheme, SlottedAlohaScheme
from .baseline import MultiStageBaselineScheme
from .ccra import CcraScheme
from .craplnc import CraplncScheme
from .ostsap import OneStageScheme, TwoStageScheme
from .sbaia import SbaiaScheme
from .scf import ScfScheme

SCHEME_REGISTRY = {
    "slotted-aloha": SlottedAlohaScheme,
    "one-stage": OneStageScheme,
    "two-stage": TwoStageScheme,
    "multi-stage-baseline": MultiStageBaselineScheme,
    "notaft": NotaftScheme,
    "sbaia": SbaiaScheme,
    "craplnc": CraplncScheme,
    "ccra": CcraScheme,
    "scf": ScfScheme,
}


def make_scheme(name: str, params: dict, arq: ArqConfig, seed: int) -> Scheme:
    """Instantiate a registered scheme; unknown names list the valid ones."""
    try:
        cls = SCHEME_REGISTRY[name]
    except KeyError:
        known = ", ".join(sorted(SCHEME_REGISTRY))
        raise ValueError(f"unknown scheme {name!r}; known schemes: {known}") from None
    return cls(dict(params), arq, seed)


def scheme_names() -> list:
    return sorted(SCHEME_REGISTRY)


__all__ = [
    "SCHEME_REGISTRY",
    "make_scheme",
    "scheme_names",
    "Scheme",
    "SchemeReport",
]
