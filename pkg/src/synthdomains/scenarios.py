"""
Domain profiles and ordered-pair scenarios

Three synthetic profiles play the part of three recording environments; each
ordered pair (source profile, target profile) is one adaptation scenario.
"""
from dataclasses import dataclass
from itertools import permutations
from typing import Dict, List, Optional

from errors import ConfigError
from synthdomains.schemas import DomainSpec


@dataclass(frozen=True)
class DomainProfile:
    name: str
    style: float  # position along the shift axis; farther apart means larger shift
    negative_fraction: float


PROFILES: Dict[str, DomainProfile] = {
    "D1": DomainProfile("D1", style=0.0, negative_fraction=0.15),
    "D2": DomainProfile("D2", style=1.0, negative_fraction=0.2),
    "D3": DomainProfile("D3", style=2.0, negative_fraction=0.25),
}

DEFAULT_SCENARIO = "default"


def scenario_names() -> List[str]:
    """The six ordered pairs, e.g. D1_D2"""
    return [f"{s}_{t}" for s, t in permutations(sorted(PROFILES), 2)]


def scenario_spec(source: str, target: str, base: Optional[DomainSpec] = None) -> DomainSpec:
    """
    Spec for adapting from profile ``source`` to profile ``target``
    
    The shift grows with the style distance between the profiles, and the
    direction of the shift differs per ordered pair through the seed.
    """
    if source not in PROFILES or target not in PROFILES:
        raise ConfigError(f"unknown profile pair {source}->{target}; known: {sorted(PROFILES)}")
    if source == target:
        raise ConfigError("a scenario needs two different profiles")
    base = base or DomainSpec()
    src, tgt = PROFILES[source], PROFILES[target]
    factor = 0.75 + 0.25 * abs(tgt.style - src.style)
    shifts = [base.shift_for(k) * factor for k in range(base.num_modalities)]
    pair_index = scenario_names().index(f"{source}_{target}")
    return base.model_copy(update={
        "shift": shifts,
        "source_negative_fraction": src.negative_fraction,
        "target_negative_fraction": tgt.negative_fraction,
        "seed": base.seed + 1000 * (pair_index + 1),
    })


def spec_for_scenario(name: str, base: Optional[DomainSpec] = None) -> DomainSpec:
    """Resolve a scenario name (``default`` or ``D1_D2`` style)"""
    if name == DEFAULT_SCENARIO:
        return base or DomainSpec()
    parts = name.split("_")
    if len(parts) != 2:
        raise ConfigError(f"scenario must look like D1_D2, got '{name}'")
    return scenario_spec(parts[0], parts[1], base)
