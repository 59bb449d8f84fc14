"""Tunable numerical constants.

Every tolerance used by the library lives here so that experiment manifests
can record them verbatim.
"""

from dataclasses import dataclass, asdict


@dataclass(frozen=True)
class ModularConfig:
    q_guard: float = 1e-3            # reject |q| > 1 - q_guard
    series_rtol: float = 1e-18       # truncation of theta series
    min_im: float = 1e-6             # near-real rejection threshold
    max_reduction_steps: int = 64


@dataclass(frozen=True)
class ProfileConfig:
    fd_step: float = 1e-4            # central-difference step factor
    even_rtol: float = 1e-12
    audit_jmax: int = 20             # dyadic audit grid x = 2**j
    plateau_atol: float = 1e-12
    log_integral_rtol: float = 1e-8


@dataclass(frozen=True)
class CharConfig:
    rtol_ab: float = 1e-6
    rtol_so: float = 1e-4
    pole_snap: float = 1e-8
    big: float = 1e12                # |f| above this is evaluated through 1/f
    theta_floor: float = 2.0 ** -40


@dataclass(frozen=True)
class MapConfig:
    nodes: int = 1024
    x_max: float = 2.0 ** 12
    newton_tol: float = 1e-10
    newton_maxiter: int = 60
    fixed_point_tol: float = 1e-13
    fixed_point_maxiter: int = 400


@dataclass(frozen=True)
class WosConfig:
    shell: float = 1e-4
    max_steps: int = 100_000


MODULAR = ModularConfig()
PROFILE = ProfileConfig()
CHAR = CharConfig()
MAP = MapConfig()
WOS = WosConfig()


def as_dict() -> dict:
    return {
        "modular": asdict(MODULAR),
        "profile": asdict(PROFILE),
        "char": asdict(CHAR),
        "map": asdict(MAP),
        "wos": asdict(WOS),
    }
