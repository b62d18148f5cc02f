from __future__ import annotations

from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    cluster: float = 1e-8       # absolute gap on lambda when grouping eigenvalues of -T^2
    angle: float = 1e-6         # radians, for "lambda is 1 / 0" decisions and constant-theta verdicts
    spectrum: float = 1e-8      # allowed excursion of -T^2 eigenvalues outside [0, 1]
    rank: float = 1e-12         # smallest/largest Gram eigenvalue ratio
    structural: float = 1e-9    # metric block tests
    identity: float = 1e-8      # identities evaluated on the AD path
    fd: float = 1e-5            # identities that go through finite differences
    theta_guard: float = 1e-3   # keep theta away from 0 and pi/2 where sec/csc blow up
    margin: float = 1e-6        # allowed negative margin in the norm inequality
    fd_step: float = 1e-4       # central-difference step on the parameter chart

    def with_overrides(self, **kw) -> "Tolerances":
        kw = {k: v for k, v in kw.items() if v is not None}
        for k, v in kw.items():
            if not v > 0:
                raise ValueError(f"tolerance {k} must be positive, got {v}")
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULT = Tolerances()
