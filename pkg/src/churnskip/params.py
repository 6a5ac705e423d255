"""Simulation parameters and the constants derived from the network size.

Every polylog constant used anywhere in the protocol or its audits is pinned
here so that runs are reproducible and the acceptance tolerances are frozen
in one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConfigError


def log2n(n: int) -> float:
    return math.log2(max(2, n))


def ceil_log2(n: int) -> int:
    return max(1, math.ceil(log2n(n)))


def butterfly_k(n: int, c_comm: float) -> int:
    """Largest k with k * 2^k committees of ~c_comm*log2(n) members, or 0.

    k = 0 means the degenerate single-committee overlay used below the
    smallest viable size.
    """
    budget = n / (c_comm * log2n(n))
    k = 0
    while (k + 1) * 2 ** (k + 1) <= budget:
        k += 1
    return k


@dataclass(frozen=True)
class SimParams:
    n: int
    seed_adv: int = 1
    seed_alg: int = 2
    p: float = 0.5                 # level-promotion coin
    c_msg: float = 4.0             # per-node per-round message cap factor (x log^2 n)
    c_comm: float = 2.0            # committee size target factor (x log n)
    c_lo: float = 1.0              # committee lower audit bound factor (x log n)
    c_hi_mean: float = 2.0         # committee upper audit bound factor (x mean size)
    beta_bootstrap: float = 16.0   # bootstrap rounds B = beta * log2 n
    c_churn: float = 1.0           # admissible churn-rate cap factor (x n / log n)
    alpha_reshape: float = 1.5     # grow threshold (x c_comm log n)
    beta_reshape: float = 0.5      # shrink threshold (x c_comm log n)
    c_cycle: float = 4.0           # cycle round budget factor (x log^2 n)
    c_del: float = 8.0             # delete-phase round bound factor (x log n)
    c_wave: float = 12.0           # merge-phase round bound factor (x log n)

    strategy: str = "uniform_random"
    churn_rate: int = 0
    horizon_cycles: int = 10
    query_density: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n", "must be >= 1")
        if not 0.0 < self.p < 1.0:
            raise ConfigError("p", "must be in (0, 1)")
        if self.churn_rate < 0:
            raise ConfigError("churn_rate", "must be >= 0")
        if self.churn_rate > self.churn_cap:
            raise ConfigError("churn_rate", f"{self.churn_rate} exceeds cap {self.churn_cap}")
        if not 0.0 <= self.query_density <= 1.0:
            raise ConfigError("query_density", "must be in [0, 1]")

    # -- derived quantities -------------------------------------------------

    @property
    def message_cap(self) -> int:
        """Per-node per-round send/receive cap; also the payload bit budget."""
        return max(16, int(self.c_msg * log2n(self.n) ** 2))

    @property
    def churn_cap(self) -> int:
        return math.floor(self.c_churn * self.n / log2n(self.n))

    @property
    def bootstrap_rounds(self) -> int:
        return math.ceil(self.beta_bootstrap * log2n(self.n))

    @property
    def k(self) -> int:
        return butterfly_k(self.n, self.c_comm)

    @property
    def committee_count(self) -> int:
        k = self.k
        return k * 2 ** k if k >= 1 else 1

    @property
    def committee_mean(self) -> float:
        return self.n / self.committee_count

    @property
    def committee_lo(self) -> int:
        return max(1, math.floor(self.c_lo * log2n(self.n)))

    @property
    def committee_hi(self) -> int:
        return math.ceil(self.c_hi_mean * self.committee_mean)

    @property
    def tick_period(self) -> int:
        return max(1, math.ceil(2 * math.log2(max(2.0, log2n(self.n)))))

    @property
    def id_space(self) -> int:
        return max(64, self.n ** 3)

    @property
    def alpha_window(self) -> int:
        """Back-shift of the competitiveness window, alpha = 2 log2 n."""
        return 2 * ceil_log2(self.n)

    @property
    def beta_bound(self) -> float:
        """Competitiveness ratio bound, log2(n)^3."""
        return log2n(self.n) ** 3

    @property
    def cycle_budget(self) -> int:
        return math.ceil(self.c_cycle * log2n(self.n) ** 2)

    def with_overrides(self, **kw) -> "SimParams":
        return replace(self, **kw)
