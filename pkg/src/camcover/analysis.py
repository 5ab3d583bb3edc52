"""Closed-form sampling theory for the configuration space.

Probability that a random sample of configurations contains the optimal
network, the expected sample count until it does, and the cardinality
bound on the discretized configuration space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class TheoryParams:
    """Shared parameters: N = |P x D|, budget beta, sample count n."""

    N: int
    beta: int
    n: int = 0
    p_count: int = 1
    epsilon: float = 2.0**-23

    def validate(self) -> None:
        if not 0 <= self.beta <= self.N:
            raise ValueError("need 0 <= beta <= N")
        if not 0 <= self.n <= self.N:
            raise ValueError("need 0 <= n <= N")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def prob_optimal_in_sample(n: int, N: int, beta: int) -> tuple[float, float]:
    """(exact probability, lower bound) that n uniform draws without
    replacement from N configurations contain all beta optimal ones.

    exact = prod_{i<beta} (n - i) / (N - i); bound = ((n-beta+1)/N)^beta.
    n < beta gives probability 0. Products switch to log space above
    N = 1000 to avoid overflow.
    """
    if beta == 0:
        return 1.0, 1.0
    if n < beta:
        return 0.0, 0.0
    if N > 1000:
        log_p = sum(math.log(n - i) - math.log(N - i) for i in range(beta))
        exact = math.exp(log_p)
    else:
        num = 1.0
        den = 1.0
        for i in range(beta):
            num *= n - i
            den *= N - i
        exact = num / den
    bound = max(0.0, (n - beta + 1) / N) ** beta
    return exact, bound


def expected_samples_to_optimal(N: int, beta: int) -> float:
    """Expected draws without replacement until all beta optimal
    configurations have appeared: beta / (beta + 1) * (N + 1)."""
    if not 1 <= beta <= N:
        raise ValueError("need 1 <= beta <= N")
    return beta / (beta + 1) * (N + 1)


def config_space_cardinality_bound(p_count: int, epsilon: float) -> float:
    """Upper bound |P| * 4*pi / epsilon^2 on the number of distinct
    camera configurations at direction resolution epsilon."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return p_count * 4.0 * math.pi / (epsilon * epsilon)
