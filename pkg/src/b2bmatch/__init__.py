"""Binary block-to-block distribution matching.

Modules:
    core      target distribution, bit strings, divergence arithmetic
    f2v       fixed-to-variable-length matcher codes
    one2one   optimal one-to-one block-to-block matcher baseline
    b2b       the epsilon-error block-to-block codec
    analysis  sweeps, converse bound, Monte Carlo, figure data
    cli       command-line front end
"""

__version__ = "0.1.0"

from .core import (
    Bits,
    FiniteDistribution,
    ResourceLimitError,
    TargetDistribution,
    binary_entropy,
    divergence,
    sequence_log_prob,
)

__all__ = [
    "Bits",
    "FiniteDistribution",
    "ResourceLimitError",
    "TargetDistribution",
    "__version__",
    "binary_entropy",
    "divergence",
    "sequence_log_prob",
]
