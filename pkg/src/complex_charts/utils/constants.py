"""Constants to be used throughout the complex-charts package."""
import os
from dataclasses import dataclass

# magic bytes & version of the binary field container
FIELD_MAGIC = b"NNCF"
FIELD_VERSION = 1


@dataclass(frozen=True)
class Tolerances:
    """Default numerical tolerances.

    Attributes
    ----------
    validation : float
        Absolute tolerance on I^2 + 1 and on the antisymmetry of I_MN.
    integrability : float
        Absolute tolerance on the Nijenhuis tensor and on closedness.
    step_bound : float
        Largest max-norm deformation a single linearized step accepts.
    steps : int
        Default number of continuation steps.
    zero_mode : float
        Largest zero Fourier mode a dbar right-hand side may carry.
    degenerate : float
        Threshold below which frame and metric quantities count as singular.

    """

    validation: float = 1e-8
    integrability: float = 1e-6
    step_bound: float = 0.05
    steps: int = 8
    zero_mode: float = 1e-10
    degenerate: float = 1e-8


DEFAULTS = Tolerances()


def fft_workers() -> int:
    """Worker count for scipy.fft, capped by the THREADS variable."""
    threads = os.environ.get("THREADS", "")
    if threads.strip().isdigit() and int(threads) > 0:
        return int(threads)
    return 1
