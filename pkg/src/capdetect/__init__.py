"""Random quantum channels and a perturbative test for positive coherent information."""
from ._backend import BACKEND
from .channels import (
    ChoiMatrix,
    MinimalDims,
    QuantumChannel,
    apply,
    apply_complement,
    choi,
    choi_complement,
    from_choi,
    kraus,
    minimal_dims,
)
from .detection import (
    DetectConfig,
    DetectionReport,
    Verdict,
    coherent_information,
    detect,
    first_order_corrections,
    kernel_projector,
    max_rank_search,
    maximize_ic,
    perturbation_curve,
    trace_gap,
)
from .sampling import SeededStream, ginibre, gram_schmidt, haar_isometry, sample_channel

__version__ = "0.1.0"
