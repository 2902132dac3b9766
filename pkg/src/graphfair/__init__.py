"""Connected fair division of indivisible goods on item graphs."""

from .core import (
    AdditiveValuation,
    Allocation,
    Bundle,
    DomainError,
    FairDivisionError,
    Instance,
    IntervalTableValuation,
    ItemGraph,
    PreconditionError,
    TheoremViolation,
    ValidationError,
    identical_path_instance,
    is_ef1,
    is_ef2,
    is_efx,
    is_envy_free,
    path_instance,
    up_to_one_value,
    value,
)
from .graphs import (
    BlockTree,
    Trident,
    VertexOrdering,
    bipolar_numbering,
    block_decomposition,
    block_tree_is_path,
    disconnected_counterexample,
    is_bipolar,
    no_ef1_counterexample,
    trident,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
