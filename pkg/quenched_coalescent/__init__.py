__version__ = "0.1.0"

from .cannings_pedigree import Pedigree, build_model, pair_coalescence_prob
from .exceptions import ConfigurationError, ModelError, QuenchedCoalescentError, StatisticsError
from .genstats import DeltaModel, branch_spectrum, sfs_estimate, variance_decomposition
from .limit_coalescent import PsiPath, intensity_for_model, run_flow, run_jump_hold, run_naive
from .paintbox import Paintbox, paintbox_prob, sample_merger
from .partitions import GroupedPartition, Partition, coagulate
from .quenched_genealogy import run_locus, run_loci

__all__ = [
    "__version__",
    "Partition",
    "GroupedPartition",
    "coagulate",
    "Paintbox",
    "paintbox_prob",
    "sample_merger",
    "Pedigree",
    "build_model",
    "pair_coalescence_prob",
    "run_locus",
    "run_loci",
    "PsiPath",
    "intensity_for_model",
    "run_flow",
    "run_jump_hold",
    "run_naive",
    "DeltaModel",
    "branch_spectrum",
    "sfs_estimate",
    "variance_decomposition",
    "QuenchedCoalescentError",
    "ConfigurationError",
    "ModelError",
    "StatisticsError",
]
