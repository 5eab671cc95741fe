"""Online covering and packing with advice: PDLA, switching, l_q-sum solver, oracles."""
from .model import (
    AdviceProfile,
    Certificate,
    CoveringInstance,
    PackingInstance,
    RunMetrics,
    SolverTrace,
    SparseRow,
    dump_instance,
    load_instance,
)
from .objectives import (
    LinearConcave,
    LinearObjective,
    LqSumObjective,
    PowerNormObjective,
    SeparableConcave,
    Utility,
)
from .covering import PdlaConfig, certify_pdla, run_pdla
from .packing import GreedySaturation, OfflineReplay, PackingSubroutine, certify_switching, run_switching
from .lq import certify_lq, run_lq
from .oracles import offline_opt_covering, offline_opt_packing, weak_duality_check

__all__ = [
    "AdviceProfile",
    "Certificate",
    "CoveringInstance",
    "PackingInstance",
    "RunMetrics",
    "SolverTrace",
    "SparseRow",
    "dump_instance",
    "load_instance",
    "LinearConcave",
    "LinearObjective",
    "LqSumObjective",
    "PowerNormObjective",
    "SeparableConcave",
    "Utility",
    "PdlaConfig",
    "certify_pdla",
    "run_pdla",
    "GreedySaturation",
    "OfflineReplay",
    "PackingSubroutine",
    "certify_switching",
    "run_switching",
    "certify_lq",
    "run_lq",
    "offline_opt_covering",
    "offline_opt_packing",
    "weak_duality_check",
]

__version__ = "0.1.0"
