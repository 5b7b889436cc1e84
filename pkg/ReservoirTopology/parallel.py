import logging
from typing import Callable, Iterable, List, Optional

from joblib import Parallel, delayed
from joblib.parallel import cpu_count

from . import config

logger = logging.getLogger(__name__)


def parallel_map(function: Callable, inputs: Iterable, n_jobs: Optional[int] = None,
                 threading: bool = False) -> List:
    """Map `function` over `inputs`, in order, with joblib workers.

    `n_jobs` defaults to the RESERVOIR_TOPO_THREADS setting; 1 runs in-process.
    """
    inputs = list(inputs)
    if n_jobs is None:
        n_jobs = config.get_thread_count()
    if n_jobs == 1 or len(inputs) <= 1:
        return [function(item) for item in inputs]
    n_jobs = cpu_count() if n_jobs < 0 else min(cpu_count(), n_jobs)
    logger.debug(f"Dispatching {len(inputs)} tasks to {n_jobs} workers")
    if threading:
        return Parallel(n_jobs=n_jobs, backend="threading")(delayed(function)(item) for item in inputs)
    return Parallel(n_jobs=n_jobs)(delayed(function)(item) for item in inputs)
