# external imports
import logging
import warnings

# internal imports
from .sim import Simulation, check_gains

# check if ray is available and set a flag.
try:
    from .ray import *

    ray_is_available = True
except ModuleNotFoundError:
    ray_is_available = False

logger = logging.getLogger(__name__)


def simulate_batch(scenarios, validate=True, force=False, force_sequential=False, progressbar=False):
    """Simulates several scenarios, in parallel with Ray when it is
    available and more than one scenario is given.

    Parameters
    ----------
    scenarios : list
        List of minerr.Scenario instances.
    validate : bool, optional
        Whether to check the gain hypotheses of every scenario first.
        Default is True.
    force : bool, optional
        Whether to simulate despite failed gain hypotheses (with a
        warning). Default is False.
    force_sequential : bool, optional
        Whether to run sequentially even if Ray is available. Default is
        False.
    progressbar : bool, optional
        Whether to draw progressbars in sequential runs. Default is False.

    Returns
    ----------
    list
        The minerr.Trajectory of each scenario, in order.
    """

    scenarios = list(scenarios)
    if len(scenarios) == 0:
        raise ValueError("No scenarios to simulate.")

    # validate on the driver, so failures surface before any worker starts.
    if validate:
        for scenario in scenarios:
            check_gains(scenario, force)

    if len(scenarios) > 1 and not force_sequential:
        if ray_is_available:
            return _simulate_parallel(scenarios)
        warnings.warn(" Ray is not available, simulating sequentially.")

    return _simulate_sequential(scenarios, progressbar)


def _simulate_sequential(scenarios, progressbar):
    """Helper function for minerr.simulate_batch()"""

    trajectories = []
    for i, scenario in enumerate(scenarios):
        logger.info("Simulating scenario %d/%d (%s)", i + 1, len(scenarios), scenario.name)
        trajectories.append(Simulation(scenario).run(progressbar))
    return trajectories


def _simulate_parallel(scenarios):
    """Helper function for minerr.simulate_batch()"""

    logger.info("Simulating %d scenarios in parallel", len(scenarios))
    return ParallelSimulation(scenarios).run()
