import ray

# internal imports
from .sim import Simulation


class ParallelSimulation:

    """ParallelSimulation runs one Simulation per scenario as Ray actors.

    Attributes
    ----------
    scenarios : list
        The scenarios to simulate.
    remote_simulations : list
        List of Ray actors, each running one Simulation.

    Methods
    -------
    run(progressbar=False)
        Runs every simulation and returns the trajectories in order.
    """

    def __init__(self, scenarios):
        """
        Parameters
        ----------
        scenarios : list
            List of minerr.Scenario instances.
        """

        # internalise the scenarios.
        self.scenarios = list(scenarios)

        # initialise Ray.
        ray.init(ignore_reinit_error=True)

        # set up the simulations as Ray actors.
        self.remote_simulations = [RemoteSimulation.remote(scenario) for scenario in self.scenarios]

    def run(self, progressbar=False):
        """
        Parameters
        ----------
        progressbar : bool, optional
            Whether to draw a progressbar, default is False, since Ray
            and tqdm do not play very well together.

        Returns
        ----------
        list
            The minerr.Trajectory of each scenario.
        """

        # start the simulations and fetch the results.
        processes = [simulation.run.remote(progressbar) for simulation in self.remote_simulations]
        self.trajectories = ray.get(processes)
        return self.trajectories


@ray.remote
class RemoteSimulation(Simulation):
    def run(self, progressbar):
        return super().run(progressbar)
