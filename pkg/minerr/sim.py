# external imports
import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from tqdm import tqdm

# internal imports
from .numkit import lu_solve
from .exprlang import EvalError
from .observer import (
    ObserverState,
    ActiveGains,
    ValidationFailure,
    q_upper,
    q_lower,
    observer_rhs,
    error_rhs_oracle,
    validate_gains,
    map_frames_to_original,
    map_initial_frames,
)
from .model import EnvelopeViolation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimParams:
    """Fixed-step integration parameters.

    Attributes
    ----------
    dt : float
        The step size (seconds). Default is 1e-3.
    t_end : float
        The horizon (seconds). Default is 20.
    record_stride : int
        Record every record_stride-th step. Default is 1.
    divergence_threshold : float
        A state entry above this magnitude stops the run as diverged.
        Default is 1e12.
    """

    dt: float = 1e-3
    t_end: float = 20.0
    record_stride: int = 1
    divergence_threshold: float = 1e12

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError("Step size dt must be positive, got {}.".format(self.dt))
        if not (self.t_end > 0 and np.isfinite(self.t_end)):
            raise ValueError("Horizon t_end must be positive, got {}.".format(self.t_end))
        if self.dt > self.t_end:
            raise ValueError("Step size dt={} exceeds the horizon t_end={}.".format(self.dt, self.t_end))
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer, got {}.".format(self.record_stride))
        if not self.divergence_threshold > 0:
            raise ValueError("divergence_threshold must be positive.")

    @property
    def steps(self):
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True)
class Completed:
    def to_dict(self):
        return {"status": "Completed"}

    def __str__(self):
        return "Completed"


@dataclass(frozen=True)
class Diverged:
    t_escape: float

    def to_dict(self):
        return {"status": "Diverged", "t_escape": self.t_escape}

    def __str__(self):
        return "Diverged"


@dataclass(frozen=True)
class Aborted:
    """A run stopped by an envelope violation or an evaluation error."""

    t: float
    reason: str

    def to_dict(self):
        return {"status": "Aborted", "t": self.t, "reason": self.reason}

    def __str__(self):
        return "Aborted"


def rk4_step(f, t, state, dt):
    """Classical fourth order Runge-Kutta step.

    Parameters
    ----------
    f : callable
        The vector field f(t, state).
    t : float
        The current time.
    state : numpy.ndarray
        The current state.
    dt : float
        The step size.

    Returns
    ----------
    numpy.ndarray
        The state at t + dt.
    """

    k1 = f(t, state)
    k2 = f(t + dt / 2, state + dt / 2 * k1)
    k3 = f(t + dt / 2, state + dt / 2 * k2)
    k4 = f(t + dt, state + dt * k3)

    return state + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A recorded run of the plant and the interval observer.

    Attributes
    ----------
    times : numpy.ndarray
        Sample times, shape (N,).
    x, xbar, xlower : numpy.ndarray
        The state and the frames in the original coordinates, shape (N, n).
    upper_idx, lower_idx : numpy.ndarray
        The active (1-based) gain indices per row, shape (N, n).
    status : Completed, Diverged or Aborted
    diagnostics : dict
        Steps taken, envelope checks performed and wall-clock seconds.
    name : str
    """

    times: np.ndarray
    x: np.ndarray
    xbar: np.ndarray
    xlower: np.ndarray
    upper_idx: np.ndarray
    lower_idx: np.ndarray
    status: object = field(default_factory=Completed)
    diagnostics: dict = field(default_factory=dict)
    name: str = "scenario"

    @property
    def n(self):
        return self.x.shape[1]

    def __len__(self):
        return self.times.shape[0]

    def errors(self):
        """Returns (xbar - x, x - xlower)."""
        return self.xbar - self.x, self.x - self.xlower

    def active_gains(self, sample):
        return ActiveGains(self.upper_idx[sample], self.lower_idx[sample])


@dataclass(frozen=True, eq=False)
class ErrorTrajectory:
    """A run of the direct frame error dynamics, next to the plant."""

    times: np.ndarray
    x: np.ndarray
    ebar: np.ndarray
    elower: np.ndarray
    status: object = field(default_factory=Completed)
    diagnostics: dict = field(default_factory=dict)
    name: str = "scenario"

    def __len__(self):
        return self.times.shape[0]

    def errors(self):
        return self.ebar, self.elower


class _FixedStepRun:
    """Shared stepping loop: one RK4 step of the stacked state per dt, the
    envelope checked at each step time, samples recorded every
    record_stride steps, divergence and evaluation errors stopping the run
    with a status. Subclasses provide rhs(), _initial_state() and _record()."""

    description = "Simulating"

    def __init__(self, scenario):
        self.scenario = scenario
        self.params = scenario.sim
        self.n = scenario.n

        self.state = self._initial_state()
        self.samples = []
        self.times = []
        self.status = None
        self.diagnostics = {"steps": 0, "envelope_checks": 0, "wall_seconds": 0.0}

    def rhs(self, t, state):
        raise NotImplementedError

    def _initial_state(self):
        raise NotImplementedError

    def _record(self, t, state):
        raise NotImplementedError

    def _diverged(self, state):
        return not np.all(np.isfinite(state)) or np.max(np.abs(state)) > self.params.divergence_threshold

    def run(self, progressbar=False):
        """
        Parameters
        ----------
        progressbar : bool, optional
            Whether to draw a progressbar. Default is False.

        Returns
        ----------
        The trajectory. On EnvelopeViolation or EvalError the partial
        trajectory stays available through trajectory(), with an Aborted
        status, and the error is raised.
        """

        dt = self.params.dt
        steps = self.params.steps
        stride = self.params.record_stride
        envelope = self.scenario.envelope

        logger.info("%s %s: %d steps of dt=%g.", self.description, self.scenario.name, steps, dt)
        start = time.perf_counter()

        # set up a progressbar, if required.
        if progressbar:
            pbar = tqdm(range(steps), desc="{} {}".format(self.description, self.scenario.name))
        else:
            pbar = range(steps)

        state = self.state
        t = 0.0
        try:
            envelope.check(t)
            self.diagnostics["envelope_checks"] += 1
            self._record(t, state)

            for k in pbar:
                t = k * dt
                if k > 0:
                    envelope.check(t)
                    self.diagnostics["envelope_checks"] += 1

                # evaluation errors carry the stage time.
                state = rk4_step(self.rhs, t, state, dt)
                self.diagnostics["steps"] += 1
                t = (k + 1) * dt

                # a diverged state is always recorded, whatever the stride.
                if self._diverged(state):
                    self.state = state
                    self.status = Diverged(t)
                    with np.errstate(all="ignore"):
                        self._record(t, state)
                    logger.info("%s diverged at t=%g.", self.scenario.name, t)
                    break

                if (k + 1) % stride == 0:
                    self._record(t, state)
            else:
                self.state = state
                self.status = Completed()

        except (EnvelopeViolation, EvalError) as err:
            self.state = state
            self.status = Aborted(t, str(err))
            logger.warning("%s aborted at t=%g: %s", self.scenario.name, t, err)
            raise

        finally:
            # close the progressbar if it was initialised.
            if progressbar:
                pbar.close()
            self.diagnostics["wall_seconds"] = time.perf_counter() - start

        return self.trajectory()


class Simulation(_FixedStepRun):
    """Simulation integrates the plant and the interval observer jointly,
    as one stacked state (x, xbar, xlower) of dimension 3n. If the scenario
    has a coordinate change R, the plant runs in x and the observer in
    z = R x; recorded frames are mapped back to x.

    Attributes
    ----------
    scenario : minerr.Scenario
        The scenario being simulated.
    plant, envelope : the plant and envelope in the observer's coordinates.
    state : numpy.ndarray
        The current stacked state.
    status : Completed, Diverged, Aborted or None (not run yet).

    Methods
    ----------
    rhs(t, state)
        The stacked vector field.
    run(progressbar=False)
        Integrates up to the horizon and returns the Trajectory.
    trajectory()
        Returns the (possibly partial) recorded Trajectory.
    """

    def __init__(self, scenario):
        """
        Parameters
        ----------
        scenario : minerr.Scenario
            The scenario to simulate.
        """

        # internalise the observer's view of the system.
        self.plant = scenario.observer_plant()
        self.envelope = scenario.observer_envelope()
        self.gains = scenario.gains
        self.S = None if scenario.transform is None else lu_solve(scenario.transform, np.eye(scenario.n))

        self.upper_idx = []
        self.lower_idx = []

        super().__init__(scenario)

    def _initial_state(self):
        s = self.scenario
        if s.transform is None:
            zbar0, zlower0 = s.xbar0, s.xlower0
        else:
            zbar0, zlower0 = map_initial_frames(s.transform, s.xbar0, s.xlower0)
        return np.concatenate([s.x0, zbar0, zlower0])

    def rhs(self, t, state):
        n = self.n
        x, zbar, zlower = state[:n], state[n : 2 * n], state[2 * n :]

        # the observer only sees y and u.
        u = self.scenario.plant.input(t)
        y = self.scenario.plant.output(x)

        dx = self.scenario.plant.rhs(self.scenario.envelope, t, x, u)
        dzbar, dzlower, _ = observer_rhs(
            self.plant, self.envelope, self.gains, t, ObserverState(zbar, zlower), u, y
        )
        return np.concatenate([dx, dzbar, dzlower])

    def _record(self, t, state):
        n = self.n
        x, zbar, zlower = state[:n], state[n : 2 * n], state[2 * n :]
        y = self.scenario.plant.output(x)

        self.times.append(t)
        self.samples.append(state.copy())
        self.upper_idx.append(q_upper(self.gains, zbar, y, self.plant.C)[1])
        self.lower_idx.append(q_lower(self.gains, zlower, y, self.plant.C)[1])

    def trajectory(self):
        n = self.n
        samples = np.array(self.samples).reshape(-1, 3 * n)
        x, zbar, zlower = samples[:, :n], samples[:, n : 2 * n], samples[:, 2 * n :]

        if self.S is None:
            xbar, xlower = zbar, zlower
        else:
            xbar, xlower = map_frames_to_original(self.S, zbar, zlower)

        return Trajectory(
            times=np.array(self.times),
            x=x,
            xbar=xbar,
            xlower=xlower,
            upper_idx=np.array(self.upper_idx, dtype=int).reshape(-1, n),
            lower_idx=np.array(self.lower_idx, dtype=int).reshape(-1, n),
            status=self.status if self.status is not None else Completed(),
            diagnostics=dict(self.diagnostics),
            name=self.scenario.name,
        )


class ErrorSimulation(_FixedStepRun):
    """ErrorSimulation integrates the plant jointly with the direct frame
    error dynamics (ebar, elower), as a cross-check of Simulation."""

    description = "Simulating errors of"

    def __init__(self, scenario):
        if scenario.transform is not None:
            raise ValueError("The error oracle is defined for untransformed scenarios only.")
        super().__init__(scenario)

    def _initial_state(self):
        s = self.scenario
        return np.concatenate([s.x0, s.xbar0 - s.x0, s.x0 - s.xlower0])

    def rhs(self, t, state):
        n = self.n
        x, ebar, elower = state[:n], state[n : 2 * n], state[2 * n :]
        plant = self.scenario.plant

        u = plant.input(t)
        y = plant.output(x)

        dx = plant.rhs(self.scenario.envelope, t, x, u)
        debar, delower = error_rhs_oracle(plant, self.scenario.envelope, self.scenario.gains, t, ebar, elower, y)
        return np.concatenate([dx, debar, delower])

    def _record(self, t, state):
        self.times.append(t)
        self.samples.append(state.copy())

    def trajectory(self):
        n = self.n
        samples = np.array(self.samples).reshape(-1, 3 * n)
        return ErrorTrajectory(
            times=np.array(self.times),
            x=samples[:, :n],
            ebar=samples[:, n : 2 * n],
            elower=samples[:, 2 * n :],
            status=self.status if self.status is not None else Completed(),
            diagnostics=dict(self.diagnostics),
            name=self.scenario.name,
        )


def check_gains(scenario, force=False):
    """Runs validate_gains on the scenario's observer coordinates. With
    force=True a failure only warns.

    Returns
    ----------
    minerr.GainReport
        The report (also on a forced failure).
    """

    try:
        return validate_gains(scenario.observer_plant(), scenario.gains)
    except ValidationFailure as failure:
        if not force:
            raise
        warnings.warn(" Gain validation failed ({}), simulating anyway.".format(failure))
        return failure.report


def simulate(scenario, validate=True, force=False, progressbar=False):
    """Simulates the plant and the interval observer of a scenario.

    Parameters
    ----------
    scenario : minerr.Scenario
        The scenario.
    validate : bool, optional
        Whether to check the gain hypotheses first. Default is True.
    force : bool, optional
        Whether to simulate despite failed gain hypotheses (with a
        warning). Default is False.
    progressbar : bool, optional
        Whether to draw a progressbar. Default is False.

    Returns
    ----------
    minerr.Trajectory
        The recorded trajectory, with status Completed or Diverged.
    """

    if validate:
        check_gains(scenario, force)
    return Simulation(scenario).run(progressbar)


def simulate_error_oracle(scenario, progressbar=False):
    """Simulates the plant together with the direct error dynamics, on the
    same time grid as simulate().

    Parameters
    ----------
    scenario : minerr.Scenario
        An untransformed scenario.
    progressbar : bool, optional
        Whether to draw a progressbar. Default is False.

    Returns
    ----------
    minerr.ErrorTrajectory
        The recorded errors.
    """

    return ErrorSimulation(scenario).run(progressbar)
