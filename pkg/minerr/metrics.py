# external imports
import logging
import math
import warnings
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import linregress

# internal imports
from .numkit import Certificate
from .sim import Completed

logger = logging.getLogger(__name__)

SIDES = ("upper", "lower")


def _check_side(side):
    if side not in SIDES:
        raise ValueError("Side must be 'upper' or 'lower', got {!r}.".format(side))


def _finite(value):
    # non-finite floats have no JSON form.
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def framer_violation(traj):
    """Returns the largest violation of xlower <= x <= xbar over all samples
    and components, or 0 if the frames hold.

    Parameters
    ----------
    traj : minerr.Trajectory
        A recorded trajectory.

    Returns
    ----------
    float
        max(xlower_i - x_i, x_i - xbar_i, 0) over samples and components.
    """

    with np.errstate(invalid="ignore"):
        below = np.nanmax(traj.xlower - traj.x, initial=0.0)
        above = np.nanmax(traj.x - traj.xbar, initial=0.0)
    return float(max(below, above, 0.0))


def interval_widths(traj):
    """Returns xbar - xlower per sample, shape (N, n)."""
    return traj.xbar - traj.xlower


def width_integral(traj):
    """Returns the trapezoidal integral of xbar_i - xlower_i over time, per
    component."""
    if len(traj) < 2:
        return np.zeros(traj.n)
    return trapezoid(interval_widths(traj), traj.times, axis=0)


def _errors(traj, side):
    _check_side(side)
    ebar, elower = traj.errors()
    return ebar if side == "upper" else elower


def lyapunov_trace(traj, v, side="upper"):
    """Evaluates the max-type Lyapunov function V(e) = max_i e_i / v_i along a
    trajectory, on the upper error xbar - x or the lower error x - xlower.

    Parameters
    ----------
    traj : minerr.Trajectory or minerr.ErrorTrajectory
        A recorded trajectory.
    v : numpy.ndarray or minerr.Certificate
        The strictly positive weights.
    side : str, optional
        'upper' or 'lower'. Default is 'upper'.

    Returns
    ----------
    numpy.ndarray
        V at every sample.
    """

    if isinstance(v, Certificate):
        v = v.v
    v = np.asarray(v, dtype=float)
    if not np.all(v > 0):
        raise ValueError("Lyapunov weights must be strictly positive.")

    return np.max(_errors(traj, side) / v, axis=1)


@dataclass(frozen=True)
class DecayCheck:
    measured: float
    predicted: float
    passed: bool

    def to_dict(self):
        return {"measured": _finite(self.measured), "predicted": _finite(self.predicted), "passed": self.passed}


@dataclass(frozen=True)
class BoundCheck:
    measured: float
    predicted: float
    passed: bool

    def to_dict(self):
        return {"measured": _finite(self.measured), "predicted": _finite(self.predicted), "passed": self.passed}


def fitted_decay_rate(times, V, floor=1e-12):
    """Fits an exponential rate to the future-maximum envelope of V by least
    squares on its logarithm. Samples at or below floor are excluded;
    returns inf when fewer than two samples remain."""

    envelope = np.maximum.accumulate(np.asarray(V)[::-1])[::-1]
    mask = envelope > floor
    if np.count_nonzero(mask) < 2:
        return math.inf

    fit = linregress(np.asarray(times)[mask], np.log(envelope[mask]))
    return float(-fit.slope)


def decay_rate_check(traj, cert, side="upper", rtol=1e-6, atol=1e-12):
    """Checks V(t) <= V(0) exp(-(epsilon/n) t) (1 + rtol) at every sample of a
    trajectory without disturbance.

    Parameters
    ----------
    traj : minerr.Trajectory
        A trajectory of a scenario whose disturbance and bounds vanish.
    cert : minerr.Certificate
        The certificate (v, epsilon) of one gain of the chosen side.
    side : str, optional
        'upper' or 'lower'. Default is 'upper'.
    rtol : float, optional
        Relative tolerance. Default is 1e-6.
    atol : float, optional
        Absolute tolerance. Default is 1e-12.

    Returns
    ----------
    minerr.metrics.DecayCheck
        The fitted rate, the predicted rate epsilon/n and the verdict.
    """

    V = lyapunov_trace(traj, cert, side)
    times = traj.times - traj.times[0]
    predicted = cert.epsilon / cert.n

    bound = V[0] * np.exp(-predicted * times) * (1 + rtol) + atol
    passed = bool(np.all(V <= bound))

    return DecayCheck(fitted_decay_rate(times, V), predicted, passed)


def ultimate_bound_check(traj, cert, envelope, side="upper", tail_fraction=0.2, rtol=1e-3, atol=1e-9):
    """Compares the tail of V with the asymptotic bound
    (n / epsilon) max_i gap_i / v_i, where the gap is upper - delta (upper
    side) or delta - lower (lower side). Both limsups are taken over the
    trailing tail_fraction of the samples.

    Parameters
    ----------
    traj : minerr.Trajectory
        An untransformed trajectory.
    cert : minerr.Certificate
        The certificate (v, epsilon) of one gain of the chosen side.
    envelope : minerr.DisturbanceEnvelope
        The disturbance envelope of the scenario.
    side : str, optional
        'upper' or 'lower'. Default is 'upper'.
    tail_fraction : float, optional
        Fraction of trailing samples used. Default is 0.2.
    rtol, atol : float, optional
        Tolerances of the comparison. Default is 1e-3 and 1e-9.

    Returns
    ----------
    minerr.metrics.BoundCheck
        The measured tail, the predicted bound and the verdict.
    """

    _check_side(side)
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must be in (0, 1].")

    n, epsilon = cert.n, cert.epsilon
    horizon = traj.times[-1] - traj.times[0]
    if horizon < 10 * n / epsilon:
        warnings.warn(
            " Horizon {:g} is shorter than 10*n/epsilon = {:g}, the tail may still hold transients.".format(
                horizon, 10 * n / epsilon
            )
        )

    start = len(traj) - max(1, int(math.ceil(tail_fraction * len(traj))))
    tail_times = traj.times[start:]

    measured = float(np.max(lyapunov_trace(traj, cert, side)[start:]))

    gap = envelope.gap_upper if side == "upper" else envelope.gap_lower
    predicted = n / epsilon * max(float(np.max(gap(t) / cert.v)) for t in tail_times)

    passed = measured <= predicted * (1 + rtol) + atol
    return BoundCheck(measured, predicted, bool(passed))


def _check_grids(multi, singles):
    if len(singles) == 0:
        raise ValueError("At least one single-gain trajectory is needed.")
    for single in singles:
        if single.times.shape != multi.times.shape or not np.array_equal(single.times, multi.times):
            raise ValueError("Trajectory {} is not on the same time grid.".format(single.name))


def dominance_margins(multi, singles):
    """Returns, per single-gain trajectory j, the smallest of
    xbar^(j) - xbar and xlower - xlower^(j) over samples and components."""

    _check_grids(multi, singles)
    return [
        float(min(np.min(single.xbar - multi.xbar), np.min(multi.xlower - single.xlower)))
        for single in singles
    ]


def dominance_check(multi, singles):
    """Returns the margin by which the multi-gain frames lie inside every
    single-gain frame. A negative margin below -1e-6 contradicts the
    comparison principle.

    Parameters
    ----------
    multi : minerr.Trajectory
        The multi-gain trajectory.
    singles : list
        Single-gain trajectories on the same time grid.

    Returns
    ----------
    float
        min over samples, components and singles of the frame gaps.
    """

    return min(dominance_margins(multi, singles))


def intersection_frames(singles):
    """Returns the pointwise intersection (min of uppers, max of lowers) of
    the frames of several trajectories on one grid."""

    if len(singles) > 1:
        _check_grids(singles[0], singles[1:])
    xbar = np.min(np.stack([s.xbar for s in singles]), axis=0)
    xlower = np.max(np.stack([s.xlower for s in singles]), axis=0)
    return xbar, xlower


@dataclass
class MetricsReport:
    """The metrics of one simulated trajectory.

    Attributes
    ----------
    max_framer_violation : float
    width_integral : list
        Integral of xbar_i - xlower_i per component.
    lyapunov_decay_rate : float or None
        Fitted upper-side decay rate (only without disturbance).
    predicted_decay_rate : float or None
        epsilon / n of the upper certificate.
    ultimate_bound_measured, ultimate_bound_predicted : float or None
        Upper-side tail of V and its predicted bound.
    dominance_margin : float or None
        Margin against single-gain trajectories, if given.
    """

    max_framer_violation: float
    width_integral: list
    lyapunov_decay_rate: Optional[float] = None
    predicted_decay_rate: Optional[float] = None
    ultimate_bound_measured: Optional[float] = None
    ultimate_bound_predicted: Optional[float] = None
    dominance_margin: Optional[float] = None
    decay: Optional[dict] = None
    ultimate_bound: Optional[dict] = None

    def to_dict(self):
        out = asdict(self)
        for key, value in out.items():
            if isinstance(value, float):
                out[key] = _finite(value)
        return out


def compute_metrics(trajectory, scenario, report=None, singles=None):
    """Assembles the MetricsReport of a trajectory.

    Parameters
    ----------
    trajectory : minerr.Trajectory
        The recorded trajectory.
    scenario : minerr.Scenario
        The scenario it was simulated from.
    report : minerr.GainReport, optional
        The gain report; its best certificates drive the decay and
        ultimate-bound checks. Default is None (checks skipped).
    singles : list, optional
        Single-gain trajectories for the dominance margin. Default is None.

    Returns
    ----------
    minerr.metrics.MetricsReport
    """

    metrics = MetricsReport(
        max_framer_violation=framer_violation(trajectory),
        width_integral=[_finite(w) for w in width_integral(trajectory)],
    )

    if singles:
        metrics.dominance_margin = dominance_check(trajectory, singles)

    pair = None if report is None else report.certificate_pair(best=True)

    # the certificates live in z coordinates for transformed scenarios.
    if pair is None or scenario.transform is not None or not isinstance(trajectory.status, Completed):
        logger.debug("Skipping decay and ultimate-bound checks for %s.", scenario.name)
        return metrics

    if scenario.envelope.vanishes(trajectory.times[:: max(1, len(trajectory) // 100)]):
        checks = {side: decay_rate_check(trajectory, getattr(pair, side), side) for side in SIDES}
        metrics.lyapunov_decay_rate = checks["upper"].measured
        metrics.predicted_decay_rate = checks["upper"].predicted
        metrics.decay = {side: check.to_dict() for side, check in checks.items()}

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        checks = {
            side: ultimate_bound_check(trajectory, getattr(pair, side), scenario.envelope, side) for side in SIDES
        }
    metrics.ultimate_bound_measured = checks["upper"].measured
    metrics.ultimate_bound_predicted = checks["upper"].predicted
    metrics.ultimate_bound = {side: check.to_dict() for side, check in checks.items()}

    return metrics
