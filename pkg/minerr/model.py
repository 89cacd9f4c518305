# external imports
import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

# internal imports
from .numkit import as_matrix, as_vector, elementwise_leq, lu_solve, SingularMatrixError
from .exprlang import SignalVector
from .observer import GainSet, HypothesisViolation, transform_disturbance_bounds


class EnvelopeViolation(HypothesisViolation):
    """Raised when the true disturbance leaves its envelope.

    Attributes
    ----------
    t : float
        The time of the violation.
    index : int
        The (0-based) violated component.
    values : tuple
        (lower, true, upper) at the violated component.
    """

    def __init__(self, t, index, lower, true, upper):
        super().__init__(
            "Disturbance envelope violated at t={:.6g}, component {}: "
            "lower={:.12g}, delta={:.12g}, upper={:.12g}.".format(t, index + 1, lower, true, upper)
        )
        self.t = t
        self.index = index
        self.values = (lower, true, upper)


class PlantModel:
    """PlantModel holds the plant

        dx/dt = A(y) x + beta(y, u) + delta(t),   y = C x,

    with an output-dependent matrix that is affine in y,
    A(y) = A_const + sum_j y_j A_j. The disturbance delta is not part of the
    plant, it is held by a DisturbanceEnvelope.

    Attributes
    ----------
    C : numpy.ndarray
        The p x n output matrix.
    A_const : numpy.ndarray
        The constant n x n part of A(y).
    A_y_terms : tuple
        Tuple of (A_j, j) pairs, with A_j an n x n matrix and j a 1-based
        output index.
    beta : minerr.SignalVector
        The nonlinearity beta(y, u), one expression per state.
    u_signal : minerr.SignalVector
        The input u(t), one time-only expression per input.
    beta_map : numpy.ndarray or None
        Linear map applied to beta after evaluation. Only set on plants
        produced by transformed(); None means the identity.

    Methods
    ----------
    eval_A(y)
        Returns A(y).
    eval_beta(t, y, u)
        Returns beta(y, u) (mapped by beta_map, if set).
    output(x)
        Returns y = C x.
    input(t)
        Returns u(t).
    rhs(envelope, t, x, u)
        Returns the plant vector field A(y)x + beta(y,u) + delta(t).
    transformed(R)
        Returns the plant expressed in the coordinates z = R x.
    """

    def __init__(self, C, A_const, beta, u_signal=None, A_y_terms=(), beta_map=None):
        """
        Parameters
        ----------
        C : array_like
            The p x n output matrix.
        A_const : array_like
            The constant n x n part of A(y).
        beta : minerr.SignalVector
            The nonlinearity, dimension n.
        u_signal : minerr.SignalVector, optional
            The input signal. Default is None (a single zero input).
        A_y_terms : list, optional
            List of (matrix, j) pairs. Default is () (constant A).
        beta_map : array_like, optional
            Linear map applied to beta. Default is None.
        """

        self.A_const = as_matrix(A_const)
        n = self.A_const.shape[0]
        if self.A_const.shape[1] != n:
            raise ValueError("A must be square, got shape {}.".format(self.A_const.shape))

        self.C = as_matrix(C, cols=n)
        p = self.C.shape[0]

        terms = []
        for matrix, j in A_y_terms:
            if not 1 <= int(j) <= p:
                raise ValueError("Output index j={} is outside 1..{}.".format(j, p))
            terms.append((as_matrix(matrix, n, n), int(j)))
        self.A_y_terms = tuple(terms)

        if u_signal is None:
            u_signal = SignalVector.zeros(1)
        if not u_signal.depends_only_on_time():
            raise ValueError("The input u may only depend on t.")
        self.u_signal = u_signal
        q = u_signal.dim

        if not isinstance(beta, SignalVector) or beta.dim != n:
            raise ValueError("beta must be a SignalVector of dimension {}.".format(n))
        self._check_references(beta, p, q)
        self.beta = beta

        self.beta_map = None if beta_map is None else as_matrix(beta_map, n, n)

    @staticmethod
    def _check_references(signal, p, q):
        for name in signal.variables():
            if name == "t":
                continue
            bound = p if name[0] == "y" else q
            if int(name[1:]) > bound:
                raise ValueError("beta references {} outside the declared dimensions.".format(name))

    @property
    def n(self):
        return self.A_const.shape[0]

    @property
    def p(self):
        return self.C.shape[0]

    @property
    def q(self):
        return self.u_signal.dim

    @property
    def is_constant(self):
        """Whether A(y) does not depend on y."""
        return len(self.A_y_terms) == 0

    def eval_A(self, y):
        """
        Parameters
        ----------
        y : numpy.ndarray
            The output, dimension p.

        Returns
        ----------
        numpy.ndarray
            A(y) = A_const + sum_j y_j A_j.
        """

        if self.is_constant:
            return self.A_const

        A = self.A_const.copy()
        for matrix, j in self.A_y_terms:
            A += y[j - 1] * matrix
        return A

    def eval_beta(self, t, y, u):
        """
        Parameters
        ----------
        t : float
            Time.
        y : numpy.ndarray
            The output, dimension p.
        u : numpy.ndarray
            The input, dimension q.

        Returns
        ----------
        numpy.ndarray
            beta(y, u), dimension n.
        """

        b = self.beta(t, y, u)
        if self.beta_map is not None:
            b = self.beta_map @ b
        return b

    def output(self, x):
        return self.C @ x

    def input(self, t):
        return self.u_signal(t)

    def rhs(self, envelope, t, x, u):
        """
        Parameters
        ----------
        envelope : minerr.DisturbanceEnvelope
            Provides the true disturbance delta(t).
        t : float
            Time.
        x : numpy.ndarray
            The state.
        u : numpy.ndarray
            The input.

        Returns
        ----------
        numpy.ndarray
            A(y)x + beta(y,u) + delta(t) with y = Cx.
        """

        # a single output evaluation feeds both A and beta.
        y = self.output(x)
        return self.eval_A(y) @ x + self.eval_beta(t, y, u) + envelope.true(t)

    def transformed(self, R):
        """
        Parameters
        ----------
        R : numpy.ndarray
            A nonsingular n x n matrix.

        Returns
        ----------
        minerr.PlantModel
            The plant in z = R x, i.e. A_z(y) = R A(y) R^-1, C_z = C R^-1 and
            beta_z = R beta. The output y is unchanged.
        """

        R = as_matrix(R, self.n, self.n)
        S = lu_solve(R, np.eye(self.n))

        beta_map = R if self.beta_map is None else R @ self.beta_map

        return PlantModel(
            C=self.C @ S,
            A_const=R @ self.A_const @ S,
            beta=self.beta,
            u_signal=self.u_signal,
            A_y_terms=[(R @ matrix @ S, j) for matrix, j in self.A_y_terms],
            beta_map=beta_map,
        )


def eval_A(plant, y):
    """Returns A(y) of a plant."""
    return plant.eval_A(y)


def eval_beta(plant, t, y, u):
    """Returns beta(y, u) of a plant."""
    return plant.eval_beta(t, y, u)


def plant_rhs(plant, envelope, t, x, u):
    """Returns the plant vector field A(Cx)x + beta(Cx, u) + delta(t)."""
    return plant.rhs(envelope, t, x, u)


class DisturbanceEnvelope:
    """DisturbanceEnvelope holds the true disturbance delta(t), used only to
    simulate the plant, and its known bounds lower(t) <= delta(t) <= upper(t).

    Attributes
    ----------
    delta : minerr.SignalVector
        The true disturbance.
    delta_upper : minerr.SignalVector
        The upper bound.
    delta_lower : minerr.SignalVector
        The lower bound.
    transform : numpy.ndarray or None
        If set, every signal is expressed in z = R x coordinates.

    Methods
    ----------
    true(t), upper(t), lower(t)
        The disturbance and its bounds at time t.
    gap_upper(t), gap_lower(t)
        upper(t) - true(t) and true(t) - lower(t).
    check(t)
        Raises EnvelopeViolation if the true disturbance leaves the envelope.
    transformed(R)
        Returns the envelope in z = R x coordinates.
    """

    def __init__(self, delta, delta_upper, delta_lower, transform=None, rtol=1e-12):
        """
        Parameters
        ----------
        delta : minerr.SignalVector
            The true disturbance (time-only expressions).
        delta_upper : minerr.SignalVector
            The upper bound (time-only expressions).
        delta_lower : minerr.SignalVector
            The lower bound (time-only expressions).
        transform : numpy.ndarray, optional
            Coordinate change R. Default is None.
        rtol : float, optional
            Relative tolerance of check(). Default is 1e-12.
        """

        for name, signal in (("delta", delta), ("upper", delta_upper), ("lower", delta_lower)):
            if not isinstance(signal, SignalVector):
                raise TypeError("Disturbance {} must be a SignalVector.".format(name))
            if not signal.depends_only_on_time():
                raise ValueError("Disturbance {} may only depend on t.".format(name))
        if not delta.dim == delta_upper.dim == delta_lower.dim:
            raise ValueError("Disturbance signals must have equal dimensions.")

        self.delta = delta
        self.delta_upper = delta_upper
        self.delta_lower = delta_lower
        self.rtol = rtol

        if transform is None:
            self.transform = None
            self._true = delta
            self._upper = delta_upper
            self._lower = delta_lower
        else:
            self.transform = as_matrix(transform, delta.dim, delta.dim)
            self._true = lambda t: self.transform @ delta(t)
            self._upper, self._lower = transform_disturbance_bounds(
                self.transform, delta_upper, delta_lower
            )

    @property
    def n(self):
        return self.delta.dim

    def true(self, t):
        return self._true(t)

    def upper(self, t):
        return self._upper(t)

    def lower(self, t):
        return self._lower(t)

    def gap_upper(self, t):
        return self.upper(t) - self.true(t)

    def gap_lower(self, t):
        return self.true(t) - self.lower(t)

    def check(self, t):
        """
        Parameters
        ----------
        t : float
            Time.

        Returns
        ----------
        tuple
            (lower, true, upper) at time t, if they are ordered.
        """

        lower, true, upper = self.lower(t), self.true(t), self.upper(t)
        tol = self.rtol * (1 + np.abs(true))

        bad = np.nonzero((lower - true > tol) | (true - upper > tol))[0]
        if bad.size > 0:
            i = int(bad[0])
            raise EnvelopeViolation(t, i, lower[i], true[i], upper[i])

        return lower, true, upper

    def vanishes(self, times):
        """Whether the disturbance and both bounds are zero at every time."""
        return all(
            not np.any(self.true(t)) and not np.any(self.upper(t)) and not np.any(self.lower(t))
            for t in times
        )

    def transformed(self, R):
        if self.transform is not None:
            raise ValueError("The envelope is already transformed; bound splits do not compose.")
        return DisturbanceEnvelope(self.delta, self.delta_upper, self.delta_lower, R, self.rtol)


@dataclass(frozen=True, eq=False)
class Scenario:
    """A complete simulation scenario: plant, disturbance envelope, observer
    gains, initial state and frames, optional coordinate change and the
    simulation parameters. If transform is set, the gains act on the
    coordinates z = R x.

    Attributes
    ----------
    plant : minerr.PlantModel
    envelope : minerr.DisturbanceEnvelope
    gains : minerr.GainSet
    x0, xbar0, xlower0 : numpy.ndarray
        The initial state and the initial upper and lower frames.
    sim : minerr.SimParams
    transform : numpy.ndarray or None
    name : str
    """

    plant: PlantModel
    envelope: DisturbanceEnvelope
    gains: GainSet
    x0: np.ndarray
    xbar0: np.ndarray
    xlower0: np.ndarray
    sim: "SimParams"
    transform: Optional[np.ndarray] = None
    name: str = "scenario"

    def __post_init__(self):
        n = self.plant.n

        # dataclass is frozen, so normalised arrays are set through object.
        for field in ("x0", "xbar0", "xlower0"):
            object.__setattr__(self, field, as_vector(getattr(self, field), n))

        if self.envelope.n != n:
            raise ValueError("Disturbance dimension {} does not match n={}.".format(self.envelope.n, n))
        if self.envelope.transform is not None:
            raise ValueError("Scenario envelopes are given in the original coordinates.")
        if self.gains.n != n or self.gains.p != self.plant.p:
            raise ValueError(
                "Gains must be {}x{} matrices, got {}x{}.".format(n, self.plant.p, self.gains.n, self.gains.p)
            )

        if self.transform is not None:
            R = as_matrix(self.transform, n, n)
            try:
                lu_solve(R, np.eye(n))
            except SingularMatrixError as err:
                raise ValueError("Coordinate change R must be nonsingular.") from err
            object.__setattr__(self, "transform", R)

        if not (elementwise_leq(self.xlower0, self.x0) and elementwise_leq(self.x0, self.xbar0)):
            raise HypothesisViolation(
                "Initial frames must satisfy xlower0 <= x0 <= xbar0, got {} <= {} <= {}.".format(
                    self.xlower0.tolist(), self.x0.tolist(), self.xbar0.tolist()
                )
            )

    @property
    def n(self):
        return self.plant.n

    def observer_plant(self):
        """The plant in the observer's coordinates."""
        if self.transform is None:
            return self.plant
        return self.plant.transformed(self.transform)

    def observer_envelope(self):
        """The envelope in the observer's coordinates."""
        if self.transform is None:
            return self.envelope
        return self.envelope.transformed(self.transform)

    def with_gains(self, gains, name=None):
        return dataclasses.replace(self, gains=gains, name=name or self.name)

    def with_sim(self, **changes):
        return dataclasses.replace(self, sim=dataclasses.replace(self.sim, **changes))

    def with_envelope(self, envelope, name=None):
        return dataclasses.replace(self, envelope=envelope, name=name or self.name)

    def with_initial_frames(self, xbar0, xlower0, x0=None):
        return dataclasses.replace(
            self, xbar0=xbar0, xlower0=xlower0, x0=self.x0 if x0 is None else x0
        )

    def with_transform(self, R, gains=None):
        """Returns the scenario observed in z = R x. Without explicit gains the
        current gains are carried over as R L_k."""
        if gains is None:
            gains = self.gains.transformed(R)
        return dataclasses.replace(self, transform=R, gains=gains)
