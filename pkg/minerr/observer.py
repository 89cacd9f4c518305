# external imports
import logging
from dataclasses import dataclass, field

import numpy as np

# internal imports
from .numkit import (
    as_matrix,
    as_vector,
    positive_split,
    metzler_violations,
    hurwitz_metzler_certificate,
    Certificate,
    Infeasible,
)

logger = logging.getLogger(__name__)

FAMILIES = ("upper", "lower")


class GainSet:
    """GainSet holds the phi upper gains and the phi lower gains of the
    interval observer. The upper frame uses, row by row, the smallest of
    the corrections L_k (C xbar - y); the lower frame uses the largest.

    Attributes
    ----------
    upper : tuple
        The upper gains, each an n x p numpy.ndarray.
    lower : tuple
        The lower gains, each an n x p numpy.ndarray.
    phi : int
        The number of gains in each family.

    Methods
    ----------
    single(k)
        Returns the singleton GainSet of the k-th upper and lower gain.
    transformed(R)
        Returns the gains R L_k for the coordinates z = R x.
    family(name)
        Returns the upper or the lower gains by name.
    """

    def __init__(self, upper, lower):
        """
        Parameters
        ----------
        upper : list
            The upper gains, n x p matrices.
        lower : list
            The lower gains, n x p matrices. Must have the same length
            as upper.
        """

        if len(upper) == 0:
            raise ValueError("A gain set needs at least one gain.")
        if len(upper) != len(lower):
            raise ValueError(
                "Upper and lower gain lists must have equal length, got {} and {}.".format(
                    len(upper), len(lower)
                )
            )

        self.upper = tuple(as_matrix(L) for L in upper)
        n, p = self.upper[0].shape
        self.upper = tuple(as_matrix(L, n, p) for L in self.upper)
        self.lower = tuple(as_matrix(L, n, p) for L in lower)

    @classmethod
    def from_pairs(cls, gains):
        """Returns a GainSet with the same gains in both families."""
        return cls(list(gains), list(gains))

    @property
    def phi(self):
        return len(self.upper)

    @property
    def n(self):
        return self.upper[0].shape[0]

    @property
    def p(self):
        return self.upper[0].shape[1]

    def family(self, name):
        if name not in FAMILIES:
            raise ValueError("Gain family must be 'upper' or 'lower', got {!r}.".format(name))
        return self.upper if name == "upper" else self.lower

    def single(self, k):
        """
        Parameters
        ----------
        k : int
            1-based gain index.

        Returns
        ----------
        minerr.GainSet
            The classic single-gain observer with upper gain k and lower gain k.
        """
        if not 1 <= k <= self.phi:
            raise ValueError("Gain index {} is outside 1..{}.".format(k, self.phi))
        return GainSet([self.upper[k - 1]], [self.lower[k - 1]])

    def transformed(self, R):
        R = as_matrix(R, self.n, self.n)
        return GainSet([R @ L for L in self.upper], [R @ L for L in self.lower])

    def __repr__(self):
        return "GainSet(phi={}, n={}, p={})".format(self.phi, self.n, self.p)


@dataclass(frozen=True, eq=False)
class ObserverState:
    """The upper and lower frames of the interval observer."""

    xbar: np.ndarray
    xlower: np.ndarray

    def check_order(self, tol=0.0):
        """Whether xlower <= xbar + tol holds componentwise."""
        return bool(np.all(self.xlower <= self.xbar + tol))


@dataclass(frozen=True, eq=False)
class ActiveGains:
    """The 1-based gain index achieving the row minimum (upper frame) and the
    row maximum (lower frame) of the observer corrections."""

    upper_idx: np.ndarray
    lower_idx: np.ndarray


@dataclass(frozen=True)
class CertificatePair:
    """A certificate for one upper gain and one lower gain."""

    upper: Certificate
    lower: Certificate

    def to_dict(self):
        return {"upper": self.upper.to_dict(), "lower": self.lower.to_dict()}


def _corrections(gains, residual):
    # one matrix-vector product per gain, so a singleton set reproduces L @ r bitwise.
    return np.array([L @ residual for L in gains])


def q_upper(gains, xbar, y, C):
    """Returns the upper correction Qbar_i = min_k [Lbar_k]_i (C xbar - y)
    and the 1-based minimising gain per row (ties go to the smallest k).

    Parameters
    ----------
    gains : minerr.GainSet
        The gain set.
    xbar : numpy.ndarray
        The upper frame.
    y : numpy.ndarray
        The measured output.
    C : numpy.ndarray
        The output matrix of the observer's coordinates.

    Returns
    ----------
    tuple
        (Qbar, indices), two numpy.ndarray of dimension n.
    """

    candidates = _corrections(gains.upper, C @ xbar - y)
    idx = np.argmin(candidates, axis=0)
    return candidates[idx, np.arange(candidates.shape[1])], idx + 1


def q_lower(gains, xlower, y, C):
    """Returns the lower correction Qlower_i = max_k [Llower_k]_i (C xlower - y)
    and the 1-based maximising gain per row (ties go to the smallest k).

    Parameters
    ----------
    gains : minerr.GainSet
        The gain set.
    xlower : numpy.ndarray
        The lower frame.
    y : numpy.ndarray
        The measured output.
    C : numpy.ndarray
        The output matrix of the observer's coordinates.

    Returns
    ----------
    tuple
        (Qlower, indices), two numpy.ndarray of dimension n.
    """

    candidates = _corrections(gains.lower, C @ xlower - y)
    idx = np.argmax(candidates, axis=0)
    return candidates[idx, np.arange(candidates.shape[1])], idx + 1


def observer_rhs(plant, envelope, gains, t, state, u, y):
    """Evaluates the interval observer

        dxbar/dt   = A(y) xbar   + Qbar(xbar, y)     + beta(y, u) + upper(t)
        dxlower/dt = A(y) xlower + Qlower(xlower, y) + beta(y, u) + lower(t)

    The observer reads only t, y and u; the plant state is never passed in.

    Parameters
    ----------
    plant : minerr.PlantModel
        The plant, in the observer's coordinates.
    envelope : minerr.DisturbanceEnvelope
        The disturbance bounds, in the observer's coordinates.
    gains : minerr.GainSet
        The gain set.
    t : float
        Time.
    state : minerr.ObserverState
        The current frames.
    u : numpy.ndarray
        The input.
    y : numpy.ndarray
        The measured output.

    Returns
    ----------
    tuple
        (d_xbar, d_xlower, minerr.ActiveGains)
    """

    A = plant.eval_A(y)
    b = plant.eval_beta(t, y, u)

    qbar, upper_idx = q_upper(gains, state.xbar, y, plant.C)
    qlower, lower_idx = q_lower(gains, state.xlower, y, plant.C)

    d_xbar = A @ state.xbar + qbar + b + envelope.upper(t)
    d_xlower = A @ state.xlower + qlower + b + envelope.lower(t)

    return d_xbar, d_xlower, ActiveGains(upper_idx, lower_idx)


def error_rhs_oracle(plant, envelope, gains, t, ebar, elower, y):
    """Evaluates the frame error dynamics directly,

        debar_i/dt   = min_k [A(y) + Lbar_k C]_i ebar     + upper_i(t) - delta_i(t)
        delower_i/dt = min_k [A(y) + Llower_k C]_i elower + delta_i(t) - lower_i(t)

    with ebar = xbar - x and elower = x - xlower. This is independent of
    observer_rhs and serves as a cross-check of it.

    Parameters
    ----------
    plant : minerr.PlantModel
        The plant.
    envelope : minerr.DisturbanceEnvelope
        The disturbance and its bounds.
    gains : minerr.GainSet
        The gain set.
    t : float
        Time.
    ebar : numpy.ndarray
        The upper error.
    elower : numpy.ndarray
        The lower error.
    y : numpy.ndarray
        The output, which A(y) is evaluated at.

    Returns
    ----------
    tuple
        (d_ebar, d_elower)
    """

    A = plant.eval_A(y)
    delta = envelope.true(t)

    rows_upper = np.array([(A + L @ plant.C) @ ebar for L in gains.upper])
    rows_lower = np.array([(A + L @ plant.C) @ elower for L in gains.lower])

    d_ebar = rows_upper.min(axis=0) + (envelope.upper(t) - delta)
    d_elower = rows_lower.min(axis=0) + (delta - envelope.lower(t))

    return d_ebar, d_elower


class HypothesisViolation(ValueError):
    """Raised when a hypothesis of the observer guarantees fails: initial
    frames that do not enclose the initial state, a disturbance outside its
    envelope, or gains that are not Metzler-compatible."""


class ValidationFailure(HypothesisViolation):
    """Raised by validate_gains when a gain breaks the Metzler hypothesis or
    a gain family has no feasible certificate.

    Attributes
    ----------
    report : minerr.GainReport
        The full validation report.
    violations : list
        Tuples (family, k, row, col, value) with 1-based k, row and col.
    """

    def __init__(self, report):
        self.report = report
        self.violations = report.violations()

        if self.violations:
            message = "Metzler hypothesis violated at " + ", ".join(
                "{}[{}] ({},{})={:g}".format(family, k, i, j, value)
                for family, k, i, j, value in self.violations
            )
        else:
            missing = [f for f in FAMILIES if report.first_feasible(f) is None]
            message = "No feasible certificate for the {} gains.".format(" and ".join(missing))
        super().__init__(message)


@dataclass
class GainReport:
    """The outcome of validate_gains.

    Attributes
    ----------
    mode : str
        'exact' (constant A), 'structural' (affine A whose y-dependent
        off-diagonal entries vanish) or 'sampled' (only checked at the
        given output samples).
    y_diagonal : bool
        Whether some y-dependent term has a nonzero diagonal. Such terms
        keep the Metzler structure but move the certificate rows, which
        are then only checked at the sampled outputs.
    metzler : dict
        Maps (family, k) to a list of (omega_index, row, col, value) with
        0-based row and col; empty lists mean the matrix is Metzler.
    certificates : dict
        Maps (family, k) to a Certificate or Infeasible.
    omega_samples : list
        The output samples the check was made at.
    """

    mode: str
    phi: int
    y_diagonal: bool = False
    metzler: dict = field(default_factory=dict)
    certificates: dict = field(default_factory=dict)
    omega_samples: list = field(default_factory=list)

    @property
    def metzler_proven(self):
        return self.mode in ("exact", "structural")

    @property
    def certificate_proven(self):
        return self.mode == "exact" or (self.mode == "structural" and not self.y_diagonal)

    @property
    def proven(self):
        return self.metzler_proven and self.certificate_proven

    def violations(self):
        found = []
        for (family, k), entries in self.metzler.items():
            seen = set()
            for _, i, j, value in entries:
                if (i, j) not in seen:
                    seen.add((i, j))
                    found.append((family, k, i + 1, j + 1, value))
        return found

    def feasible(self, family):
        return [self.certificates[(family, k)] for k in range(1, self.phi + 1) if self.certificates[(family, k)]]

    def first_feasible(self, family):
        feasible = self.feasible(family)
        return feasible[0] if feasible else None

    def best(self, family):
        """The feasible certificate with the largest rate."""
        feasible = self.feasible(family)
        return max(feasible, key=lambda c: c.epsilon) if feasible else None

    def certificate_pair(self, best=True):
        """Returns a CertificatePair (largest rate, or first feasible)."""
        pick = self.best if best else self.first_feasible
        upper, lower = pick("upper"), pick("lower")
        if upper is None or lower is None:
            return None
        return CertificatePair(upper, lower)

    @property
    def passed(self):
        return not self.violations() and self.certificate_pair() is not None

    def to_dict(self):
        gains = {}
        for family in FAMILIES:
            gains[family] = [
                {
                    "k": k,
                    "metzler": not self.metzler[(family, k)],
                    "violations": [
                        {"row": i + 1, "col": j + 1, "value": value}
                        for _, i, j, value in self.metzler[(family, k)]
                    ],
                    "certificate": self.certificates[(family, k)].to_dict(),
                }
                for k in range(1, self.phi + 1)
            ]

        first = self.certificate_pair(best=False)
        best = self.certificate_pair(best=True)
        return {
            "mode": self.mode,
            "proven": self.proven,
            "metzler_proven": self.metzler_proven,
            "certificate_proven": self.certificate_proven,
            "passed": self.passed,
            "phi": self.phi,
            "gains": gains,
            "first_feasible": None if first is None else first.to_dict(),
            "best": None if best is None else best.to_dict(),
        }


def _certificate_over_samples(matrices, k):
    # build at the first matrix, then keep the worst margin over the others.
    certificate = hurwitz_metzler_certificate(matrices[0], gain_index=k)
    if not certificate or len(matrices) == 1:
        return certificate

    v = certificate.v
    epsilon = min(float(np.min(-(M @ v) / v)) for M in matrices)
    if not epsilon > 0:
        return Infeasible("not Hurwitz at a sampled output", k)
    while not all(np.all(M @ v <= -epsilon * v) for M in matrices):
        epsilon = float(np.nextafter(epsilon, 0.0))
    return Certificate(k, v, epsilon)


def validate_gains(plant, gains, omega_samples=(), raise_on_failure=True):
    """Checks the hypotheses of the interval observer guarantees: every
    A(w) + L_k C Metzler, for both gain families, and at least one gain per
    family with a certificate (v, epsilon) of [A(w) + L_k C] v <= -epsilon v.

    For constant A the check is exact. For affine A(y) it is exact when
    every y-dependent term has a zero off-diagonal part (then A(w) + L_k C
    is Metzler for all w iff A_const + L_k C is); otherwise the matrices are
    only checked at the sampled outputs and the report says so. A
    y-dependent diagonal leaves the Metzler check exact but the certificate
    sampled, which the report records as not proven.

    Parameters
    ----------
    plant : minerr.PlantModel
        The plant (in the observer's coordinates).
    gains : minerr.GainSet
        The gain set.
    omega_samples : list, optional
        Output values w to check A(w) at. Default is () (only w = 0).
    raise_on_failure : bool, optional
        Whether to raise ValidationFailure when a hypothesis fails.
        Default is True.

    Returns
    ----------
    minerr.GainReport
        The validation report.
    """

    if gains.n != plant.n or gains.p != plant.p:
        raise ValueError("Gain shape {}x{} does not match the plant.".format(gains.n, gains.p))

    omegas = [as_vector(w, plant.p) for w in omega_samples]

    if plant.is_constant:
        mode = "exact"
    else:
        off_diagonal = ~np.eye(plant.n, dtype=bool)
        if all(not np.any(A_j[off_diagonal]) for A_j, _ in plant.A_y_terms):
            mode = "structural"
        else:
            mode = "sampled"

    # the Metzler check of the structural and exact modes only needs w = 0.
    if mode == "sampled":
        points = [np.zeros(plant.p)] + omegas
    else:
        points = [np.zeros(plant.p)]
    A_points = [plant.eval_A(w) for w in points]

    y_diagonal = any(np.any(np.diag(A_j)) for A_j, _ in plant.A_y_terms)
    report = GainReport(mode=mode, phi=gains.phi, y_diagonal=y_diagonal, omega_samples=[w.tolist() for w in omegas])

    for family in FAMILIES:
        for k, L in enumerate(gains.family(family), start=1):
            matrices = [A + L @ plant.C for A in A_points]

            entries = []
            for s, M in enumerate(matrices):
                entries.extend((s, i, j, value) for i, j, value in metzler_violations(M))
            report.metzler[(family, k)] = entries

            if entries:
                report.certificates[(family, k)] = Infeasible("not Metzler", k)
            elif mode == "structural" and not plant.is_constant:
                report.certificates[(family, k)] = _certificate_over_samples(
                    matrices + [plant.eval_A(w) + L @ plant.C for w in omegas], k
                )
            else:
                report.certificates[(family, k)] = _certificate_over_samples(matrices, k)

            logger.debug("%s gain %d: metzler=%s, %r", family, k, not entries, report.certificates[(family, k)])

    if not report.proven:
        logger.info("Gain validation for output-dependent A is %s, not proven for all outputs.", mode)

    if raise_on_failure and not report.passed:
        raise ValidationFailure(report)

    return report


def map_frames_to_original(S, zbar, zlower):
    """Maps frames in z = R x back to x, with S = R^-1:
    xbar = S+ zbar - S- zlower and xlower = S+ zlower - S- zbar.

    Parameters
    ----------
    S : numpy.ndarray
        The inverse coordinate change.
    zbar : numpy.ndarray
        Upper frame(s) in z; a 2-D array maps one frame per row.
    zlower : numpy.ndarray
        Lower frame(s) in z.

    Returns
    ----------
    tuple
        (xbar, xlower)
    """

    Splus, Sminus = positive_split(S)
    zbar = np.asarray(zbar, dtype=float)
    zlower = np.asarray(zlower, dtype=float)

    xbar = zbar @ Splus.T - zlower @ Sminus.T
    xlower = zlower @ Splus.T - zbar @ Sminus.T
    return xbar, xlower


def map_initial_frames(R, xbar0, xlower0):
    """Maps initial frames in x to frames in z = R x:
    zbar0 = R+ xbar0 - R- xlower0 and zlower0 = R+ xlower0 - R- xbar0.

    Parameters
    ----------
    R : numpy.ndarray
        The coordinate change.
    xbar0 : numpy.ndarray
        The upper frame.
    xlower0 : numpy.ndarray
        The lower frame.

    Returns
    ----------
    tuple
        (zbar0, zlower0)
    """

    Rplus, Rminus = positive_split(R)
    zbar0 = Rplus @ xbar0 - Rminus @ xlower0
    zlower0 = Rplus @ xlower0 - Rminus @ xbar0
    return zbar0, zlower0


def transform_disturbance_bounds(R, delta_upper, delta_lower):
    """Returns evaluators of the disturbance bounds in z = R x,
    t -> R+ upper(t) - R- lower(t) and t -> R+ lower(t) - R- upper(t).

    Parameters
    ----------
    R : numpy.ndarray
        The coordinate change.
    delta_upper : callable
        t -> upper bound in x.
    delta_lower : callable
        t -> lower bound in x.

    Returns
    ----------
    tuple
        (upper, lower), two callables of t.
    """

    Rplus, Rminus = positive_split(R)

    def upper(t):
        return Rplus @ delta_upper(t) - Rminus @ delta_lower(t)

    def lower(t):
        return Rplus @ delta_lower(t) - Rminus @ delta_upper(t)

    return upper, lower
