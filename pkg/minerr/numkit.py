# external imports
import warnings

import numpy as np
import scipy.linalg as sla


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when an LU factorisation meets a pivot below the singularity
    threshold."""


def as_matrix(entries, rows=None, cols=None):
    """Returns a read-only float64 copy of a 2-D array of finite entries.

    Parameters
    ----------
    entries : array_like
        Row-major matrix entries (nested lists or a numpy.ndarray).
    rows : int, optional
        Required number of rows. Default is None (not checked).
    cols : int, optional
        Required number of columns. Default is None (not checked).

    Returns
    ----------
    numpy.ndarray
        A read-only 2-D array.
    """

    try:
        M = np.array(entries, dtype=float)
    except (TypeError, ValueError) as err:
        raise TypeError("Matrix entries must be real numbers.") from err

    if M.ndim != 2 or M.shape[0] == 0 or M.shape[1] == 0:
        raise ValueError("Matrix must be a non-empty 2-D array, got shape {}.".format(M.shape))
    if rows is not None and M.shape[0] != rows:
        raise ValueError("Matrix must have {} rows, got {}.".format(rows, M.shape[0]))
    if cols is not None and M.shape[1] != cols:
        raise ValueError("Matrix must have {} columns, got {}.".format(cols, M.shape[1]))
    if not np.all(np.isfinite(M)):
        raise ValueError("Matrix entries must be finite.")

    M.setflags(write=False)
    return M


def as_vector(entries, dim=None):
    """Returns a read-only float64 copy of a 1-D array of finite entries.

    Parameters
    ----------
    entries : array_like
        Vector entries.
    dim : int, optional
        Required dimension. Default is None (not checked).

    Returns
    ----------
    numpy.ndarray
        A read-only 1-D array.
    """

    try:
        v = np.array(entries, dtype=float)
    except (TypeError, ValueError) as err:
        raise TypeError("Vector entries must be real numbers.") from err

    if v.ndim != 1 or v.shape[0] == 0:
        raise ValueError("Vector must be a non-empty 1-D array, got shape {}.".format(v.shape))
    if dim is not None and v.shape[0] != dim:
        raise ValueError("Vector must have dimension {}, got {}.".format(dim, v.shape[0]))
    if not np.all(np.isfinite(v)):
        raise ValueError("Vector entries must be finite.")

    v.setflags(write=False)
    return v


def _require_square(M):
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("Matrix must be square, got shape {}.".format(M.shape))


def is_metzler(M):
    """Returns True if every off-diagonal entry of a square matrix is
    nonnegative. The comparison is exact.

    Parameters
    ----------
    M : numpy.ndarray
        A square matrix.

    Returns
    ----------
    bool
        Whether M is Metzler.
    """

    M = np.asarray(M, dtype=float)
    _require_square(M)

    off_diagonal = ~np.eye(M.shape[0], dtype=bool)
    return bool(np.all(M[off_diagonal] >= 0))


def metzler_violations(M):
    """Returns the (row, col, value) triples of the negative off-diagonal
    entries of a square matrix, with 0-based indices."""

    M = np.asarray(M, dtype=float)
    _require_square(M)

    rows, cols = np.nonzero(M < 0)
    return [(int(i), int(j), float(M[i, j])) for i, j in zip(rows, cols) if i != j]


def positive_split(M):
    """Splits a matrix into its positive and negative parts, such that
    M = Mplus - Mminus with both parts entrywise nonnegative.

    Parameters
    ----------
    M : numpy.ndarray
        Any matrix (or vector).

    Returns
    ----------
    tuple
        (Mplus, Mminus), each a numpy.ndarray of the same shape as M.
    """

    M = np.asarray(M, dtype=float)
    Mplus = np.maximum(M, 0.0)
    Mminus = Mplus - M

    return Mplus, Mminus


def elementwise_leq(a, b):
    """Returns True if a_i <= b_i for every component.

    Parameters
    ----------
    a : numpy.ndarray
        Left-hand vector.
    b : numpy.ndarray
        Right-hand vector of the same dimension.

    Returns
    ----------
    bool
        Whether a <= b in the componentwise order.
    """

    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("Dimensions do not match: {} and {}.".format(a.shape, b.shape))

    return bool(np.all(a <= b))


def lu_solve(M, b, rtol=1e-12):
    """Solves M x = b by LU factorisation with partial pivoting.

    Parameters
    ----------
    M : numpy.ndarray
        A square matrix.
    b : numpy.ndarray
        Right-hand side (vector or matrix with matching rows).
    rtol : float, optional
        A pivot smaller than rtol times the maximum absolute row sum of M
        is treated as zero. Default is 1e-12.

    Returns
    ----------
    numpy.ndarray
        The solution x.
    """

    M = np.asarray(M, dtype=float)
    _require_square(M)

    scale = np.linalg.norm(M, np.inf)
    if scale == 0:
        raise SingularMatrixError("Matrix is zero.")

    # scipy warns on exactly zero pivots, we check them ourselves below.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(M, check_finite=False)

    pivots = np.abs(np.diag(lu))
    if np.any(pivots < rtol * scale):
        raise SingularMatrixError(
            "Matrix is singular to working precision (smallest pivot {:.3e}).".format(
                pivots.min()
            )
        )

    return sla.lu_solve((lu, piv), np.asarray(b, dtype=float), check_finite=False)


class Infeasible:
    """Value returned when no Hurwitz-Metzler certificate exists. It is falsy,
    so that `if certificate:` reads naturally.

    Attributes
    ----------
    reason : str
        Why the certificate could not be constructed.
    gain_index : int or None
        The gain the attempt was made for, if any.
    """

    def __init__(self, reason, gain_index=None):
        self.reason = reason
        self.gain_index = gain_index

    def __bool__(self):
        return False

    def __eq__(self, other):
        return isinstance(other, Infeasible) and other.reason == self.reason

    def __hash__(self):
        return hash(("Infeasible", self.reason))

    def __repr__(self):
        return "Infeasible({!r})".format(self.reason)

    def to_dict(self):
        return {"gain_index": self.gain_index, "feasible": False, "reason": self.reason}


class Certificate:
    """A certificate (v, epsilon) witnessing that a Metzler matrix M is
    Hurwitz through the row inequalities [Mv]_i <= -epsilon * v_i, with v
    strictly positive.

    Attributes
    ----------
    gain_index : int
        The (1-based) gain the certificate belongs to.
    v : numpy.ndarray
        The strictly positive weight vector.
    epsilon : float
        The strictly positive rate.

    Methods
    ----------
    certifies(M)
        Checks the row inequalities against a matrix, with tolerance 0.
    lyapunov(e)
        Evaluates the max-type function max_i e_i / v_i.
    """

    def __init__(self, gain_index, v, epsilon, matrix=None):
        """
        Parameters
        ----------
        gain_index : int
            The (1-based) gain the certificate belongs to.
        v : array_like
            The weight vector. Every entry must be strictly positive.
        epsilon : float
            The rate. Must be strictly positive.
        matrix : numpy.ndarray, optional
            If given, the row inequalities are checked against this matrix
            at construction. Default is None.
        """

        if int(gain_index) < 1:
            raise ValueError("Gain index must be a positive integer.")

        self.gain_index = int(gain_index)
        self.v = as_vector(v)
        self.epsilon = float(epsilon)

        if not np.all(self.v > 0):
            raise ValueError("Certificate vector must be strictly positive.")
        if not (self.epsilon > 0 and np.isfinite(self.epsilon)):
            raise ValueError("Certificate rate must be strictly positive.")

        if matrix is not None and not self.certifies(matrix):
            raise ValueError("Certificate does not satisfy [Mv]_i <= -epsilon*v_i.")

    def certifies(self, M):
        """
        Parameters
        ----------
        M : numpy.ndarray
            A square matrix of the same dimension as v.

        Returns
        ----------
        bool
            Whether [Mv]_i <= -epsilon * v_i holds exactly for every row.
        """
        M = np.asarray(M, dtype=float)
        _require_square(M)
        if M.shape[0] != self.v.shape[0]:
            raise ValueError("Matrix and certificate dimensions do not match.")
        return bool(np.all(M @ self.v <= -self.epsilon * self.v))

    def lyapunov(self, e):
        """Returns max_i e_i / v_i for a vector, or per row for a 2-D array."""
        return np.max(np.asarray(e, dtype=float) / self.v, axis=-1)

    @property
    def n(self):
        return self.v.shape[0]

    def __bool__(self):
        return True

    def __repr__(self):
        return "Certificate(gain_index={}, v={}, epsilon={:.6g})".format(
            self.gain_index, np.array2string(self.v, precision=6), self.epsilon
        )

    def to_dict(self):
        return {
            "gain_index": self.gain_index,
            "feasible": True,
            "v": self.v.tolist(),
            "epsilon": self.epsilon,
        }


def certifies(certificate, M):
    """Functional form of Certificate.certifies."""
    return certificate.certifies(M)


def hurwitz_metzler_certificate(M, gain_index=1, residual_tol=1e-10):
    """Constructs the canonical certificate v = -M^{-1} 1 for a Metzler
    matrix. For Metzler M, -M^{-1} is entrywise nonnegative iff M is Hurwitz,
    so v is a valid witness exactly when one exists.

    Parameters
    ----------
    M : numpy.ndarray
        A square Metzler matrix. The caller is responsible for checking
        the Metzler property, e.g. with is_metzler().
    gain_index : int, optional
        The gain index to attach to the certificate. Default is 1.
    residual_tol : float, optional
        Tolerance on the solve residual max|Mv + 1|, scaled by
        max(1, |M| |v|). Default is 1e-10.

    Returns
    ----------
    minerr.Certificate or minerr.Infeasible
        The certificate, or Infeasible if M is not Hurwitz.
    """

    M = np.asarray(M, dtype=float)
    _require_square(M)
    ones = np.ones(M.shape[0])

    try:
        v = lu_solve(M, -ones)
    except SingularMatrixError:
        return Infeasible("singular", gain_index)

    if not np.all(v > 0):
        return Infeasible("not Hurwitz: -M^-1 1 has a non-positive entry", gain_index)

    Mv = M @ v
    scale = max(1.0, np.linalg.norm(M, np.inf) * np.max(v))
    if np.max(np.abs(Mv + ones)) > residual_tol * scale:
        return Infeasible("ill-conditioned: residual exceeds tolerance", gain_index)

    epsilon = float(np.min(-Mv / v))
    if not epsilon > 0:
        return Infeasible("not Hurwitz: non-negative row in Mv", gain_index)

    # the division above may round up by an ulp.
    while not np.all(Mv <= -epsilon * v):
        epsilon = float(np.nextafter(epsilon, 0.0))

    return Certificate(gain_index, v, epsilon, matrix=M)
