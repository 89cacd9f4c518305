"""Scenario files (JSON) and trajectory files (CSV).

A scenario file holds::

    {
      "name": "optional name",
      "dims": {"n": 3, "p": 2, "q": 1},
      "C": [[...], ...],
      "A": {"const": [[...], ...], "y_terms": [{"j": 1, "matrix": [[...], ...]}]},
      "beta": ["0", "y2^2 - 0.2*y2^3", "0"],
      "u": ["0"],
      "delta": {"true": [...], "upper": [...], "lower": [...]},
      "gains": {"upper": [G1, G2, ...], "lower": [G1, G2, ...]},
      "init": {"x0": [...], "xbar0": [...], "xlower0": [...]},
      "transform": [[...], ...],
      "sim": {"dt": 0.001, "t_end": 20, "record_stride": 1}
    }

"name", "A.y_terms", "u", "transform" and "sim" are optional.
"""

# external imports
import json
import logging
import numbers
from pathlib import Path

import numpy as np
import pandas as pd

# internal imports
from .exprlang import ParseError, SignalVector
from .model import PlantModel, DisturbanceEnvelope, Scenario
from .observer import GainSet, HypothesisViolation
from .sim import SimParams, Trajectory, ErrorTrajectory, Completed

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"


class ScenarioError(ValueError):
    """Raised on an unreadable or malformed scenario file.

    Attributes
    ----------
    path : str or None
        The scenario file.
    location : str or None
        The JSON key path of the offending value (e.g. gains.upper[2][0][1]),
        or line:col for JSON syntax errors.
    """

    def __init__(self, message, path=None, location=None):
        prefix = ":".join(str(part) for part in (path, location) if part)
        super().__init__("{}: {}".format(prefix, message) if prefix else message)
        self.message = message
        self.path = None if path is None else str(path)
        self.location = location


class _Reader:
    """Walks a scenario document, raising ScenarioError with the key path of
    the first malformed value."""

    def __init__(self, path=None):
        self.path = path

    def error(self, message, location):
        return ScenarioError(message, self.path, location)

    def get(self, doc, key, location, required=True):
        where = "{}.{}".format(location, key) if location else key
        if not isinstance(doc, dict):
            raise self.error("expected an object", location or "<root>")
        if key not in doc:
            if required:
                raise self.error("missing key", where)
            return None
        return doc[key]

    def integer(self, value, location, minimum=1):
        if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
            raise self.error("expected an integer >= {}".format(minimum), location)
        return int(value)

    def number(self, value, location):
        if isinstance(value, bool) or not isinstance(value, numbers.Real) or not np.isfinite(value):
            raise self.error("expected a finite number", location)
        return float(value)

    def vector(self, value, dim, location):
        if not isinstance(value, list):
            raise self.error("expected an array", location)
        if dim is not None and len(value) != dim:
            raise self.error("expected {} entries, got {}".format(dim, len(value)), location)
        return [self.number(v, "{}[{}]".format(location, i)) for i, v in enumerate(value)]

    def matrix(self, value, rows, cols, location):
        if not isinstance(value, list):
            raise self.error("expected an array of rows", location)
        if rows is not None and len(value) != rows:
            raise self.error("expected {} rows, got {}".format(rows, len(value)), location)
        return [self.vector(row, cols, "{}[{}]".format(location, i)) for i, row in enumerate(value)]

    def signal(self, value, dim, location, p=None, q=None, time_only=False):
        if not isinstance(value, list):
            raise self.error("expected an array of expressions", location)
        if dim is not None and len(value) != dim:
            raise self.error("expected {} expressions, got {}".format(dim, len(value)), location)

        if time_only:
            p = q = 0
        exprs = []
        for i, src in enumerate(value):
            where = "{}[{}]".format(location, i)
            if not isinstance(src, str):
                raise self.error("expected an expression string", where)
            try:
                exprs.append(SignalVector.from_strings([src], p, q).exprs[0])
            except ParseError as err:
                raise self.error(str(err), where) from err
        return SignalVector(exprs)


def scenario_from_dict(doc, path=None):
    """Builds a Scenario from a parsed scenario document.

    Parameters
    ----------
    doc : dict
        The parsed JSON document.
    path : str, optional
        The file the document came from, for error messages.

    Returns
    ----------
    minerr.Scenario
        The scenario. Raises ScenarioError on schema errors and
        HypothesisViolation when the initial frames do not enclose x0.
    """

    r = _Reader(path)

    dims = r.get(doc, "dims", "")
    n = r.integer(r.get(dims, "n", "dims"), "dims.n")
    p = r.integer(r.get(dims, "p", "dims"), "dims.p")
    q = r.integer(r.get(dims, "q", "dims", required=False) or 1, "dims.q")

    C = r.matrix(r.get(doc, "C", ""), p, n, "C")

    A = r.get(doc, "A", "")
    A_const = r.matrix(r.get(A, "const", "A"), n, n, "A.const")
    y_terms = []
    for i, term in enumerate(r.get(A, "y_terms", "A", required=False) or []):
        where = "A.y_terms[{}]".format(i)
        j = r.integer(r.get(term, "j", where), where + ".j")
        if j > p:
            raise r.error("output index {} exceeds p={}".format(j, p), where + ".j")
        y_terms.append((r.matrix(r.get(term, "matrix", where), n, n, where + ".matrix"), j))

    beta = r.signal(r.get(doc, "beta", ""), n, "beta", p, q)
    u_src = r.get(doc, "u", "", required=False)
    u_signal = SignalVector.zeros(q) if u_src is None else r.signal(u_src, q, "u", time_only=True)

    delta = r.get(doc, "delta", "")
    envelope_signals = [
        r.signal(r.get(delta, key, "delta"), n, "delta." + key, time_only=True)
        for key in ("true", "upper", "lower")
    ]

    gains = r.get(doc, "gains", "")
    families = {}
    for family in ("upper", "lower"):
        matrices = r.get(gains, family, "gains")
        where = "gains." + family
        if not isinstance(matrices, list) or len(matrices) == 0:
            raise r.error("expected a non-empty array of gain matrices", where)
        families[family] = [r.matrix(L, n, p, "{}[{}]".format(where, k)) for k, L in enumerate(matrices)]
    if len(families["upper"]) != len(families["lower"]):
        raise r.error("upper and lower gain lists differ in length", "gains")

    init = r.get(doc, "init", "")
    x0, xbar0, xlower0 = (
        r.vector(r.get(init, key, "init"), n, "init." + key) for key in ("x0", "xbar0", "xlower0")
    )

    transform = r.get(doc, "transform", "", required=False)
    if transform is not None:
        transform = r.matrix(transform, n, n, "transform")

    sim_doc = r.get(doc, "sim", "", required=False) or {}
    sim_kwargs = {}
    for key in ("dt", "t_end", "divergence_threshold"):
        if key in sim_doc:
            sim_kwargs[key] = r.number(sim_doc[key], "sim." + key)
    if "record_stride" in sim_doc:
        sim_kwargs["record_stride"] = r.integer(sim_doc["record_stride"], "sim.record_stride")

    name = doc.get("name") or (Path(path).stem if path else "scenario")

    try:
        plant = PlantModel(C, A_const, beta, u_signal=u_signal, A_y_terms=y_terms)
        envelope = DisturbanceEnvelope(*envelope_signals)
        scenario = Scenario(
            plant=plant,
            envelope=envelope,
            gains=GainSet(families["upper"], families["lower"]),
            x0=x0,
            xbar0=xbar0,
            xlower0=xlower0,
            sim=SimParams(**sim_kwargs),
            transform=transform,
            name=str(name),
        )
    except HypothesisViolation:
        raise
    except ValueError as err:
        raise r.error(str(err), "<scenario>") from err

    logger.debug("Loaded scenario %s (n=%d, p=%d, phi=%d).", scenario.name, n, p, scenario.gains.phi)
    return scenario


def load_scenario(path):
    """Reads a scenario file.

    Parameters
    ----------
    path : str or pathlib.Path
        The JSON scenario file.

    Returns
    ----------
    minerr.Scenario
    """

    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ScenarioError("cannot read file ({})".format(err.strerror), path) from err

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ScenarioError(err.msg, path, "{}:{}".format(err.lineno, err.colno)) from err

    return scenario_from_dict(doc, path)


def _columns(prefix, n):
    return ["{}_{}".format(prefix, i) for i in range(1, n + 1)]


def trajectory_frame(traj):
    """Returns a trajectory as a pandas.DataFrame with the columns t, x_i,
    xbar_i, xlower_i, upidx_i, loidx_i."""

    columns = {"t": traj.times}
    for prefix, values in (("x", traj.x), ("xbar", traj.xbar), ("xlower", traj.xlower)):
        columns.update(zip(_columns(prefix, traj.n), values.T))
    for prefix, values in (("upidx", traj.upper_idx), ("loidx", traj.lower_idx)):
        columns.update(zip(_columns(prefix, traj.n), values.astype(int).T))
    return pd.DataFrame(columns)


def write_trajectory_csv(traj, path):
    trajectory_frame(traj).to_csv(path, index=False, float_format=FLOAT_FORMAT)


def read_trajectory_csv(path, status=None, name=None):
    """Reads a trajectory.csv back into a Trajectory.

    Parameters
    ----------
    path : str or pathlib.Path
        The CSV file.
    status : optional
        The status to attach. Default is Completed().
    name : str, optional
        The trajectory name. Default is the file stem.

    Returns
    ----------
    minerr.Trajectory
    """

    frame = pd.read_csv(path)
    n = (len(frame.columns) - 1) // 5
    if len(frame.columns) != 1 + 5 * n or frame.columns[0] != "t":
        raise ValueError("{} is not a trajectory file.".format(path))

    return Trajectory(
        times=frame["t"].to_numpy(dtype=float),
        x=frame[_columns("x", n)].to_numpy(dtype=float),
        xbar=frame[_columns("xbar", n)].to_numpy(dtype=float),
        xlower=frame[_columns("xlower", n)].to_numpy(dtype=float),
        upper_idx=frame[_columns("upidx", n)].to_numpy(dtype=int),
        lower_idx=frame[_columns("loidx", n)].to_numpy(dtype=int),
        status=status or Completed(),
        name=name or Path(path).stem,
    )


def write_error_oracle_csv(errors, path):
    """Writes an ErrorTrajectory with the columns t, x_i, ebar_i, elower_i."""

    if not isinstance(errors, ErrorTrajectory):
        raise TypeError("Expected an ErrorTrajectory.")

    n = errors.x.shape[1]
    columns = {"t": errors.times}
    for prefix, values in (("x", errors.x), ("ebar", errors.ebar), ("elower", errors.elower)):
        columns.update(zip(_columns(prefix, n), values.T))
    pd.DataFrame(columns).to_csv(path, index=False, float_format=FLOAT_FORMAT)


def comparison_frame(times, widths):
    """Returns per-component interval widths over time of several observers.

    Parameters
    ----------
    times : numpy.ndarray
        The common time grid.
    widths : dict
        Maps a label (e.g. 'multi', 'single1', 'intersection') to an
        (N, n) array of widths.

    Returns
    ----------
    pandas.DataFrame
        Columns t, width_<label>_<i>.
    """

    columns = {"t": times}
    for label, values in widths.items():
        columns.update(zip(_columns("width_" + label, values.shape[1]), values.T))
    return pd.DataFrame(columns)


def write_json(document, path):
    with open(path, "w") as f:
        json.dump(document, f, indent=2)
        f.write("\n")
