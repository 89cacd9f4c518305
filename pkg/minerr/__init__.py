__version__ = "0.1.0"

from .numkit import *
from .exprlang import ParseError, EvalError, EvalContext, SignalVector, parse, evaluate
from .observer import *
from .model import *
from .sim import *
from .metrics import *
from .io import ScenarioError, load_scenario, scenario_from_dict, read_trajectory_csv, write_trajectory_csv
from .runner import simulate_batch

try:
    from .ray import *
except ModuleNotFoundError:
    pass
