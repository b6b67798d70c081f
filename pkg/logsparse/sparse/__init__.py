from . import surrogate, numerics, solver, conditions, oracles

from .surrogate import *
from .numerics import *
from .solver import *
from .conditions import *
from .oracles import *
