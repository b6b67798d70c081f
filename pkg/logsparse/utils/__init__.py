from . import errors, log, types, env, files, parsing, format, dataclass, progress

from .errors import *
from .log import *
from .types import *
from .env import *
from .files import *
from .parsing import *
from .format import *
from .dataclass import *
from .progress import *
