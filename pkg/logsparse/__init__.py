from .utils import *
from .sparse import *
from .tdoa import *

from . import main
from .main import *


def entry_point():
    import sys
    from .cli import main as run

    sys.exit(run(sys.argv[1:]))
