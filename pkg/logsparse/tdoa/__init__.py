from . import scene, signals, system, locator, sweep

from .scene import *
from .signals import *
from .system import *
from .locator import *
from .sweep import *
