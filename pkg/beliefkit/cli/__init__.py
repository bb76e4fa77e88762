"""The cli module defines the command group and its stage commands."""

from .base import cli

# Each module registers its command on the group when imported.
from . import bench
from . import calibrate
from . import filter
from . import price
from . import quote
from . import simulate
from . import surface
