from ._pofbm import *  # noqa: F401,F403
from ._pofbm import __doc__  # noqa: F401
