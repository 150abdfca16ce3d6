from ._preacc import *  # noqa: F401,F403
