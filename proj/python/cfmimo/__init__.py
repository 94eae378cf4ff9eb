"""Python access to the cfmimo beamforming solvers.

Beamformers and channels are nested lists indexed ``[ap][ue]`` whose
entries are complex numpy arrays.
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
