"""The coldta module itself."""

###############################################################################
# coldta - cold-start drug-target affinity regression
# Licensed under the MIT License.
###############################################################################

from __future__ import annotations

###############################################################################
# Module information.
###############################################################################

__version__ = "0.3.0"
