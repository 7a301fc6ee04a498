"""Real-time CAN channel discovery from inertial measurements."""

__version__ = "0.1.0"

from .canbus import CanFrame, ChannelKey, ChannelStore  # noqa: F401
from .config import SessionConfig  # noqa: F401
from .session import Pipeline, run_batch  # noqa: F401
