from erl.utils.logging import setup_logging
from erl.utils.settings import HarnessSettings, get_settings

__all__ = ["HarnessSettings", "get_settings", "setup_logging"]
