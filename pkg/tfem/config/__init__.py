from tfem.config.settings import Defaults

__all__ = ["Defaults"]
