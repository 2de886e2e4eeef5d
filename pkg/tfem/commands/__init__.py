from tfem.commands.audit_bounds import cmd_audit_bounds
from tfem.commands.config import AuditConfig, GenConfig, PcaConfig, RunConfig, SweepConfig, resolve
from tfem.commands.gen import cmd_gen
from tfem.commands.pca import cmd_pca
from tfem.commands.run import cmd_run
from tfem.commands.sweep import cmd_sweep

__all__ = [
    "AuditConfig",
    "GenConfig",
    "PcaConfig",
    "RunConfig",
    "SweepConfig",
    "cmd_audit_bounds",
    "cmd_gen",
    "cmd_pca",
    "cmd_run",
    "cmd_sweep",
    "resolve",
]
