"""Smart-home fault injection, handling, and evaluation toolkit."""

from .apps import AppEngine, AppRule, AppSpec, Condition, Event, builtin_apps
from .checkpoint import (CheckpointLog, RollbackFailure, RollbackResult,
                         RollbackStrategy, rollback)
from .config import ConfigFile, DeviceConfig, GeneralConfig, NotifyTrigger, init_config
from .devices import (DeviceKind, DeviceSpec, Health, Registry, ValueDomain,
                      default_home, notification_sink)
from .faults import (FaultKind, FaultReport, FaultSpec, FaultTable, Fixability,
                     ParseError, PerfectOracle, parse_fault_schedule,
                     transform_reading, write_fault_schedule)
from .handler import AutoHandler, HandlerSession, SessionOutcome, detect_redundant_devices
from .handling import (RetryOutcome, TransactionStatus, activate_redundant_device,
                       device_hardware_restart, device_software_restart, notify_user,
                       retry, suppress_device, transaction, unsuppress_device)
from .latency import CostModel, function_timings, scheme_timings
from .schemes import BUILTIN_SCHEMES, Scheme, Step
from .simulate import (EnvironmentTrace, RunMetrics, RunMode, Simulation,
                       compute_energy, count_incorrect_states, generate_trace,
                       load_trace, run_simulation, save_trace)

__version__ = "0.1.0"
