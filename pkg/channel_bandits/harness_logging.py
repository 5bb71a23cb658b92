import functools
import logging
import os
import sys
import time
import uuid
from dataclasses import dataclass
from datetime import datetime
from logging import LogRecord
from typing import Callable, List, Optional

import colorama
import structlog

from channel_bandits import __version__

'''
Guidance on logging in the harness:

stdout is for the operator: progress, the final summary table and the "Done!" line.

logger output goes to the console (INFO and up) and to the log file in the output
directory (DEBUG and up); it should include:
 - function entry/exit timings for experiment-level operations
 - chunk-level liveness indicators
 - divergence warnings and configuration errors

The numerical core stays quiet: DEBUG only, plus divergence warnings.
'''

LOG_FILE_NAME = 'channel_bandits.log'

SHARED_STRUCTLOG_PROCESSORS = [
    structlog.contextvars.merge_contextvars,
    structlog.stdlib.add_log_level,
    structlog.stdlib.ExtraAdder(),
    structlog.stdlib.PositionalArgumentsFormatter(),
    structlog.processors.TimeStamper(fmt="iso", utc=True),
    structlog.processors.StackInfoRenderer(),
    structlog.processors.format_exc_info,
    structlog.processors.UnicodeDecoder(),
    structlog.processors.CallsiteParameterAdder(
        {
            structlog.processors.CallsiteParameter.FILENAME,
            structlog.processors.CallsiteParameter.FUNC_NAME,
            structlog.processors.CallsiteParameter.LINENO,
        }
    ),
]

LOG_LEVEL_COLORS = {
    'critical': colorama.Style.BRIGHT + colorama.Fore.RED,
    'error': colorama.Fore.RED,
    'warning': colorama.Fore.YELLOW,
    'info': colorama.Fore.GREEN,
    'debug': colorama.Fore.CYAN,
}
LOG_LEVEL_PADDING = len(max(LOG_LEVEL_COLORS.keys(), key=len))
CONSOLE_RENDERER_STYLE = {
    "reset": colorama.Style.RESET_ALL,
    "timestamp": colorama.Style.DIM + colorama.Fore.WHITE,
    "event": colorama.Fore.WHITE,
}

# Numbered messages, formatted with msg_args
ERROR_MESSAGES = {
    2001: 'Invalid config field {}: {}',
    2002: 'Config file not found at "{}"',
    2003: 'Config file "{}" could not be parsed: {}',
    3001: 'Output directory {} is not writable: {}',
    4001: '{} of {} runs for policy {} exceeded the trace cap {}',
    4002: 'Best channel {} does not exceed the critical probability {}; no policy can stabilize',
}


@dataclass
class HarnessLoggingConfig:
    level: int
    datefmt: str
    handlers: List[logging.Handler]


class HarnessConsoleLogFilter(logging.Filter):
    """
    Keeps records flagged with `file_only=True` out of the console. Chunk-level liveness
    messages are useful in the log file but would fight with the tqdm progress bar.
    """

    def filter(self, record: LogRecord) -> bool:
        return not record.__dict__.get('file_only', False)


def configure_structlog() -> None:
    structlog.stdlib.recreate_defaults()

    structlog.configure(
        processors=[
            *SHARED_STRUCTLOG_PROCESSORS,
            structlog.stdlib.ProcessorFormatter.wrap_for_formatter,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )


def readable_log_formatter(use_color: bool) -> structlog.stdlib.ProcessorFormatter:
    custom_console_renderer = structlog.dev.ConsoleRenderer(
        columns=[
            structlog.dev.Column(
                "timestamp",
                structlog.dev.KeyValueColumnFormatter(
                    key_style=None,
                    value_style=_color_switch("timestamp", use_color),
                    reset_style=_color_switch("reset", use_color),
                    value_repr=lambda value: datetime.fromisoformat(f"{value[:-1]}+00:00").strftime(
                        "%Y-%m-%d %H:%M:%S"
                    ),
                ),
            ),
            structlog.dev.Column(
                "level",
                structlog.dev.KeyValueColumnFormatter(
                    key_style=None,
                    value_style="",
                    reset_style="",
                    value_repr=lambda value: _log_level_colorizer(
                        value, LOG_LEVEL_PADDING, use_color
                    ),
                ),
            ),
            structlog.dev.Column(
                "event",
                structlog.dev.KeyValueColumnFormatter(
                    key_style=None,
                    value_style=_color_switch("event", use_color),
                    reset_style=_color_switch("reset", use_color),
                    value_repr=str,
                ),
            ),
            # Drops the bound context vars from the rendered line
            structlog.dev.Column(
                "",
                structlog.dev.KeyValueColumnFormatter(
                    key_style=None,
                    value_style="",
                    reset_style="",
                    value_repr=lambda val: "",
                ),
            ),
        ],
    )

    return structlog.stdlib.ProcessorFormatter(
        foreign_pre_chain=SHARED_STRUCTLOG_PROCESSORS,
        processors=[
            structlog.stdlib.ProcessorFormatter.remove_processors_meta,
            custom_console_renderer,
        ],
    )


def _log_level_colorizer(log_level: str, pad_len: int, use_color: bool) -> str:
    log_level_padded = str(log_level + (' ' * (pad_len - len(log_level))))

    if not use_color:
        return log_level_padded

    color = LOG_LEVEL_COLORS.get(log_level, colorama.Fore.WHITE)
    return f"[{color}{log_level_padded}{colorama.Style.RESET_ALL}]"


def _color_switch(column: str, use_color: bool) -> str:
    if not use_color:
        return ""

    return CONSOLE_RENDERER_STYLE[column]


def bind_default_harness_context(command: str, seed: Optional[int]) -> str:
    run_uuid = str(uuid.uuid4())
    structlog.contextvars.clear_contextvars()
    structlog.contextvars.bind_contextvars(
        command=command,
        master_seed=seed,
        harness_run_uuid=run_uuid,
        harness_version=__version__,
    )
    return run_uuid


def configure(outdir: Optional[str], verbose: bool = False) -> HarnessLoggingConfig:
    logging_handlers: list[logging.Handler] = []

    # Remove default handlers that are added when logging is used before configuring
    logging.getLogger().handlers.clear()

    configure_structlog()

    console_log_handler = logging.StreamHandler(stream=sys.stdout)
    console_log_handler.setFormatter(readable_log_formatter(use_color=sys.stdout.isatty()))
    console_log_handler.setLevel(logging.DEBUG if verbose else logging.INFO)
    console_log_handler.addFilter(HarnessConsoleLogFilter())
    logging_handlers.append(console_log_handler)

    if outdir:
        logfile_handler = logging.FileHandler(os.path.join(outdir, LOG_FILE_NAME), mode='a')
        logfile_handler.setFormatter(readable_log_formatter(use_color=False))
        logfile_handler.setLevel(logging.DEBUG)
        logging_handlers.append(logfile_handler)

    config = HarnessLoggingConfig(
        level=logging.DEBUG,
        datefmt='%Y-%m-%d %H:%M:%S',
        handlers=logging_handlers,
    )

    logging.basicConfig(
        level=config.level,
        datefmt=config.datefmt,
        handlers=logging_handlers,
        force=True,
    )

    logger = logging.getLogger(__name__)
    if outdir:
        logger.debug(f'Logging setup complete with handlers for console and {LOG_FILE_NAME}')
    else:
        logger.debug('Logging setup complete with a console handler')

    return config


def close_out(config: HarnessLoggingConfig) -> None:
    for handler in config.handlers:
        handler.flush()
        if isinstance(handler, logging.FileHandler):
            handler.close()


def log_standard_error(
    level: int,
    error_code: int,
    msg_args: Optional[list] = None,
    logger: Optional[logging.Logger] = None,
) -> None:
    logger = logger or logging.getLogger(__name__)
    template = ERROR_MESSAGES.get(error_code, 'Unknown error')
    logger.log(level, f'[{error_code}] {template.format(*(msg_args or []))}')


def log_entry_exit(logger: logging.Logger) -> Callable:
    def decorator(func):
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            logger.debug(f'{func.__name__}: Starting')
            start = time.perf_counter()
            try:
                return func(*args, **kwargs)
            finally:
                logger.debug(f'{func.__name__}: Done in {time.perf_counter() - start:.2f}s')

        return wrapper

    return decorator


def generate_logging_extras_dict_for_done_message(statuses: Optional[list] = None) -> dict:
    """Helper for the structured status extra attached to the final "Done!" log event.

    Args:
        statuses (Optional[list], optional): One dict per policy, with 'policy' and 'status'
            keys. Defaults to None.

    Returns:
        dict: {'statuses': {'overall': ..., '<policy>': ...}}
    """
    if not statuses:
        statuses = []

    log_extras_status_dict = dict(
        statuses=dict(
            overall=(
                'success' if all(s.get('status', '') == 'success' for s in statuses) else 'failed'
            )
        )
    )
    for status in statuses:
        if policy := status.get('policy'):
            log_extras_status_dict['statuses'][policy] = status.get('status', '')

    return log_extras_status_dict
