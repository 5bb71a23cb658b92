import logging
import traceback
from typing import Optional

logger = logging.getLogger(__name__)


class BadConfigException(Exception):
    def __init__(
        self,
        msg: str = 'BadConfigException (see earlier messages)',
        exc: Optional[Exception] = None,
        field: Optional[str] = None,
    ):
        if field:
            msg = f'{field}: {msg}'
        super().__init__(msg)
        self.field = field
        logger.error(msg)

        if exc:
            exc_type = type(exc).__name__
            logger.error(msg=f'{exc_type}: {str(exc)}')
            logger.debug(msg=f'Traceback:\n{traceback.format_exc()}')


class OutputWriteException(Exception):
    def __init__(self, msg: str, path: Optional[str] = None):
        super().__init__(msg)
        self.path = path
        logger.error(msg)


class DimensionError(ValueError):
    pass


class InvalidModelError(ValueError):
    pass


class InvalidChannelBankError(ValueError):
    pass


class ChannelIndexError(IndexError):
    pass


class ConvergenceFailure(ArithmeticError):
    def __init__(self, msg: str, residual: float, iterations: int):
        super().__init__(f'{msg} (residual={residual:.3e} after {iterations} iterations)')
        self.residual = residual
        self.iterations = iterations


class StabilizabilityError(ValueError):
    pass


class PolicyConfigurationError(ValueError):
    pass
