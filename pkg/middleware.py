import json
import logging
from functools import wraps
from typing import Callable

import numpy as np
from pydantic import ValidationError

from tools.errors import ConfigError, LaxMarkovError, StepSizeUnderflowError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def failure_payload(error: str, status: str, **extra) -> str:
    return json.dumps({"success": False, "error": error, "status": status, **extra})


def guard_command(func: Callable[..., int]) -> Callable[..., int]:
    """
    Wrap a CLI command so exceptions become exit codes and a JSON failure payload.

    Configuration problems exit with 2, numerical failures with 3.
    """

    @wraps(func)
    def wrapper(*args, **kwargs) -> int:
        try:
            return func(*args, **kwargs)
        except ValidationError as e:
            print(failure_payload(f"Invalid configuration: {e.error_count()} error(s): {str(e)}", "config_error"))
            return EXIT_CONFIG
        except ConfigError as e:
            print(failure_payload(f"Configuration error: {str(e)}", "config_error"))
            return EXIT_CONFIG
        except (FileNotFoundError, IsADirectoryError, PermissionError, UnicodeDecodeError) as e:
            print(failure_payload(f"Cannot read configuration: {str(e)}", "config_error"))
            return EXIT_CONFIG
        except StepSizeUnderflowError as e:
            print(failure_payload(f"Integrator failure: {str(e)}", "numerical_error", t_reached=e.t_reached))
            return EXIT_NUMERICAL
        except (LaxMarkovError, FloatingPointError, np.linalg.LinAlgError) as e:
            print(failure_payload(f"Numerical failure: {str(e)}", "numerical_error"))
            return EXIT_NUMERICAL

    return wrapper
