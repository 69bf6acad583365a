from functools import wraps
import inspect

from .exceptions import ParameterError


def odd_kernel_required(func):
    """Decorator rejecting even or non-positive ``kernel`` arguments"""
    signature = inspect.signature(func)

    @wraps(func)
    def wrapper(*args, **kwargs):
        bound = signature.bind(*args, **kwargs)
        bound.apply_defaults()
        kernel = bound.arguments['kernel']
        if int(kernel) != kernel or kernel < 1 or kernel % 2 == 0:
            raise ParameterError(f"{func.__name__}: kernel must be an odd integer >= 1, got {kernel!r}")
        return func(*args, **kwargs)
    return wrapper
