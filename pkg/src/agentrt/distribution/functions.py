"""Process-task functions available in every worker."""

import os
import time

from .registry import register_function


@register_function("identity")
def identity(value):
    return value


@register_function("square")
def square(value):
    return value * value


@register_function("busy_loop")
def busy_loop(milliseconds):
    """Spin the CPU for the given wall time; returns the iteration count."""
    deadline = time.perf_counter() + milliseconds / 1000.0
    n = 0
    while time.perf_counter() < deadline:
        n += 1
    return n


@register_function("sleep")
def sleep(seconds):
    time.sleep(seconds)
    return seconds


@register_function("fail")
def fail(message):
    raise RuntimeError(message)


@register_function("exit")
def exit_worker(code):
    os._exit(int(code))
