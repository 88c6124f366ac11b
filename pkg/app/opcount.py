"""
Instrumented scalar for counting arithmetic operations in a filter step.

Each +, −, unary −, ×, ÷, sqrt, sin and cos evaluated on a CountedScalar adds one to the
shared OpCounter. Comparisons and conversions are free.
"""
import math
from typing import Union

Number = Union[int, float]


class OpCounter:
    def __init__(self):
        self.count = 0

    def wrap(self, value: Number) -> "CountedScalar":
        return CountedScalar(float(value), self)

    def _apply(self, fn, x: Union["CountedScalar", Number]) -> Union["CountedScalar", float]:
        if isinstance(x, CountedScalar):
            self.count += 1
            return CountedScalar(fn(x.value), self)
        return fn(x)

    def sqrt(self, x):
        return self._apply(math.sqrt, x)

    def sin(self, x):
        return self._apply(math.sin, x)

    def cos(self, x):
        return self._apply(math.cos, x)


def _value(x) -> float:
    return x.value if isinstance(x, CountedScalar) else x


class CountedScalar:
    __slots__ = ("value", "counter")

    def __init__(self, value: float, counter: OpCounter):
        self.value = value
        self.counter = counter

    def _result(self, value: float) -> "CountedScalar":
        self.counter.count += 1
        return CountedScalar(value, self.counter)

    def __add__(self, other):
        return self._result(self.value + _value(other))

    def __radd__(self, other):
        return self._result(_value(other) + self.value)

    def __sub__(self, other):
        return self._result(self.value - _value(other))

    def __rsub__(self, other):
        return self._result(_value(other) - self.value)

    def __mul__(self, other):
        return self._result(self.value * _value(other))

    def __rmul__(self, other):
        return self._result(_value(other) * self.value)

    def __truediv__(self, other):
        return self._result(self.value / _value(other))

    def __rtruediv__(self, other):
        return self._result(_value(other) / self.value)

    def __neg__(self):
        return self._result(-self.value)

    def __lt__(self, other):
        return self.value < _value(other)

    def __le__(self, other):
        return self.value <= _value(other)

    def __gt__(self, other):
        return self.value > _value(other)

    def __ge__(self, other):
        return self.value >= _value(other)

    def __float__(self):
        return self.value

    def __repr__(self):
        return f"CountedScalar({self.value!r})"
