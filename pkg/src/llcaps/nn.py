"""Parameters, modules and the two learnable layers everything is built from."""

from __future__ import annotations

from typing import Iterator, Optional

import numpy as np

from .tensor import DEFAULT_DTYPE, Tensor, conv2d, prelu


class Parameter(Tensor):
    """A leaf tensor that always requires grad; its name is assigned by the owning model."""

    def __init__(self, data, dtype=DEFAULT_DTYPE):
        super().__init__(np.array(data, dtype=dtype), requires_grad=True)
        self.name = ""


class Module:
    """Base class; parameters and submodules are discovered from attributes in definition order."""

    training = True

    def named_parameters(self, prefix: str = "") -> Iterator[tuple]:
        for key, value in vars(self).items():
            path = f"{prefix}{key}"
            if isinstance(value, Parameter):
                yield path, value
            elif isinstance(value, Module):
                yield from value.named_parameters(path + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{path}.{i}.")
                    elif isinstance(item, Parameter):
                        yield f"{path}.{i}", item

    def parameters(self) -> list:
        return [p for _, p in self.named_parameters()]

    def assign_names(self) -> None:
        seen = set()
        for name, p in self.named_parameters():
            if name in seen:
                raise ValueError(f"duplicate parameter name {name}")
            seen.add(name)
            p.name = name

    def state_dict(self) -> dict:
        return {name: p.data for name, p in self.named_parameters()}

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = np.zeros_like(p.data)

    def astype(self, dtype) -> "Module":
        """Cast every parameter in place (e.g. to float64 for gradient checks)."""
        for p in self.parameters():
            p.data = p.data.astype(dtype)
            p.grad = None
        return self

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def he_uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Conv2d(Module):
    """Same-padded conv with He-uniform weights and zero bias; ``zero=True`` zeroes the weights."""

    def __init__(self, cin: int, cout: int, k: int, rng: np.random.Generator,
                 stride: int = 1, padding: Optional[int] = None, zero: bool = False):
        fan_in = cin * k * k
        # draw even when zeroed so the rng stream does not depend on init flags
        w = he_uniform(rng, (cout, cin, k, k), fan_in)
        self.weight = Parameter(np.zeros_like(w) if zero else w)
        self.bias = Parameter(np.zeros(cout))
        self.stride = stride
        self.padding = k // 2 if padding is None else padding

    def forward(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, self.stride, self.padding)


class PReLU(Module):
    def __init__(self, channels: int, init: float = 0.25):
        self.slope = Parameter(np.full(channels, init))

    def forward(self, x: Tensor) -> Tensor:
        return prelu(x, self.slope)
