"""
Dense layer stacks with exact forward and backward passes in float64.
"""

from typing import List, Sequence, Tuple

import numpy as np

from src.exceptions import ValidationError

ACTIVATIONS = ("tanh", "none")


class DenseLayer:
    """y = activation(W x + b) with W of shape (out, in)."""

    def __init__(self, weight, bias, activation: str = "none"):
        weight = np.array(weight, dtype=np.float64)
        bias = np.array(bias, dtype=np.float64)
        if weight.ndim != 2 or bias.shape != (weight.shape[0],):
            raise ValidationError(f"layer weight {weight.shape} and bias {bias.shape} do not match")
        if not (np.all(np.isfinite(weight)) and np.all(np.isfinite(bias))):
            raise ValidationError("layer parameters must be finite")
        if activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation '{activation}'")
        weight.setflags(write=False)
        bias.setflags(write=False)
        self.weight = weight
        self.bias = bias
        self.activation = activation

    @property
    def input_size(self) -> int:
        return self.weight.shape[1]

    @property
    def output_size(self) -> int:
        return self.weight.shape[0]

    def forward(self, inputs: np.ndarray) -> np.ndarray:
        """Apply the layer to a batch of shape (N, in)."""
        pre = inputs @ self.weight.T + self.bias
        return np.tanh(pre) if self.activation == "tanh" else pre

    def to_dict(self) -> dict:
        return {"w": self.weight.tolist(), "b": self.bias.tolist(), "activation": self.activation}


def check_chain(layers: Sequence[DenseLayer]) -> None:
    if not layers:
        raise ValidationError("a network needs at least one layer")
    for index in range(1, len(layers)):
        if layers[index].input_size != layers[index - 1].output_size:
            raise ValidationError(
                f"layer {index} expects {layers[index].input_size} inputs but layer {index - 1} "
                f"produces {layers[index - 1].output_size}"
            )


def forward_with_cache(layers: Sequence[DenseLayer], inputs: np.ndarray) -> List[np.ndarray]:
    """Activations of every layer, starting with the inputs themselves."""
    activations = [inputs]
    for layer in layers:
        activations.append(layer.forward(activations[-1]))
    return activations


def backward(
    layers: Sequence[DenseLayer], activations: List[np.ndarray], output_gradient: np.ndarray
) -> Tuple[np.ndarray, List[Tuple[np.ndarray, np.ndarray]]]:
    """
    Backpropagate a cotangent through the stack.

    Args:
        layers: The layers used in the forward pass
        activations: Output of forward_with_cache
        output_gradient: dL/d(outputs), shape (N, out)

    Returns:
        (dL/d(inputs), [(dL/dW, dL/db) per layer])
    """
    grads = [None] * len(layers)
    upstream = output_gradient
    for index in range(len(layers) - 1, -1, -1):
        layer = layers[index]
        if layer.activation == "tanh":
            upstream = upstream * (1.0 - activations[index + 1] ** 2)
        grads[index] = (upstream.T @ activations[index], upstream.sum(axis=0))
        upstream = upstream @ layer.weight
    return upstream, grads
