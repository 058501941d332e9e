from symkernels.nn.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from symkernels.nn.layers import (
    ConvLayer,
    MultiplyCounter,
    avg_pool2x2_backward,
    avg_pool2x2_forward,
    class_sums,
    conv2d_backward,
    conv2d_forward,
    conv2d_forward_loops,
    dense_block_forward,
    fully_connected_backward,
    fully_connected_forward,
    global_avg_pool_backward,
    global_avg_pool_forward,
    relu_backward,
    relu_forward,
    softmax,
    softmax_cross_entropy,
)
from symkernels.nn.network import (
    Network,
    architecture_parameter_count,
    count_parameters,
    network_backward,
    network_forward,
    table3_network,
)

__all__ = [
    "CheckpointError",
    "ConvLayer",
    "MultiplyCounter",
    "Network",
    "architecture_parameter_count",
    "avg_pool2x2_backward",
    "avg_pool2x2_forward",
    "class_sums",
    "conv2d_backward",
    "conv2d_forward",
    "conv2d_forward_loops",
    "count_parameters",
    "dense_block_forward",
    "fully_connected_backward",
    "fully_connected_forward",
    "global_avg_pool_backward",
    "global_avg_pool_forward",
    "load_checkpoint",
    "network_backward",
    "network_forward",
    "relu_backward",
    "relu_forward",
    "save_checkpoint",
    "softmax",
    "softmax_cross_entropy",
    "table3_network",
]
