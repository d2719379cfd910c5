from .model import FilterSet, ModelState, PassthroughModel, SideModel, build_side_model, forward_frame, q16, quant_eq, tac
from .weights import (
    FormatError,
    ModelHyperparams,
    ModelWeights,
    QuantizedTensor,
    count_macs_per_frame,
    count_macs_per_second,
    count_parameters,
    count_parameters_closed_form,
    init_random,
    layer_shapes,
    passthrough_weights,
    zero_weights,
)
from .container import load_weights, save_weights
