"""dnnbench: a dependency-light DNN inference benchmark suite.

Five CNNs (CifarNet, AlexNet, SqueezeNet, ResNet50, VGG16) and two recurrent
forecasters (LSTM, GRU) built from instrumented numpy kernels, with per-layer
operation counters, memory-footprint analysis and report emitters.
"""

from .counters import CATEGORIES, OpCategory, OpCounter, ProfileRecord
from .errors import (BenchError, ConfigError, DataError, GraphError, InputError, PersistenceError,
                     ReportError, ShapeError, TensorIndexError, WeightError)
from .graph import (LayerDescriptor, NetworkGraph, ShapeTrace, argmax_class, run_inference,
                    topological_schedule, validate_shapes)
from .networks import CNNS, NETWORKS, RNNS, build_network
from .profiler import (BreakdownReport, MemoryFootprint, breakdown_by_layer_type, emit_report, footprint,
                       profile_run, top_ops)
from .weights import (WeightStore, count_parameters, generate_synthetic, load_store, write_store,
                      zero_store)

__version__ = "0.1.0"

__all__ = [
    "BenchError", "BreakdownReport", "CATEGORIES", "CNNS", "ConfigError", "DataError", "GraphError",
    "InputError", "LayerDescriptor", "MemoryFootprint", "NETWORKS", "NetworkGraph", "OpCategory",
    "OpCounter", "PersistenceError", "ProfileRecord", "RNNS", "ReportError", "ShapeError", "ShapeTrace",
    "TensorIndexError", "WeightError", "WeightStore", "argmax_class", "breakdown_by_layer_type",
    "build_network", "count_parameters", "emit_report", "footprint", "generate_synthetic", "load_store",
    "profile_run", "run_inference", "top_ops", "topological_schedule", "validate_shapes", "write_store",
    "zero_store",
]
