"""Two parallel parameterised circuits over amplitude-encoded data, with a softmax head."""

from .ansatz import AnsatzSpec, ParameterTable, build_pair, build_pqc1, build_pqc2, parameter_layout
from .circuit import CircuitProgram, run_circuit
from .data import Dataset, MinMaxImageScaler, load_dataset, split
from .head import ModelSpec, compute_metrics, cross_entropy, softmax
from .model import QBPMClassifier, TrainingConfig, evaluate, forward, train
from .noise import NoiseConfig
from .statevector import GateOp, ParamRef, Statevector, amplitude_encode, apply_gate, expectation_z

__version__ = "0.1.0"

__all__ = [
    "AnsatzSpec", "CircuitProgram", "Dataset", "GateOp", "MinMaxImageScaler", "ModelSpec", "NoiseConfig",
    "ParamRef", "ParameterTable", "QBPMClassifier", "Statevector", "TrainingConfig", "amplitude_encode",
    "apply_gate", "build_pair", "build_pqc1", "build_pqc2", "compute_metrics", "cross_entropy", "evaluate",
    "expectation_z", "forward", "load_dataset", "parameter_layout", "run_circuit", "softmax", "split", "train",
]
