"""fadec: fixed-point recurrent multi-view-stereo depth toolkit.

Numerics (power-of-two quantization), an integer operator library with
LUT-approximated activations, a keyframe/cost-volume/ConvLSTM pipeline,
an operator-workload analyzer with HW/SW partitioning, and a
deterministic PL/CPU co-design schedule simulator.
"""

__version__ = "0.1.0"
