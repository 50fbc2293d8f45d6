"""Information quantities of parametric quantum channels.

Channels are stored as Choi operators; divergences are in bits. See
:mod:`qchan.protocol` for the discretize-and-send protocol and
:mod:`qchan.metrology` for estimation experiments.
"""
__version__ = "0.1.0"

from .channels import (  # noqa: E402
    Channel,
    bitflip_channel,
    choi_from_kraus,
    depolarizing_channel,
    pauli_channel,
    tensor_channel,
    tensor_power,
)
from .divergences import d2_channels, d2_channels_variational, d2_states  # noqa: E402
from .errors import (  # noqa: E402
    ConditionError,
    InfiniteDivergenceError,
    InfiniteFisherError,
    InvariantViolation,
    QchanError,
    SpecError,
)
from .families import ChannelFamily, load_family  # noqa: E402
from .fisher import jr_max, rld_norm_channel  # noqa: E402
from .protocol import build_grid, encode, protocol_sweep  # noqa: E402

__all__ = [
    "Channel", "ChannelFamily", "ConditionError", "InfiniteDivergenceError",
    "InfiniteFisherError", "InvariantViolation", "QchanError", "SpecError",
    "bitflip_channel", "build_grid", "choi_from_kraus", "d2_channels",
    "d2_channels_variational", "d2_states", "depolarizing_channel", "encode",
    "jr_max", "load_family", "pauli_channel", "protocol_sweep", "rld_norm_channel",
    "tensor_channel", "tensor_power",
]
