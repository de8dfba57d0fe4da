from .badnets import BadNets
from .base import Attack
from .blended import Blended
from .physical import (ColorJitter, PhysicalAugmentation, PhysicalBA,
                       RandomAffine)
from .wanet import WaNet

ATTACKS = {
    "BadNets": BadNets,
    "Blended": Blended,
    "WaNet": WaNet,
    "PhysicalBA": PhysicalBA,
}

__all__ = ["Attack", "ATTACKS", "BadNets", "Blended", "ColorJitter",
           "PhysicalAugmentation", "PhysicalBA", "RandomAffine", "WaNet"]
