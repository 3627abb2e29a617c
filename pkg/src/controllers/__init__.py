"""Controllers package: regulator, trigger mechanism and hybrid simulation engine."""

from .regulation import BackstepLaw, ObserverGains, PolynomialGain, build_observer
from .trigger import TriggerPolicy, trigger_value
from .hybridsim import HybridSimulator, simulate

__all__ = [
    'BackstepLaw',
    'ObserverGains',
    'PolynomialGain',
    'build_observer',
    'TriggerPolicy',
    'trigger_value',
    'HybridSimulator',
    'simulate'
]
