"""Synthetic worlds, scenario presets and the trace simulator."""
from synth.presets import PRESETS, corridor, get_preset, home_void_deck, mall_revisits, two_room_home
from synth.simulator import SimulatedTrace, TruthLabel, simulate, transit_part, truth_frame, write_dataset
from synth.world import (
    AccessPoint, Agent, Leg, NoiseModel, Place, Position, Scenario, Transit, Visit, Walkway, World,
)

__all__ = [
    'AccessPoint', 'Agent', 'Leg', 'NoiseModel', 'PRESETS', 'Place', 'Position', 'Scenario',
    'SimulatedTrace', 'Transit', 'TruthLabel', 'Visit', 'Walkway', 'World', 'corridor',
    'get_preset', 'home_void_deck', 'mall_revisits', 'simulate', 'transit_part',
    'truth_frame', 'two_room_home', 'write_dataset',
]
