# Presets

import math
from typing import Callable, Dict, List, Optional, Tuple

from synth.world import (
    AccessPoint, Agent, Leg, NoiseModel, Place, Scenario, Transit, Visit, Walkway, World,
)
from utils.geo import offset_position

DAY0 = 1_700_006_400  # 2023-11-15 00:00 UTC
ORIGIN = (1.3000, 103.8000)
HOUR = 3600
MINUTE = 60

Preset = Tuple[World, Scenario]


def _mac(group: int, index: int) -> str:
    return f"02{group:04x}{index:06x}"


def _tx_for(target_dbm: float, distance_m: float, exponent: float = 3.0) -> float:
    """Transmit power giving ``target_dbm`` at ``distance_m`` under the path loss model."""
    return round(target_dbm + 10 * exponent * math.log10(max(distance_m, 1.0)), 2)


def _ring(group: int, lat: float, lon: float, count: int, near_m: float, far_m: float,
          target_dbm: float, floor: int = 0, zone: Optional[str] = None) -> List[AccessPoint]:
    """``count`` APs around a point, spread between ``near_m`` and ``far_m`` away."""
    aps = []
    for i in range(count):
        angle = 2 * math.pi * i / count
        d = near_m + (far_m - near_m) * (i % 3) / 2
        ap_lat, ap_lon = offset_position(lat, lon, d * math.sin(angle), d * math.cos(angle))
        aps.append(AccessPoint(mac=_mac(group, i), lat=ap_lat, lon=ap_lon, floor=floor,
                               tx_power=_tx_for(target_dbm, d), zone=zone))
    return aps


def two_room_home(rss_sigma_db: float = 6.0, hours_per_room: float = 2.0) -> Preset:
    """
    Two rooms 20 m apart sharing part of their APs.

    Fourteen APs in the corridor between the rooms read the same at both; each
    room also has nineteen private APs behind walls thick enough that the
    other room never hears them. The rooms' fingerprints share a little over
    four tenths of their energy, so the adaptive low threshold joins them and
    a fixed 0.5 threshold keeps them apart.
    """
    lat0, lon0 = ORIGIN
    room_a = offset_position(lat0, lon0, 0.0, -10.0)
    room_b = offset_position(lat0, lon0, 0.0, 10.0)
    aps: List[AccessPoint] = []
    for k, north in enumerate((4.0, 5.8, 7.6, 9.4, 11.2, 13.0, 14.8)):
        for side, sign in enumerate((1, -1)):
            lat, lon = offset_position(lat0, lon0, sign * north, 0.0)
            aps.append(AccessPoint(mac=_mac(1, 2 * k + side), lat=lat, lon=lon,
                                   tx_power=_tx_for(-75.0, math.hypot(north, 10.0))))
    for group, (zone, (lat, lon)) in enumerate((("A", room_a), ("B", room_b)), start=2):
        aps.extend(_ring(group, lat, lon, 19, 4.0, 4.0, -75.0, zone=zone))
    world = World(
        aps=aps,
        places=[
            Place(name="room_a", lat=room_a[0], lon=room_a[1], zone="A"),
            Place(name="room_b", lat=room_b[0], lon=room_b[1], zone="B"),
        ],
        wall_loss_db=30.0,
    )
    start = DAY0 + 20 * HOUR
    stay = int(hours_per_room * HOUR)
    scenario = Scenario(
        agents=[Agent(user="resident", schedule=[
            Visit(place="room_a", arrive=start, depart=start + stay),
            Visit(place="room_b", arrive=start + stay, depart=start + 2 * stay),
        ])],
        noise=NoiseModel(rss_sigma_db=rss_sigma_db),
    )
    return world, scenario


def home_void_deck(deck_minutes: int = 30) -> Preset:
    """
    A flat on the 8th floor and the void deck at the foot of the block.

    The deck lies 40 m from the flat, well inside one GPS stay region, but the
    two places share no AP. The resident leaves home for a short walk down to
    the deck once during the day.
    """
    lat0, lon0 = ORIGIN
    deck = offset_position(lat0, lon0, 40.0, 0.0)
    aps = (_ring(10, lat0, lon0, 15, 3.0, 8.0, -65.0, floor=8, zone="home")
           + _ring(11, deck[0], deck[1], 10, 3.0, 8.0, -65.0, floor=0, zone="deck"))
    world = World(
        aps=aps,
        places=[
            Place(name="home", lat=lat0, lon=lon0, floor=8, zone="home"),
            Place(name="void_deck", lat=deck[0], lon=deck[1], floor=0, zone="deck"),
        ],
        walkways=[Walkway(name="lift_lobby", points=[(lat0, lon0), deck], legs=[Leg(sheltered=False)])],
    )
    leave = DAY0 + 10 * HOUR
    deck_end = leave + 10 * MINUTE + deck_minutes * MINUTE
    scenario = Scenario(agents=[Agent(user="resident", schedule=[
        Visit(place="home", arrive=DAY0, depart=leave),
        Transit(walkway="lift_lobby", depart=leave, arrive=leave + 10 * MINUTE),
        Visit(place="void_deck", arrive=leave + 10 * MINUTE, depart=deck_end),
        Transit(walkway="lift_lobby", depart=deck_end, arrive=deck_end + 10 * MINUTE, reverse=True),
        Visit(place="home", arrive=deck_end + 10 * MINUTE, depart=DAY0 + 20 * HOUR),
    ])])
    return world, scenario


MALL_SHOPS = ("R", "S1", "S2", "S3", "S4", "S5")
MALL_DAYS = (("R", "S1", "S2"), ("R", "S3", "S4"), ("R", "S5"))


def mall_revisits(floor_loss_db: float = 30.0, minutes_per_shop: int = 40) -> Preset:
    """
    Six shops on three floors of a mall, visited over three days.

    Shop ``R`` is visited every day. Shops on one floor are 30 m apart and each
    sits behind its own walls. Lowering ``floor_loss_db`` lets shops stacked
    above one another hear each other's APs.
    """
    lat0, lon0 = ORIGIN
    aps: List[AccessPoint] = []
    places: List[Place] = []
    for k, name in enumerate(MALL_SHOPS):
        floor, east = k // 2, (-15.0 if k % 2 == 0 else 15.0)
        lat, lon = offset_position(lat0, lon0, 0.0, east)
        aps.extend(_ring(20 + k, lat, lon, 8, 3.0, 6.0, -60.0, floor=floor, zone=name))
        places.append(Place(name=name, lat=lat, lon=lon, floor=floor, zone=name, label=f"shop {name}"))
    world = World(aps=aps, places=places, floor_loss_db=floor_loss_db)

    schedule = []
    for day, shops in enumerate(MALL_DAYS):
        t = DAY0 + day * 24 * HOUR + 10 * HOUR
        for name in shops:
            schedule.append(Visit(place=name, arrive=t, depart=t + minutes_per_shop * MINUTE))
            t += minutes_per_shop * MINUTE
    return world, Scenario(agents=[Agent(user="shopper", schedule=schedule)])


def corridor(trips: int = 60, users: int = 1, leg_m: float = 150.0, legs: int = 13,
             speed_mps: float = 1.4, dwell_minutes: int = 30) -> Preset:
    """
    A straight ~2 km covered walkway between a home and an office.

    Legs alternate between sheltered and open stretches, each lined with six
    APs of its own. Users shuttle back and forth, resting at either end
    between trips.
    """
    lat0, lon0 = ORIGIN
    points = [offset_position(lat0, lon0, 0.0, k * leg_m) for k in range(legs + 1)]
    aps: List[AccessPoint] = []
    for k in range(legs):
        for i in range(6):
            lat, lon = offset_position(lat0, lon0, 5.0, k * leg_m + (i + 0.5) * leg_m / 6)
            aps.append(AccessPoint(mac=_mac(100 + k, i), lat=lat, lon=lon,
                                   tx_power=_tx_for(-50.0, 5.0), zone=f"seg{k}"))
    home, office = points[0], points[-1]
    aps += _ring(98, home[0], home[1], 8, 3.0, 6.0, -60.0, zone="home")
    aps += _ring(99, office[0], office[1], 8, 3.0, 6.0, -60.0, zone="office")
    world = World(
        aps=aps,
        places=[
            Place(name="home", lat=home[0], lon=home[1], zone="home"),
            Place(name="office", lat=office[0], lon=office[1], zone="office"),
        ],
        walkways=[Walkway(
            name="corridor", points=points,
            legs=[Leg(zone=f"seg{k}", sheltered=k % 2 == 0) for k in range(legs)],
        )],
    )

    walk = int(round(legs * leg_m / speed_mps))
    dwell = dwell_minutes * MINUTE
    agents = []
    for u in range(users):
        t = DAY0 + 7 * HOUR + u * 17 * MINUTE
        schedule = []
        for trip in range(trips):
            outbound = trip % 2 == 0
            schedule.append(Visit(place="home" if outbound else "office", arrive=t, depart=t + dwell))
            t += dwell
            schedule.append(Transit(walkway="corridor", depart=t, arrive=t + walk, reverse=not outbound))
            t += walk
        schedule.append(Visit(place="home" if trips % 2 == 0 else "office", arrive=t, depart=t + dwell))
        agents.append(Agent(user=f"commuter{u + 1:02d}", schedule=schedule))
    return world, Scenario(agents=agents)


PRESETS: Dict[str, Callable[..., Preset]] = {
    "two_room_home": two_room_home,
    "home_void_deck": home_void_deck,
    "mall_revisits": mall_revisits,
    "corridor": corridor,
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None
