"""Great-circle helpers used for distance-from-home context buckets."""
import math

EARTH_RADIUS_KM = 6371.0

# home estimation snaps points to a grid of this many degrees
GRID_CELL_DEGREES = 0.001


def haversine_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Distance in kilometres between two (latitude, longitude) points in degrees."""
    lat1, lon1 = a
    lat2, lon2 = b
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    dphi = math.radians(lat2 - lat1)
    dlambda = math.radians(lon2 - lon1)

    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlambda / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def destination_point(origin: tuple[float, float], bearing_deg: float, distance_km: float) -> tuple[float, float]:
    """Point reached from origin after travelling distance_km along the initial bearing."""
    lat1 = math.radians(origin[0])
    lon1 = math.radians(origin[1])
    theta = math.radians(bearing_deg)
    delta = distance_km / EARTH_RADIUS_KM

    lat2 = math.asin(math.sin(lat1) * math.cos(delta) + math.cos(lat1) * math.sin(delta) * math.cos(theta))
    lon2 = lon1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(lat1),
        math.cos(delta) - math.sin(lat1) * math.sin(lat2),
    )
    lon2 = (lon2 + 3 * math.pi) % (2 * math.pi) - math.pi
    return math.degrees(lat2), math.degrees(lon2)


def grid_cell(latitude: float, longitude: float, cell_degrees: float = GRID_CELL_DEGREES) -> tuple[int, int]:
    # rounding first keeps 40.7 / 0.001 in cell 40700, not 40699
    return (math.floor(round(latitude / cell_degrees, 9)),
            math.floor(round(longitude / cell_degrees, 9)))
