"""TSP instances: construction, TSPLIB subset I/O, generators and basic geometry.

Random instances are drawn with numpy's Philox4x64 counter-based generator,
so a given ``(n, seed)`` produces the same coordinates on every platform.
"""

from __future__ import annotations

import enum
import math
import re
import warnings
from dataclasses import dataclass
from importlib import resources
from typing import Optional

import numpy as np

from .errors import DomainError, ParseError


class Metric(enum.Enum):
    EUCLID_2D = "EUC_2D"


@dataclass(frozen=True, eq=False)
class CityInstance:
    name: str
    cities: np.ndarray
    metric: Metric = Metric.EUCLID_2D
    optimal_cost: Optional[float] = None

    def __post_init__(self):
        pts = np.array(self.cities, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise DomainError(f"cities must be an (n, 2) array, got shape {pts.shape}")
        if len(pts) < 3:
            raise DomainError(f"an instance needs at least 3 cities, got {len(pts)}")
        if not np.all(np.isfinite(pts)):
            raise DomainError("city coordinates must be finite")
        dup = _first_duplicate(pts)
        if dup is not None:
            i, j = dup
            raise DomainError(
                f"cities {i} and {j} share coordinates {tuple(pts[i])}; "
                "use jitter_duplicates() to separate them"
            )
        if self.optimal_cost is not None and not self.optimal_cost >= 0:
            raise DomainError(f"optimal_cost must be nonnegative, got {self.optimal_cost}")
        pts.setflags(write=False)
        object.__setattr__(self, "cities", pts)

    @property
    def n(self):
        return len(self.cities)

    def __len__(self):
        return len(self.cities)

    def __eq__(self, other):
        if not isinstance(other, CityInstance):
            return NotImplemented
        return (
            self.name == other.name
            and self.metric == other.metric
            and self.optimal_cost == other.optimal_cost
            and np.array_equal(self.cities, other.cities)
        )

    def with_optimal_cost(self, cost):
        return CityInstance(self.name, self.cities, self.metric, cost)


def _first_duplicate(pts):
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    s = pts[order]
    same = np.all(s[1:] == s[:-1], axis=1)
    if not same.any():
        return None
    k = int(np.argmax(same))
    i, j = sorted((int(order[k]), int(order[k + 1])))
    return i, j


def jitter_duplicates(cities, seed=0, magnitude=1e-9):
    """Displace repeated coordinates by uniform noise of ``magnitude`` times the diameter.

    Only the second and later copies of a point move; distinct points are
    returned unchanged.
    """
    pts = np.array(cities, dtype=float)
    diameter = float(np.max(np.ptp(pts, axis=0))) or 1.0
    rng = np.random.Generator(np.random.Philox(seed))
    seen = set()
    for i, (x, y) in enumerate(pts):
        key = (x, y)
        while key in seen:
            pts[i] += rng.uniform(-1.0, 1.0, size=2) * magnitude * diameter
            key = (pts[i, 0], pts[i, 1])
        seen.add(key)
    return pts


_KEY_RE = re.compile(r"^\s*([A-Z_]+)\s*:?\s*(.*?)\s*$")
_SUPPORTED_WEIGHTS = {"EUC_2D", "ATT"}


def parse_tsplib(text: str, optimal_cost=None, jitter_seed=None) -> CityInstance:
    """Parse a TSPLIB node-coordinate file (EUC_2D or ATT).

    ATT files are accepted but their distances are treated as plain Euclidean.
    Repeated coordinates are an error unless ``jitter_seed`` is given, in
    which case they are separated with :func:`jitter_duplicates`.
    """
    header = {}
    coords = []
    in_coords = False
    coord_start = None
    expected_index = 1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "EOF":
            break
        if in_coords:
            parts = line.split()
            if len(parts) != 3:
                if _KEY_RE.match(line) and parts[0].rstrip(":").isupper():
                    raise ParseError(f"unexpected section {parts[0]!r} after coordinates", lineno)
                raise ParseError(f"expected 'index x y', got {line!r}", lineno)
            try:
                idx = int(parts[0])
                x, y = float(parts[1]), float(parts[2])
            except ValueError:
                raise ParseError(f"malformed coordinate line {line!r}", lineno) from None
            if idx != expected_index:
                raise ParseError(f"expected node index {expected_index}, got {idx}", lineno)
            expected_index += 1
            coords.append((x, y, lineno))
            continue
        if line.startswith("NODE_COORD_SECTION"):
            in_coords = True
            coord_start = lineno
            continue
        m = _KEY_RE.match(line)
        if not m:
            raise ParseError(f"unrecognized line {line!r}", lineno)
        key, value = m.group(1), m.group(2)
        if key.endswith("_SECTION"):
            raise ParseError(f"unsupported section {key}", lineno)
        header[key] = (value, lineno)

    if coord_start is None:
        raise ParseError("missing NODE_COORD_SECTION")
    if "TYPE" in header and header["TYPE"][0].split()[0] != "TSP":
        raise ParseError(f"unsupported TYPE {header['TYPE'][0]!r}", header["TYPE"][1])
    weight, weight_line = header.get("EDGE_WEIGHT_TYPE", ("EUC_2D", None))
    if weight not in _SUPPORTED_WEIGHTS:
        raise ParseError(f"unsupported EDGE_WEIGHT_TYPE {weight!r}", weight_line)
    if "DIMENSION" in header:
        dim_text, dim_line = header["DIMENSION"]
        try:
            dim = int(dim_text)
        except ValueError:
            raise ParseError(f"bad DIMENSION {dim_text!r}", dim_line) from None
        if dim != len(coords):
            raise ParseError(
                f"DIMENSION is {dim} but {len(coords)} coordinate lines follow", coord_start
            )
    if weight == "ATT":
        warnings.warn(
            "ATT pseudo-Euclidean metric requested; distances are computed as plain EUC_2D",
            stacklevel=2,
        )

    pts = np.array([(x, y) for x, y, _ in coords], dtype=float)
    if jitter_seed is not None and len(pts):
        pts = jitter_duplicates(pts, seed=jitter_seed)
    dup = _first_duplicate(pts) if len(pts) >= 2 else None
    if dup is not None:
        raise ParseError(f"duplicate coordinates for nodes {dup[0] + 1} and {dup[1] + 1}",
                         coords[dup[1]][2])
    name = header.get("NAME", ("unnamed", None))[0]
    try:
        return CityInstance(name, pts, Metric.EUCLID_2D, optimal_cost)
    except DomainError as exc:
        raise ParseError(str(exc)) from None


def to_tsplib(inst: CityInstance) -> str:
    """Serialize as EUC_2D TSPLIB text; coordinates survive a parse round trip exactly."""
    lines = [
        f"NAME : {inst.name}",
        "TYPE : TSP",
        f"DIMENSION : {inst.n}",
        "EDGE_WEIGHT_TYPE : EUC_2D",
        "NODE_COORD_SECTION",
    ]
    lines += [f"{i} {x!r} {y!r}" for i, (x, y) in enumerate(inst.cities.tolist(), start=1)]
    lines.append("EOF")
    return "\n".join(lines) + "\n"


def parse_tour_file(text: str) -> list[int]:
    """Read a TSPLIB ``TOUR_SECTION`` and return 0-based city indices."""
    if "TOUR_SECTION" not in text:
        raise ParseError("missing TOUR_SECTION")
    order = []
    for tok in text.split("TOUR_SECTION", 1)[1].split():
        if tok in ("-1", "EOF"):
            break
        order.append(int(tok) - 1)
    return order


def load_named(name: str) -> CityInstance:
    """Load a bundled instance by name (currently ``att48``), with its optimum attached."""
    from .tour import tour_cost

    data = resources.files(__package__) / "data"
    try:
        text = (data / f"{name}.tsp").read_text()
    except FileNotFoundError:
        raise DomainError(f"no bundled instance named {name!r}") from None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        inst = parse_tsplib(text)
    opt = data / f"{name}.opt.tour"
    if opt.is_file():
        inst = inst.with_optimal_cost(tour_cost(inst, parse_tour_file(opt.read_text())))
    return inst


def bundled_names():
    data = resources.files(__package__) / "data"
    return sorted(p.name[:-4] for p in data.iterdir() if p.name.endswith(".tsp"))


def gen_random_uniform(n: int, seed: int) -> CityInstance:
    if n < 3:
        raise DomainError(f"need at least 3 cities, got {n}")
    rng = np.random.Generator(np.random.Philox(seed))
    return CityInstance(f"random{n}-s{seed}", rng.random((n, 2)))


def grid_optimal_cost(rows, cols):
    """Optimal tour length on a unit lattice.

    Even products admit a lattice Hamiltonian cycle of length ``rows*cols``;
    odd products need exactly one diagonal, giving ``rows*cols - 1 + sqrt(2)``;
    a single row or column is an out-and-back path.
    """
    if min(rows, cols) == 1:
        return 2.0 * (max(rows, cols) - 1)
    k = rows * cols
    return float(k) if k % 2 == 0 else k - 1 + math.sqrt(2.0)


def gen_grid(rows: int, cols: int) -> CityInstance:
    if rows < 1 or cols < 1 or rows * cols < 3:
        raise DomainError(f"a {rows}x{cols} grid has fewer than 3 cities")
    pts = [(float(c), float(r)) for r in range(rows) for c in range(cols)]
    return CityInstance(f"grid{rows}x{cols}", np.array(pts), Metric.EUCLID_2D,
                        grid_optimal_cost(rows, cols))


def distance_matrix(inst) -> np.ndarray:
    """Symmetric Euclidean distance matrix with an exactly zero diagonal."""
    pts = inst.cities if isinstance(inst, CityInstance) else np.asarray(inst, dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def enclosing_geometry(inst) -> tuple[np.ndarray, float]:
    """Centroid of the cities and the radius of the smallest centroid-centred enclosing circle."""
    pts = inst.cities if isinstance(inst, CityInstance) else np.asarray(inst, dtype=float)
    center = pts.mean(axis=0)
    radius = float(np.max(np.hypot(pts[:, 0] - center[0], pts[:, 1] - center[1])))
    return center, radius
