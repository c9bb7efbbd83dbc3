"""
Fibrehom Utilities

Shared helpers: a disjoint-set forest for dof aliasing and periodic trees,
and dotted-path access into nested config dictionaries.
"""

import copy
import math
from typing import Any, Dict, List

import numpy as np


class DisjointSet:
    """
    Union-find over 0..n-1 with path halving.

    Roots are the smallest member of each set, so results do not depend
    on the order of unions.
    """

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)

    def find(self, i: int) -> int:
        parent = self.parent
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return int(i)

    def union(self, a: int, b: int) -> bool:
        """Merge the sets of a and b; False if they were already joined."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra
        return True

    def roots(self) -> np.ndarray:
        """Representative of every element."""
        return np.array([self.find(i) for i in range(len(self.parent))], dtype=np.int64)


def set_dotted(d: Dict[str, Any], path: str, value: Any) -> Dict[str, Any]:
    """
    Copy of d with the value at a dotted path replaced.

    Raises:
        KeyError: If any parent along the path is missing
    """
    out = copy.deepcopy(d)
    parts = path.split(".")
    node = out
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise KeyError(path)
        node = node[part]
    if not isinstance(node, dict):
        raise KeyError(path)
    node[parts[-1]] = value
    return out


def parse_value(text: str) -> Any:
    """Sweep value from the command line: number, 'inf', or plain string."""
    stripped = text.strip()
    lowered = stripped.lower()
    if lowered in ("inf", "infinity", "+inf"):
        return math.inf
    try:
        as_int = int(stripped)
        return as_int
    except ValueError:
        pass
    try:
        return float(stripped)
    except ValueError:
        return stripped


def parse_value_list(text: str) -> List[Any]:
    """Comma-separated sweep values; empty entries are dropped."""
    return [parse_value(v) for v in text.split(",") if v.strip()]


def format_float(value: float) -> str:
    """Round-trip-exact float text, with 'inf' for infinities."""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(float(value))

