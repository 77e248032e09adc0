"""Integer rectangle helpers shared by every stage of the flow.

All coordinates are database units (DBU); nothing here touches floats.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Sequence


class Rect(NamedTuple):
    x1: int
    y1: int
    x2: int
    y2: int

    @classmethod
    def normalized(cls, x1: int, y1: int, x2: int, y2: int) -> "Rect":
        return cls(min(x1, x2), min(y1, y2), max(x1, x2), max(y1, y2))

    @property
    def width(self) -> int:
        return self.x2 - self.x1

    @property
    def height(self) -> int:
        return self.y2 - self.y1

    @property
    def area(self) -> int:
        return self.width * self.height

    def expanded(self, d: int) -> "Rect":
        return Rect(self.x1 - d, self.y1 - d, self.x2 + d, self.y2 + d)

    def translated(self, dx: int, dy: int) -> "Rect":
        return Rect(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)

    def contains_rect(self, other: "Rect") -> bool:
        return (self.x1 <= other.x1 and self.y1 <= other.y1
                and other.x2 <= self.x2 and other.y2 <= self.y2)

    def contains_point(self, x: int, y: int) -> bool:
        return self.x1 <= x <= self.x2 and self.y1 <= y <= self.y2

    def touches(self, other: "Rect") -> bool:
        """Closed-set intersection: shared edges and corners count."""
        return (self.x1 <= other.x2 and other.x1 <= self.x2
                and self.y1 <= other.y2 and other.y1 <= self.y2)

    def overlaps(self, other: "Rect") -> bool:
        """Open-set intersection: positive shared area only."""
        return (self.x1 < other.x2 and other.x1 < self.x2
                and self.y1 < other.y2 and other.y1 < self.y2)


def square(cx: int, cy: int, size: int) -> Rect:
    """Square of side `size` around a point; odd sizes lean low by 1 DBU."""
    lo_x = cx - size // 2
    lo_y = cy - size // 2
    return Rect(lo_x, lo_y, lo_x + size, lo_y + size)


def axis_gap(a1: int, a2: int, b1: int, b2: int) -> int:
    return max(0, b1 - a2, a1 - b2)


def distance2(a: Rect, b: Rect) -> int:
    """Squared Euclidean distance between two closed rectangles."""
    dx = axis_gap(a.x1, a.x2, b.x1, b.x2)
    dy = axis_gap(a.y1, a.y2, b.y1, b.y2)
    return dx * dx + dy * dy


def gap_marker(a: Rect, b: Rect) -> Rect:
    """Region between two rectangles (their overlap if they intersect)."""

    def span(a1, a2, b1, b2):
        lo, hi = max(a1, b1), min(a2, b2)
        return (lo, hi) if lo <= hi else (hi, lo)

    x1, x2 = span(a.x1, a.x2, b.x1, b.x2)
    y1, y2 = span(a.y1, a.y2, b.y1, b.y2)
    return Rect(x1, y1, x2, y2)


def bbox(rects: Iterable[Rect]) -> Rect:
    rects = list(rects)
    if not rects:
        raise ValueError("bbox of no rectangles")
    return Rect(min(r.x1 for r in rects), min(r.y1 for r in rects),
                max(r.x2 for r in rects), max(r.y2 for r in rects))


def covered(target: Rect, rects: Sequence[Rect]) -> bool:
    """True when `target` lies entirely inside the union of `rects`."""
    clipped = []
    for r in rects:
        c = Rect(max(r.x1, target.x1), max(r.y1, target.y1),
                 min(r.x2, target.x2), min(r.y2, target.y2))
        if c.x1 < c.x2 and c.y1 < c.y2:
            clipped.append(c)
    if target.area == 0:
        return any(r.contains_rect(target) for r in rects)
    xs = sorted({target.x1, target.x2, *(c.x1 for c in clipped), *(c.x2 for c in clipped)})
    ys = sorted({target.y1, target.y2, *(c.y1 for c in clipped), *(c.y2 for c in clipped)})
    for xa, xb in zip(xs, xs[1:]):
        for ya, yb in zip(ys, ys[1:]):
            if not any(c.x1 <= xa and xb <= c.x2 and c.y1 <= ya and yb <= c.y2 for c in clipped):
                return False
    return True


class UnionFind:
    def __init__(self, n: int = 0):
        self.parent = list(range(n))

    def add(self) -> int:
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb
