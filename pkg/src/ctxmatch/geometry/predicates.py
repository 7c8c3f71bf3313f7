"""Adaptive-precision planar predicates.

Fast floating-point evaluation with a conservative forward error bound;
near-degenerate signs fall back to exact rational arithmetic. Keypoints are
rounded to integer coordinates before triangulation, so exactly collinear
and cocircular configurations are common, and a silently wrong sign would
corrupt neighborhoods downstream.
"""

from __future__ import annotations

from fractions import Fraction

# relative forward error bounds for the float filters (Shewchuk-style, padded)
_ORIENT_BOUND = 4.0e-16
_INCIRCLE_BOUND = 1.2e-15


def orient2d(ax: float, ay: float, bx: float, by: float, cx: float, cy: float) -> int:
    """Sign of the signed area of triangle abc: +1 CCW, -1 CW, 0 collinear."""
    detleft = (ax - cx) * (by - cy)
    detright = (ay - cy) * (bx - cx)
    det = detleft - detright
    bound = _ORIENT_BOUND * (abs(detleft) + abs(detright))
    if det > bound:
        return 1
    if det < -bound:
        return -1
    return _orient2d_exact(ax, ay, bx, by, cx, cy)


def _orient2d_exact(ax, ay, bx, by, cx, cy) -> int:
    det = (Fraction(ax) - Fraction(cx)) * (Fraction(by) - Fraction(cy)) - (
        Fraction(ay) - Fraction(cy)
    ) * (Fraction(bx) - Fraction(cx))
    return (det > 0) - (det < 0)


def incircle(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    """Sign test for d against the circumcircle of CCW triangle abc.

    +1 strictly inside, -1 strictly outside, 0 exactly on the circle.
    """
    adx = ax - dx
    ady = ay - dy
    bdx = bx - dx
    bdy = by - dy
    cdx = cx - dx
    cdy = cy - dy

    bdxcdy = bdx * cdy
    cdxbdy = cdx * bdy
    alift = adx * adx + ady * ady
    cdxady = cdx * ady
    adxcdy = adx * cdy
    blift = bdx * bdx + bdy * bdy
    adxbdy = adx * bdy
    bdxady = bdx * ady
    clift = cdx * cdx + cdy * cdy

    det = (
        alift * (bdxcdy - cdxbdy)
        + blift * (cdxady - adxcdy)
        + clift * (adxbdy - bdxady)
    )
    permanent = (
        (abs(bdxcdy) + abs(cdxbdy)) * alift
        + (abs(cdxady) + abs(adxcdy)) * blift
        + (abs(adxbdy) + abs(bdxady)) * clift
    )
    bound = _INCIRCLE_BOUND * permanent
    if det > bound:
        return 1
    if det < -bound:
        return -1
    return _incircle_exact(ax, ay, bx, by, cx, cy, dx, dy)


def _incircle_exact(ax, ay, bx, by, cx, cy, dx, dy) -> int:
    fdx, fdy = Fraction(dx), Fraction(dy)
    adx = Fraction(ax) - fdx
    ady = Fraction(ay) - fdy
    bdx = Fraction(bx) - fdx
    bdy = Fraction(by) - fdy
    cdx = Fraction(cx) - fdx
    cdy = Fraction(cy) - fdy
    det = (
        (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
        + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady)
    )
    return (det > 0) - (det < 0)


def point_in_triangle(px, py, ax, ay, bx, by, cx, cy) -> bool:
    """Boundary-inclusive exact containment test, degenerate triangles allowed.

    A degenerate (collinear) triangle contains exactly the points of its
    segment hull.
    """
    d1 = orient2d(ax, ay, bx, by, px, py)
    d2 = orient2d(bx, by, cx, cy, px, py)
    d3 = orient2d(cx, cy, ax, ay, px, py)
    has_neg = d1 < 0 or d2 < 0 or d3 < 0
    has_pos = d1 > 0 or d2 > 0 or d3 > 0
    if has_neg and has_pos:
        return False
    if has_neg or has_pos:
        return True
    # all three signs zero: triangle degenerate with p on the support line
    lo_x, hi_x = min(ax, bx, cx), max(ax, bx, cx)
    lo_y, hi_y = min(ay, by, cy), max(ay, by, cy)
    return lo_x <= px <= hi_x and lo_y <= py <= hi_y
