"""varigeom: tangent cones, set limits, and first-order optimality checks.

Subpackages by topic:

- ``exprs``      expression parsing, evaluation, forward-mode derivatives
- ``geometry``   points/vectors, inner products, convex-hull membership
- ``sets``       set representations with distance oracles and samplers
- ``setlimits``  lower/upper limits of set families, Hausdorff distance
- ``cones``      tangent cones (blow-up, vector, half-line forms)
- ``calculus``   differentiability checks, higher derivatives, mean value
- ``regula``     first-order necessary-condition certificates
- ``cli``        command-line front end (``varigeom`` entry point)
"""

__version__ = "0.1.0"

from . import calculus, cones, exprs, geometry, regula, report, setlimits, sets  # noqa: F401
