"""Compare the library against the checked-in arbitrary-precision table."""

import csv
import math
from pathlib import Path

from rmtcompound import specfun as sf

TABLE = Path(__file__).parent / "data" / "specfun_oracle.csv"

# per-function tolerance on the error measure computed in ``point_error``
TOLERANCE = {
    "ln_gamma": 1e-13,
    "bessel_j": 1e-10,
    "log_bessel_k": 1e-12,
    "kummer_1f1": 1e-11,
    "tricomi_u": 1e-11,
    "gauss_2f1": 1e-11,
}


def rows():
    with TABLE.open(newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            args = [float(r[k]) for k in ("p1", "p2", "p3", "p4") if r[k]]
            yield r["function"], args, float(r["log_abs"]), int(r["sign"])


def point_error(name, args, log_abs, sign):
    """Error of one table point.

    Log-valued quantities use ``|delta log| / max(1, |log|)``; J uses the
    absolute error scaled by ``max(|J|, 1e-3)`` because it has zeros.
    A sign mismatch counts as an error of 1.
    """
    scale = max(1.0, abs(log_abs))
    if name == "ln_gamma":
        return abs(sf.ln_gamma(*args) - log_abs) / scale
    if name == "log_bessel_k":
        return abs(sf.log_bessel_k(*args) - log_abs) / scale
    if name == "bessel_j":
        ref = sign * math.exp(log_abs)
        return abs(sf.bessel_j(*args) - ref) / max(abs(ref), 1e-3)
    if name == "tricomi_u":
        return abs(sf.log_tricomi_u(*args) - log_abs) / scale
    fn = sf.kummer_1f1_signed if name == "kummer_1f1" else sf.gauss_2f1_signed
    la, sg, _ = fn(*args)
    return abs(float(la) - log_abs) / scale + (0.0 if float(sg) == sign else 1.0)


def summary():
    """{function: (points, worst error, failures)}."""
    out = {}
    for name, args, la, sg in rows():
        n, worst, bad = out.get(name, (0, 0.0, []))
        e = point_error(name, args, la, sg)
        if not e <= TOLERANCE[name]:
            bad = bad + [(args, e)]
        out[name] = (n + 1, max(worst, e), bad)
    return out
