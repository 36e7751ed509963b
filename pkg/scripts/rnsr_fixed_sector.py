"""Worst-in-sector RNSR of fixed-sector designs against the closed-form loops, M = 4..7.

Sector [-30, 30] degrees, L = 16, d = lambda/4, no receiver noise. Writes one curve
CSV per M and prints the worst-case gap in dB.
"""
import argparse
from pathlib import Path

import numpy as np

from sdmimo.analysis import rnsr_sweep, rows_to_csv, to_db
from sdmimo.conic import DesignSpec, design, worst_sector_rnsr
from sdmimo.designs import InfeasibleAmplitudeError, SqnrContext, first_order, second_order


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, nargs="+", default=[4, 5, 6, 7])
    ap.add_argument("--sector", type=float, nargs=2, default=[-30.0, 30.0])
    ap.add_argument("--order", type=int, default=16)
    ap.add_argument("--out-dir", type=Path, default=Path("out/rnsr_fixed_sector"))
    args = ap.parse_args()

    sector = tuple(np.deg2rad(args.sector))
    ctx = SqnrContext(rho=1.0, noise_var=0.0, n_effective=1024)
    th = np.deg2rad(np.linspace(-89, 89, 1781))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for m in args.levels:
        rep = design(DesignSpec("fixed-sector", args.order, m, ctx, sector=sector, spacing=0.25))
        curves = {"fixed_sector_db": rnsr_sweep(rep.design, th, 0.25)[1]}
        worst = {"fixed-sector": rep.worst_rnsr_dense}
        for name, make in (("first_order", first_order), ("second_order", second_order)):
            try:
                fd = make(m)
            except InfeasibleAmplitudeError:
                continue
            curves[f"{name}_db"] = rnsr_sweep(fd, th, 0.25)[1]
            worst[name] = worst_sector_rnsr(fd, sector, 0.25)
        rows = zip(np.rad2deg(th).tolist(), *(c.tolist() for c in curves.values()))
        path = args.out_dir / f"rnsr_m{m}.csv"
        path.write_text(rows_to_csv(["theta_deg", *curves], rows, "rnsr-fixed-sector"))
        summary = ", ".join(f"{k} {float(to_db(v)):.1f} dB" for k, v in worst.items())
        print(f"M={m}: worst in sector: {summary}")
    print(f"wrote curves to {args.out_dir}")


if __name__ == "__main__":
    main()
