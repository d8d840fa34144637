"""Band diagrams of the periodic wall lattice for mu = 0.5 and r in {1.2, 1.0}.

Writes one CSV of sampled branches per ratio, prints the gap table and, with
--plot, an SVG with both diagrams side by side (theta folded to [0, b/2]).
"""

import argparse
from pathlib import Path

import numpy as np

from pointacoustics.bands import LatticeParams, dispersion
from pointacoustics.cli import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mu", type=float, default=0.5)
    ap.add_argument("--ratios", type=float, nargs="+", default=[1.2, 1.0])
    ap.add_argument("--xi-max", type=float, default=4 * np.pi)
    ap.add_argument("--out", type=Path, default=Path("results/bands"))
    ap.add_argument("--plot", action="store_true")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    diagrams = []
    for r in args.ratios:
        lat = LatticeParams.from_dimensionless(args.mu, r)
        d = dispersion(lat, args.xi_max)
        diagrams.append((r, d))
        rows = ((br.index, th / lat.b, x) for br in d.branches for x, th in zip(br.xi, br.theta))
        write_csv(args.out / f"bands_r{r:g}.csv", ["branch", "theta_over_b", "xi"], rows)
        print(f"mu={args.mu:g} r={r:g}: {len(d.bands)} bands, max residual {d.max_residual():.1e}")
        for g in d.gaps:
            state = "closed" if g.closed else "open"
            print(f"  gap {g.index}: xi/pi in [{g.xi_low / np.pi:.5f}, {g.xi_high / np.pi:.5f}]  {state}")

    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, axes = plt.subplots(1, len(diagrams), figsize=(4 * len(diagrams), 5), sharey=True)
        for ax, (r, d) in zip(np.atleast_1d(axes), diagrams):
            b = d.lattice.b
            for br in d.branches:
                ax.plot(br.theta / b, br.xi / np.pi, "k-", lw=1)
            for g in d.open_gaps:
                ax.axhspan(g.xi_low / np.pi, g.xi_high / np.pi, color="0.85")
            ax.set_title(f"mu={args.mu:g}, r={r:g}")
            ax.set_xlabel("theta / b")
        np.atleast_1d(axes)[0].set_ylabel("xi / pi")
        fig.tight_layout()
        fig.savefig(args.out / "bands.svg", metadata={"Date": None})


if __name__ == "__main__":
    main()
