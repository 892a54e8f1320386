#!/usr/bin/env python3
"""Plot a coopreg trajectory CSV.

    python3 docs/plot.py out/exp2-multi_trajectory.csv [-o figure.png]

Top panel: regulated error e. Middle: actuator outputs y_i. Bottom: inputs u_i.
"""

import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("csv")
    parser.add_argument("-o", "--output", help="image path (default: CSV name with .png)")
    args = parser.parse_args()

    df = pd.read_csv(args.csv)
    ys = [c for c in df.columns if c.startswith("y_")]
    us = [c for c in df.columns if c.startswith("u_") and c != "u_p"]

    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8, 8))
    axes[0].plot(df["t"], df["e"])
    axes[0].set_ylabel("e")
    for c in ys:
        axes[1].plot(df["t"], df[c], label=c)
    axes[1].set_ylabel("actuator output")
    axes[1].legend(loc="upper right", fontsize="small")
    for c in us:
        axes[2].plot(df["t"], df[c], label=c)
    axes[2].set_ylabel("actuator input")
    axes[2].set_xlabel("t [s]")
    fig.tight_layout()

    output = args.output or args.csv.rsplit(".", 1)[0] + ".png"
    fig.savefig(output, dpi=120)
    print(f"wrote {output}")


if __name__ == "__main__":
    main()
