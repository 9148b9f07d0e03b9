#!/usr/bin/env python3
"""Plots the CSVs written by `asor-lab train` (and `ablate`, if present).

Usage: python3 plot.py [OUT_DIR]   (defaults to the directory of this script)
Needs pandas and matplotlib.
"""
import glob
import os
import sys

import matplotlib.pyplot as plt
import pandas as pd

out = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))
train = os.path.join(out, "train")


def read(path):
    return pd.read_csv(path, comment="#")


fig, ax = plt.subplots(figsize=(6, 4))
for path in sorted(glob.glob(os.path.join(train, "curves_*.csv"))):
    df = read(path)
    name = os.path.basename(path)[len("curves_"):-len(".csv")]
    ax.plot(df["iteration"], df["mean_return"], label=name)
    ax.fill_between(df["iteration"], df["mean_return"] - df["std_return"],
                    df["mean_return"] + df["std_return"], alpha=0.2)
ax.set_xlabel("iteration")
ax.set_ylabel("mean episode return")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(out, "learning_curves.png"), dpi=150)

summary = os.path.join(train, "eval_summary.csv")
if os.path.exists(summary):
    df = read(summary)
    df = df[df["theta"] != "mean"]
    table = df.pivot(index="theta", columns="algorithm", values="mean")
    err = df.pivot(index="theta", columns="algorithm", values="std")
    ax = table.plot.bar(yerr=err, figsize=(6, 4), rot=0)
    ax.set_ylabel("final return")
    ax.figure.tight_layout()
    ax.figure.savefig(os.path.join(out, "per_theta_returns.png"), dpi=150)

for path in sorted(glob.glob(os.path.join(train, "discriminator_*.csv"))):
    df = read(path)
    name = os.path.basename(path)[len("discriminator_"):-len(".csv")]
    by_row = df.groupby("row")["hashed_count"].mean()
    ax = by_row.plot.bar(figsize=(5, 3), rot=0)
    ax.set_ylabel("mean sketched visit count")
    ax.set_title(name)
    ax.figure.tight_layout()
    ax.figure.savefig(os.path.join(out, f"counts_{name}.png"), dpi=150)
    plt.close(ax.figure)

ablation = os.path.join(out, "ablate", "ablation.csv")
if os.path.exists(ablation):
    df = read(ablation)
    ax = df.plot.bar(x="variant", y="mean_return", yerr="std_return", figsize=(6, 4), rot=30, legend=False)
    ax.set_ylabel("mean final return")
    ax.figure.tight_layout()
    ax.figure.savefig(os.path.join(out, "ablation.png"), dpi=150)
