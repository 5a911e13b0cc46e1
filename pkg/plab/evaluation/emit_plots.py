import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from ..errors import PlabError
from ..models import DIAGNOSTIC_CHANNELS

logger = logging.getLogger(__name__)

PLOT_DIR = "plots"
SCRIPT_NAME = "plot_series.py"

# The emitted script is the only place a plotting library is named; plab itself never renders.
SCRIPT = '''"""Plot every <channel>.dat series in this directory. Needs matplotlib."""
import csv
import glob
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def load(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return [float(r["t"]) for r in rows], [float(r["value"]) for r in rows]


def main():
    series = sorted(glob.glob(os.path.join(HERE, "*.dat")))
    for path in series:
        name = os.path.splitext(os.path.basename(path))[0]
        t, v = load(path)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(t, v)
        ax.set_xlabel("t")
        ax.set_title(name)
        fig.tight_layout()
        fig.savefig(os.path.join(HERE, name + ".png"), dpi=150)
        plt.close(fig)
    heat = os.path.join(HERE, "block_decay_triplets.csv")
    if os.path.exists(heat):
        with open(heat) as fh:
            rows = list(csv.DictReader(fh))
        for t in sorted({r["t"] for r in rows}, key=float):
            sub = [r for r in rows if r["t"] == t]
            fig, ax = plt.subplots(figsize=(5, 4))
            sc = ax.scatter([int(r["q"]) for r in sub], [int(r["j"]) for r in sub],
                            c=[float(r["value"]) for r in sub], marker="s", s=400)
            fig.colorbar(sc, label="log2 ratio")
            ax.set_xlabel("q")
            ax.set_ylabel("j")
            ax.set_title("block decay t=" + t)
            fig.tight_layout()
            fig.savefig(os.path.join(HERE, "block_decay_t" + t + ".png"), dpi=150)
            plt.close(fig)
    print("rendered %d series" % len(series))


if __name__ == "__main__":
    main()
'''


@dataclass
class PlotData:
    data_files: list[str] = field(default_factory=list)
    script: str = ""
    missing: list[str] = field(default_factory=list)


def emit_plots(run_dir) -> PlotData:
    """Write plots/<channel>.dat (t, value) for every diagnostics channel plus one plotting script."""
    run_dir = Path(run_dir)
    diag_path = run_dir / "diagnostics.csv"
    if not diag_path.exists():
        raise PlabError(f"{run_dir} has no diagnostics.csv")
    try:
        diag = pd.read_csv(diag_path)
    except pd.errors.EmptyDataError:
        diag = pd.DataFrame()

    out = run_dir / PLOT_DIR
    os.makedirs(out, exist_ok=True)
    result = PlotData()
    channels = [c for c in diag.columns if c != "t"]
    if "t" not in diag.columns or diag.empty or not channels:
        logger.warning("%s: diagnostics are empty, emitting a script with no series", diag_path)
        channels = []
    for name in channels:
        path = out / f"{name}.dat"
        diag[["t", name]].rename(columns={name: "value"}).to_csv(path, index=False, float_format="%.17g")
        result.data_files.append(str(path))

    result.missing = [c for c in DIAGNOSTIC_CHANNELS if c not in channels]
    if result.missing:
        logger.warning("missing channels: %s", ", ".join(result.missing))

    decay_path = run_dir / "block_decay.csv"
    if decay_path.exists():
        decay = pd.read_csv(decay_path)
        path = out / "block_decay_triplets.csv"
        decay.rename(columns={"m": "value"})[["t", "j", "q", "value"]].to_csv(path, index=False, float_format="%.17g")
        result.data_files.append(str(path))

    script = out / SCRIPT_NAME
    script.write_text(SCRIPT)
    result.script = str(script)
    logger.info("wrote %d plot data files to %s", len(result.data_files), out)
    return result
