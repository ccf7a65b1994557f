"""Best and worst strategies for the endemic infected fraction on a 3-group model.

The anti-Pareto curve for this loss stops at ``c0 < 1`` and is completed by
the isolated outcome ``(1, 0)``; the figure shows both curves over a sample
of feasible outcomes.
"""

import argparse
from pathlib import Path

from parepi import fixtures
from parepi.cli import main as cli
from parepi.model import save_model


def run(out_dir: Path, grid: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    model_path = out_dir / "positive3.json"
    save_model(fixtures.positive3(), model_path)
    common = ["--model", str(model_path), "--loss", "i"]
    steps = [
        ["frontier", *common, "--grid", str(grid), "--out", str(out_dir / "pareto.csv")],
        ["frontier", *common, "--anti", "--grid", str(grid), "--out", str(out_dir / "anti.csv")],
        ["oracle", *common, "--samples", "600", "--out", str(out_dir / "feasible.csv")],
        ["plot", "--frontier", str(out_dir / "pareto.csv"), "--anti-frontier", str(out_dir / "anti.csv"),
         "--feasible", str(out_dir / "feasible.csv"), "--title", "positive3, loss I",
         "--out", str(out_dir / "infected.svg")],
    ]
    for argv in steps:
        if cli(argv) != 0:
            raise SystemExit(f"step failed: {' '.join(argv[:1])}")
    print(f"figure: {out_dir / 'infected.svg'}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", type=Path, default=Path("out/infected"))
    parser.add_argument("--grid", type=int, default=11)
    args = parser.parse_args()
    run(args.out_dir, args.grid)
