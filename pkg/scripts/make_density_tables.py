"""Regenerate the shipped per-layer density tables under src/sodsim/data/."""
from pathlib import Path

from sodsim import suites

OUT = Path(__file__).resolve().parent.parent / "src" / "sodsim" / "data"

for model in suites.MODELS:
    path = OUT / f"{model}.csv"
    path.write_text(suites.table_csv(suites.density_table(model)))
    print(path)
