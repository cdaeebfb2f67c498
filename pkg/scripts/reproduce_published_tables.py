#!/usr/bin/env python3
"""
Reproduce the cross-dataset averages and average ranks of the seven deep
binarization models from their published per-dataset means.

Reads data/published_dataset_means.csv and prints the averaged table,
optionally writing it as Markdown, CSV or JSON.
"""

import argparse
import sys
from pathlib import Path

# Add project root to path
sys.path.append(str(Path(__file__).parent.parent))

from core.harness import EvaluationHarness, load_means_table, means_to_results
from core.report import write_report
from core.utils import format_fixed

DEFAULT_TABLE = Path(__file__).parent.parent / "data" / "published_dataset_means.csv"


def reproduce(table_path: Path, out: Path = None) -> None:
    """Average metrics and ranks from a published means table."""
    table = load_means_table(table_path)
    report = EvaluationHarness.assemble(means_to_results(table), {"reports": [table_path.name]}, strict=True)

    print("=== CROSS-DATASET AVERAGES ===")
    print(f"{'Method':<14}{'PSNR':>8}{'FM':>8}{'p-FM':>8}{'DRD':>8}{'Rank':>8}")
    for method, values in report.averages.items():
        print(f"{method:<14}"
              f"{format_fixed(values['psnr']):>8}"
              f"{format_fixed(values['fm'] * 100):>8}"
              f"{format_fixed(values['pfm'] * 100):>8}"
              f"{format_fixed(values['drd']):>8}"
              f"{format_fixed(report.ranks[method]):>8}")

    if out:
        write_report(report, out)
        print(f"\n✅ Table written to: {out}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--table", type=Path, default=DEFAULT_TABLE)
    parser.add_argument("--out", type=Path)
    args = parser.parse_args()
    reproduce(args.table, args.out)
