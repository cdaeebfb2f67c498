#!/usr/bin/env python3
"""
Generate synthetic document corpora with exact ground truth.

Writes a clean corpus and a corpus with a horizontal illumination gradient
(and optionally bleed-through) in the DIBCO layout: images/NAME.png and
gt/NAME_GT.png.
"""

import argparse
import sys
from pathlib import Path

# Add project root to path
sys.path.append(str(Path(__file__).parent.parent))

from core.synthetic import generate_corpus
from monitor.logger import configure_logging


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, required=True, help="Output root directory")
    parser.add_argument("-n", type=int, default=20, help="Pages per corpus")
    parser.add_argument("--height", type=int, default=128)
    parser.add_argument("--width", type=int, default=256)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--gradient", type=float, default=80.0, help="Illumination amplitude in gray levels")
    parser.add_argument("--bleed-through", action="store_true")
    args = parser.parse_args()

    configure_logging()
    size = (args.height, args.width)
    clean = generate_corpus(args.out / "clean", args.n, size, args.seed)
    degraded = generate_corpus(args.out / "gradient", args.n, size, args.seed, args.gradient, args.bleed_through)

    print("=== SYNTHETIC CORPUS ===")
    print(f"✅ clean:    {len(clean)} pages in {args.out / 'clean'}")
    print(f"✅ gradient: {len(degraded)} pages in {args.out / 'gradient'} (±{args.gradient:g} gray levels)")


if __name__ == "__main__":
    main()
