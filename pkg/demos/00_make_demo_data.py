#!/usr/bin/env python3
"""Regenerate the bundled demo data (corpus files, lexicon, cassette, config).

The files under demo/ are checked in so the pipeline runs out of the box;
this script rewrites them from the synthetic concept grammar if they are
ever lost or the grammar changes.

Usage: python demos/00_make_demo_data.py [target_dir]
"""

import sys
from pathlib import Path

from conceptlm.grammar import default_grammar

target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent.parent / "demo"
paths = default_grammar().write_demo(target)
for label, path in sorted(paths.items()):
    print(f"{label:>14}: {path}")
print("\nNext: conceptlm extract --config", target / "demo.cfg")
