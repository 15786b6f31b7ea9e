"""Run the acceptance criteria outside pytest and print one line per criterion.

Usage: python3 scripts/run_acceptance.py [criterion ...]
"""

import runpy
import sys
from pathlib import Path

if __name__ == "__main__":
    target = Path(__file__).resolve().parent.parent / "tests" / "test_acceptance.py"
    sys.path.insert(0, str(target.parent))
    sys.argv = [str(target)] + sys.argv[1:]
    runpy.run_path(str(target), run_name="__main__")
