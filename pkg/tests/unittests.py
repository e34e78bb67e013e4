"""
Runs the ldtsp test suite; installed as the `ldtsp-test` script.
"""

import os
import sys
import unittest


def main():
    suite = unittest.defaultTestLoader.discover(
        start_dir=os.path.dirname(os.path.abspath(__file__)), pattern="test_*.py"
    )
    result = unittest.TextTestRunner(verbosity=2).run(suite)
    sys.exit(0 if result.wasSuccessful() else 1)


if __name__ == "__main__":
    main()
