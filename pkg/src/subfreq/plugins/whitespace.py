"""Split on whitespace; serves every plugin variant identically."""

import sys

from . import serve


def main() -> int:
    return serve(["default", "base", "lemma"], str.split)


if __name__ == "__main__":
    sys.exit(main())
