"""Answer requests from a recorded session file.

Usage: ``python -m subfreq.plugins.replay SESSION.tsv [VARIANT]``. The file
holds ``variant<TAB>request<TAB>space separated tokens`` rows. An unknown
request makes the plugin exit with status 3, which the caller sees as a
plugin failure.
"""

from __future__ import annotations

import os
import sys

from . import serve


def load_session(path: str) -> dict[tuple[str, str], list[str]]:
    out: dict[tuple[str, str], list[str]] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            variant, request, response = line.split("\t")
            out[(variant, request)] = response.split()
    return out


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        sys.stderr.write("usage: replay SESSION.tsv [VARIANT]\n")
        return 2
    session = load_session(argv[0])
    variant = argv[1] if len(argv) > 1 else os.environ.get("SUBFREQ_VARIANT", "default")
    variants = sorted({v for v, _ in session})

    def answer(request: str) -> list[str]:
        try:
            return session[(variant, request)]
        except KeyError:
            sys.stderr.write(f"replay: no recorded response for {request!r}\n")
            sys.exit(3)

    return serve(variants, answer)


if __name__ == "__main__":
    sys.exit(main())
