"""Reference tokenizer plugins speaking the line protocol.

A plugin prints ``TOKENIZER <variants...>`` on startup, then answers each
request line with one line of space-separated tokens.
"""

import sys
from typing import Callable, TextIO


def serve(variants: list[str], tokenize: Callable[[str], list[str]],
          stdin: TextIO = sys.stdin, stdout: TextIO = sys.stdout) -> int:
    stdout.write("TOKENIZER " + " ".join(variants) + "\n")
    stdout.flush()
    for line in stdin:
        stdout.write(" ".join(tokenize(line.rstrip("\n"))) + "\n")
        stdout.flush()
    return 0
