"""Record a fugashi session for the replay test.

Writes ``session.tsv`` (variant, request, raw response) and
``golden.tsv`` (variant, space-joined expected stream per line). Requests
are what a host sends: NFKC text segments between special tokens.
"""

import re
import subprocess
import sys
import unicodedata
from pathlib import Path

HERE = Path(__file__).resolve().parent
SENTINEL = re.compile(r"⟦[A-Z]+⟧")


def main() -> None:
    lines = (HERE / "lines.txt").read_text(encoding="utf-8").splitlines()
    session, golden = [], []
    for variant in ("default", "base", "lemma"):
        proc = subprocess.Popen([sys.executable, "-m", "subfreq.plugins.mecab", variant],
                                stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True)
        assert proc.stdout.readline().startswith("TOKENIZER")
        for line in lines:
            stream = []
            line = unicodedata.normalize("NFKC", line)
            pieces = re.split(f"({SENTINEL.pattern})", line)
            for piece in pieces:
                if SENTINEL.fullmatch(piece):
                    stream.append(piece)
                elif piece.strip():
                    proc.stdin.write(piece.strip() + "\n")
                    proc.stdin.flush()
                    resp = proc.stdout.readline().rstrip("\n")
                    session.append(f"{variant}\t{piece.strip()}\t{resp}")
                    stream += [unicodedata.normalize("NFKC", t).lower() for t in resp.split()]
            golden.append(f"{variant}\t{' '.join(stream)}")
        proc.stdin.close()
        proc.wait()
    (HERE / "session.tsv").write_text("\n".join(session) + "\n", encoding="utf-8")
    (HERE / "golden.tsv").write_text("\n".join(golden) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
