"""Japanese segmentation through fugashi (MeCab with UniDic).

``default`` gives surface forms, ``base`` the orthographic base form and
``lemma`` the dictionary lemma. Needs the ``ja`` extra.
"""

import sys

from . import serve


def main() -> int:
    import fugashi

    tagger = fugashi.Tagger()
    variant = sys.argv[1] if len(sys.argv) > 1 else "default"

    def tokens(line: str) -> list[str]:
        out = []
        for w in tagger(line):
            if variant == "default":
                form = w.surface
            else:
                f = w.feature
                form = (f.orthBase if variant == "base" else f.lemma) or w.surface
            if form.strip():
                out.append(form.replace(" ", ""))
        return out

    return serve(["default", "base", "lemma"], tokens)


if __name__ == "__main__":
    sys.exit(main())
