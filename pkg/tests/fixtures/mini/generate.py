"""Author the 20-file synthetic WebVTT mini corpus.

Every subtitle line is composed from known tokens, so the expected token
stream of each file is recorded in ``truth.json`` alongside the rendered
VTT. ``oracle.py`` turns that truth into the golden ledger and table
without using the package. Run from any directory:

    python3 tests/fixtures/mini/generate.py
"""

from __future__ import annotations

import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent
SEED = 20240611

TOPICS = {
    "cooking": "soup onion garlic pan oven recipe butter flour kitchen dinner sauce pepper",
    "gaming": "level boss player controller quest sword castle dragon score team match enemy",
    "travel": "train station hotel mountain river beach ticket airport village island map bridge",
    "music": "guitar song drummer stage concert melody piano singer album chorus band studio",
    "science": "planet rocket telescope atom energy experiment laboratory molecule galaxy orbit signal theory",
    "garden": "tomato flower seed soil garden shovel rose tree leaf water fence sunlight",
}
ADJ = "amazing quiet strange bright heavy simple careful lovely tired happy famous wonderful".split()
VERB = "found watched cleaned built carried painted opened tried followed explained visited checked".split()

TEMPLATES = [
    "the {n1} was {a} and we {v} the {n2} again",
    "I think this {n1} is really {a} for everyone",
    "we {v} a {a} {n1} near the {n2} yesterday",
    "now let me show you how the {n1} works with the {n2}",
    "my friend {v} the {n1} because it was so {a}",
    "this is the most {a} {n1} that I have ever seen",
    "after that we {v} the {n1} and then went home",
    "please remember that every {n1} needs a good {n2}",
    "so we {v} the {n2} before we could see the {n1}",
    "there was a {a} {n1} right next to the {n2}",
    "you should always keep your {n1} close to the {n2}",
    "what do you think about this {a} {n1}",
]

# (line text, expected tokens) for lines carrying planted phenomena
PLANTED = {
    "email": ("send your questions to anna.smith@example.com and we will answer",
              "send your questions to ⟦EMAIL⟧ and we will answer"),
    "url": ("you can find the full list at www.example.org for free",
            "you can find the full list at ⟦URL⟧ for free"),
    "bare_url": ("the link is example.com/shop if you want one.",
                 "the link is ⟦URL⟧ if you want one"),
    "handle": ("follow @chefmaria on the channel for more videos",
               "follow ⟦HANDLE⟧ on the channel for more videos"),
    "digits": ("we waited 45 minutes and it took 3 hours",
               "we waited ⟦NUM⟧ minutes and it took ⟦NUM⟧ hours"),
    "censored": ("what the [ __ ] was that noise in the house",
                 "what the ⟦CENSORED⟧ was that noise in the house"),
    "sound_inline": ("[Applause] thank you all so much for coming tonight",
                     "⟦SOUND⟧ thank you all so much for coming tonight"),
    "sound_only": ("[Music]", "⟦SOUND⟧"),
    "entity": ("we need salt &amp; pepper and a little more time",
               "we need salt pepper and a little more time"),
    "markup": ("<i>this</i> is <c.yellow>really</c> the best part of the day",
               "this is really the best part of the day"),
    "nfkc": ("we took the train to Ｔｏｋｙｏ and ate ﬁsh there",
             "we took the train to tokyo and ate fish there"),
}

SPANISH = [
    "hola a todos y bienvenidos a mi canal de cocina",
    "hoy vamos a preparar una sopa muy rica con verduras",
    "primero cortamos la cebolla en trozos muy pequeños",
    "después añadimos el ajo y un poco de aceite de oliva",
    "es importante que la sartén esté bien caliente",
    "mientras tanto ponemos el agua a hervir en la olla",
    "cuando el agua hierva echamos las patatas",
    "dejamos que se cocine durante veinte minutos más",
    "si os gusta este vídeo no olvidéis suscribiros",
    "muchas gracias por vernos y hasta la próxima semana",
    "the soup is ready",
    "nos vemos pronto en el siguiente vídeo",
]
JAPANESE = [
    "みなさんこんにちは、今日は料理を作ります",
    "まず玉ねぎを小さく切ってください",
    "次にフライパンに油を入れます",
    "よく混ぜてから五分ぐらい待ちます",
    "とても美味しそうになりましたね",
    "最後に塩と胡椒で味を調えます",
    "今日も見てくれてありがとうございました",
    "チャンネル登録をよろしくお願いします",
    "また次の動画で会いましょう",
    "それではさようなら",
]


def sentence(rng: random.Random, topic: str) -> tuple[str, str]:
    nouns = TOPICS[topic].split()
    n1, n2 = rng.sample(nouns, 2)
    t = rng.choice(TEMPLATES).format(n1=n1, n2=n2, a=rng.choice(ADJ), v=rng.choice(VERB))
    return t, t.lower()


def ts(ms: int) -> str:
    h, ms = divmod(ms, 3_600_000)
    m, ms = divmod(ms, 60_000)
    s, ms = divmod(ms, 1000)
    return f"{h:02d}:{m:02d}:{s:02d}.{ms:03d}"


def render(lines: list[str], style: str = "plain", extras: dict | None = None) -> str:
    """VTT text for ``lines``: one line per cue, or rolling two-line cues."""
    extras = extras or {}
    out = ["WEBVTT", "Kind: captions", "Language: en", ""]
    if extras.get("style_block"):
        out += ["STYLE", "::cue { color: white; }", ""]
    if extras.get("note"):
        out += ["NOTE this file was synthesized for tests", ""]
    t = 1000
    for i, line in enumerate(lines):
        if i in extras.get("malformed_before", ()):
            out += [f"{ts(t)} --> garbage", "this cue has broken timing", ""]
        if style == "rolling":
            words = line.split(" ")
            body = lines[i - 1] + "\n" if i else ""
            # live captions carry per-word timestamps on the newest line
            body += f"<{ts(t)}><c> " + "</c><c> ".join(words) + "</c>"
        else:
            body = line
        if extras.get("cue_ids"):
            out.append(f"cue-{i + 1}")
        out += [f"{ts(t)} --> {ts(t + 2500)} align:start position:0%", body, ""]
        t += 3000
    return "\n".join(out)


def english_doc(rng: random.Random, topic: str, n_lines: int, planted: list[str]) -> list[tuple[str, str]]:
    lines = [sentence(rng, topic) for _ in range(n_lines)]
    for k, key in enumerate(planted):
        lines.insert(min(len(lines), 2 + 3 * k), PLANTED[key])
    return lines


def main() -> None:
    rng = random.Random(SEED)
    docs = []
    topics = list(TOPICS)
    planted_sets = [
        ["email", "digits"], ["url", "sound_only"], ["handle", "censored"],
        ["bare_url", "entity"], ["markup", "sound_inline"], ["nfkc", "digits"],
        [], ["email", "handle", "url"], ["censored"], ["sound_only", "entity"],
        ["digits"], ["markup"], ["nfkc"], ["bare_url"], ["sound_inline"],
    ]
    channels = ["UCalpha", "UCbeta", "UCgamma", "UCdelta", "UCepsilon"]
    categories = {"cooking": "Howto", "gaming": "Gaming", "travel": "Travel",
                  "music": "Music", "science": "Education", "garden": "Howto"}
    for i in range(15):
        topic = topics[i % len(topics)]
        lines = english_doc(rng, topic, rng.randint(18, 26), planted_sets[i])
        docs.append({
            "video_id": f"v{i + 1:02d}", "channel_id": channels[i % len(channels)],
            "category": categories[topic], "role": "english", "lines": lines,
            "style": "rolling" if i in (2, 9) else "plain",
            "extras": {"style_block": i == 4, "note": i == 6, "cue_ids": i == 7,
                       "malformed_before": [5] if i == 11 else []},
        })
    # near duplicates: reuploads missing their last line (fewer tokens, so they go)
    for src, vid, chan in ((2, "v16", "UCzeta"), (7, "v17", "UCeta")):
        base = docs[src]
        docs.append({**base, "video_id": vid, "channel_id": chan, "role": f"duplicate:{base['video_id']}",
                     "lines": base["lines"][:-1], "style": "plain", "extras": {}})
    docs.append({"video_id": "v18", "channel_id": "UCbeta", "category": "Howto",
                 "role": "below-threshold", "lines": [(s, s) for s in SPANISH],
                 "style": "plain", "extras": {}})
    docs.append({"video_id": "v19", "channel_id": "UCtheta", "category": "Howto",
                 "role": "below-threshold", "lines": [(s, s) for s in JAPANESE],
                 "style": "plain", "extras": {}})
    short = [PLANTED["sound_only"], sentence(rng, "travel"), sentence(rng, "travel")]
    docs.append({"video_id": "v20", "channel_id": "UCgamma", "category": "Travel",
                 "role": "too-short", "lines": short, "style": "plain", "extras": {}})

    subs = HERE / "subs"
    subs.mkdir(exist_ok=True)
    manifest = ["#video_id\tchannel_id\tcategory\tduration_s\tdeclared_language\tsubtitle_path"]
    truth = []
    for d in docs:
        text = render([raw for raw, _ in d["lines"]], d["style"], d["extras"])
        (subs / f"{d['video_id']}.vtt").write_text(text + "\n", encoding="utf-8")
        duration = 3 * len(d["lines"]) + 1
        manifest.append(f"{d['video_id']}\t{d['channel_id']}\t{d['category']}\t{duration}"
                        f"\ten\tsubs/{d['video_id']}.vtt")
        truth.append({k: d[k] for k in ("video_id", "channel_id", "category", "role")}
                     | {"tokens": [t for _, exp in d["lines"] for t in exp.split()],
                        "lines": [raw for raw, _ in d["lines"]]})
    (HERE / "manifest.tsv").write_text("\n".join(manifest) + "\n", encoding="utf-8")
    (HERE / "truth.json").write_text(json.dumps(truth, ensure_ascii=False, indent=1) + "\n",
                                     encoding="utf-8")


if __name__ == "__main__":
    main()
