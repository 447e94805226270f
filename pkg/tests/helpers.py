from pathlib import Path


def write_manifest_rows(path: Path, rows: list[tuple], make_files: bool = True) -> Path:
    lines = ["#video_id\tchannel_id\tcategory\tduration_s\tdeclared_language\tsubtitle_path"]
    for r in rows:
        lines.append("\t".join(str(c) for c in r))
        if make_files:
            (path.parent / r[5]).write_text("WEBVTT\n", encoding="utf-8")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# one line per acceptance criterion, printed in the terminal summary by conftest
ACCEPTANCE: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
