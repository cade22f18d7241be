from oblivram.hashing import HashPair


def colliding_keys(m: int, count: int, seeds=(11, 22), start: int = 0):
    """``count`` keys sharing the (h1, h2) images of ``start``, found by search."""
    h = HashPair(*seeds, m)
    target = h.both(start)
    out = [start]
    x = start + 1
    while len(out) < count:
        if h.both(x) == target:
            out.append(x)
        x += 1
    return out, h


# one line per acceptance criterion, printed after the run
CRITERIA: dict[int, str] = {}


def record_criterion(number: int, title: str, ok: bool, detail: str = "") -> bool:
    CRITERIA[number] = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
    return ok


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
