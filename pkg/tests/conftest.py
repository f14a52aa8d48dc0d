import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = sys.modules.get("test_acceptance")
    summary = getattr(mod, "SUMMARY", None) if mod else None
    if not summary:
        return
    terminalreporter.write_sep("=", "end-to-end check summary")
    for num, name, ok, detail in sorted(summary):
        status = "PASS" if ok else "FAIL"
        line = f"[{num:2d}] {status}  {name}"
        if detail:
            line += f"  -- {detail}"
        terminalreporter.write_line(line)
