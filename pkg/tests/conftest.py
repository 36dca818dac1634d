from fplab.circuit import Circuit, CircuitBuilder


def comparison_circuit(c) -> Circuit:
    """f(x) = x - c."""
    b = CircuitBuilder(1, "cmp")
    x = b.input(0)
    return b.build(b.sub(x, b.const(c)))


def identity_circuit():
    b = CircuitBuilder(1, "ident")
    return b.build(b.input(0))


def neg_one_minus_square():
    """f(y) = -1 - y^2, infeasible everywhere."""
    b = CircuitBuilder(1, "negsq")
    y = b.input(0)
    return b.build(b.sub(b.const(-1), b.mul(y, y)))


def square_circuit():
    b = CircuitBuilder(1, "square")
    y = b.input(0)
    return b.build(b.mul(y, y))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
