"""ASCII AIGER ("aag") ingestion and emission.

Literal convention: variable v has positive literal 2v, negated literal
2v+1; literal 0 is constant false.  Negated literals materialize NOT
nodes, one shared NOT per driver.  Latches become pseudo-PI nodes plus a
``latch_map`` entry pointing at the next-state driver.
"""

from __future__ import annotations

from .graph import CircuitGraph, OperatorKind, compute_levels


class ParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnsupportedKind(ValueError):
    """Raised when serializing a node kind AIGER cannot express."""


def parse_aiger(text: str) -> CircuitGraph:
    """Parse an ASCII AIGER string into a CircuitGraph.

    Node ids are assigned densely in construction order: PIs, pseudo-PIs,
    then per AND line any operand NOTs followed by the AND itself, then
    output NOTs.  The optional symbol table and comments are ignored.
    """
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty input", 1)
    header = lines[0].split()
    if len(header) != 6 or header[0] != "aag":
        raise ParseError(f"bad header {lines[0]!r}, expected 'aag M I L O A'", 1)
    try:
        m, n_in, n_latch, n_out, n_and = (int(tok) for tok in header[1:])
    except ValueError:
        raise ParseError(f"non-integer header field in {lines[0]!r}", 1) from None
    if min(m, n_in, n_latch, n_out, n_and) < 0:
        raise ParseError("negative header field", 1)

    body_needed = n_in + n_latch + n_out + n_and
    if len(lines) - 1 < body_needed:
        raise ParseError(
            f"expected {body_needed} body lines, found {len(lines) - 1}",
            len(lines),
        )

    kinds: list[OperatorKind] = []
    inputs_of: list[list[int]] = []
    latch_map: dict[int, int] = {}
    latch_init: dict[int, int] = {}

    def new_node(kind: OperatorKind, ins: list[int]) -> int:
        kinds.append(kind)
        inputs_of.append(ins)
        return len(kinds) - 1

    # var index -> node id of the positive (non-negated) signal
    var_node: dict[int, int] = {}
    # var index -> node id of its shared NOT, created on demand
    not_node: dict[int, int] = {}
    const0: int | None = None

    def read_literal(token: str, line_no: int) -> int:
        try:
            lit = int(token)
        except ValueError:
            raise ParseError(f"bad literal {token!r}", line_no) from None
        if lit < 0 or lit > 2 * m + 1:
            raise ParseError(f"literal {lit} out of range (max var {m})", line_no)
        return lit

    line_no = 1
    input_vars: list[int] = []
    for _ in range(n_in):
        line_no += 1
        lit = read_literal(lines[line_no - 1].split()[0], line_no)
        if lit & 1 or lit == 0:
            raise ParseError(f"input literal {lit} must be positive and nonzero", line_no)
        var = lit >> 1
        if var in var_node:
            raise ParseError(f"duplicate definition of variable {var}", line_no)
        var_node[var] = new_node(OperatorKind.PI, [])
        input_vars.append(var)

    latch_specs: list[tuple[int, int, int, int]] = []  # (var, next_lit, init, line)
    for _ in range(n_latch):
        line_no += 1
        toks = lines[line_no - 1].split()
        if len(toks) not in (2, 3):
            raise ParseError("latch line needs 'lit next [init]'", line_no)
        lit = read_literal(toks[0], line_no)
        nxt = read_literal(toks[1], line_no)
        init = 0
        if len(toks) == 3:
            if toks[2] not in ("0", "1"):
                raise ParseError(f"unsupported latch init {toks[2]!r}", line_no)
            init = int(toks[2])
        if lit & 1 or lit == 0:
            raise ParseError(f"latch literal {lit} must be positive and nonzero", line_no)
        var = lit >> 1
        if var in var_node:
            raise ParseError(f"duplicate definition of variable {var}", line_no)
        node = new_node(OperatorKind.PSEUDO_PI, [])
        var_node[var] = node
        latch_init[node] = init
        latch_specs.append((var, nxt, init, line_no))

    output_lits: list[int] = []
    for _ in range(n_out):
        line_no += 1
        output_lits.append(read_literal(lines[line_no - 1].split()[0], line_no))

    and_specs: list[tuple[int, int, int, int]] = []
    for _ in range(n_and):
        line_no += 1
        toks = lines[line_no - 1].split()
        if len(toks) != 3:
            raise ParseError("and line needs 'lhs rhs0 rhs1'", line_no)
        lhs = read_literal(toks[0], line_no)
        rhs0 = read_literal(toks[1], line_no)
        rhs1 = read_literal(toks[2], line_no)
        if lhs & 1 or lhs == 0:
            raise ParseError(f"and literal {lhs} must be positive and nonzero", line_no)
        var = lhs >> 1
        if var in var_node:
            raise ParseError(f"duplicate AND definition of variable {var}", line_no)
        var_node[var] = -1  # reserve; definition resolved below
        and_specs.append((var, rhs0, rhs1, line_no))

    # Anything past the body is symbol table / comments; ignore.

    def node_for_literal(lit: int, line_no: int) -> int:
        nonlocal const0
        var = lit >> 1
        if var == 0:
            if const0 is None:
                const0 = new_node(OperatorKind.CONST0, [])
            base = const0
        else:
            if var not in var_node or var_node[var] == -1:
                raise ParseError(f"literal {lit} references undefined variable {var}", line_no)
            base = var_node[var]
        if lit & 1:
            if base not in not_node:
                not_node[base] = new_node(OperatorKind.NOT, [base])
            return not_node[base]
        return base

    # AND definitions in file order; AIGER requires operands to be defined
    # earlier, which also guarantees acyclicity here.
    for var, rhs0, rhs1, ln in and_specs:
        a = node_for_literal(rhs0, ln)
        b = node_for_literal(rhs1, ln)
        var_node[var] = new_node(OperatorKind.AND2, [a, b])

    for var, nxt, _init, ln in latch_specs:
        latch_map[var_node[var]] = node_for_literal(nxt, ln)

    primary_outputs = [
        node_for_literal(lit, 1) for lit in output_lits
    ]

    graph = CircuitGraph.build(
        kinds=kinds,
        inputs_of=inputs_of,
        primary_outputs=primary_outputs,
        latch_map=latch_map,
        latch_init=latch_init,
    )
    return graph


def serialize_aiger(graph: CircuitGraph) -> str:
    """Emit canonical ASCII AIGER.

    NOT nodes fold into literal parity (chains collapse), so parsing the
    result back yields the graph up to inverter canonicalization; for
    already-canonical graphs the round trip is an isomorphism, and
    serialize(parse(serialize(g))) is byte-stable for every g.
    """
    for kind in graph.kinds:
        if kind is OperatorKind.MUX:
            raise UnsupportedKind("MUX has no AIGER encoding; lower it first")

    schedule = compute_levels(graph)

    # Resolve each node to (base non-NOT node, parity).
    def resolve(v: int) -> tuple[int, int]:
        parity = 0
        while graph.kinds[v] is OperatorKind.NOT:
            parity ^= 1
            v = graph.inputs_of[v][0]
        return v, parity

    var_of: dict[int, int] = {}
    next_var = 1
    pis = [v for v in range(graph.n_nodes) if graph.kinds[v] is OperatorKind.PI]
    latches = [v for v in range(graph.n_nodes) if graph.kinds[v] is OperatorKind.PSEUDO_PI]
    for v in pis:
        var_of[v] = next_var
        next_var += 1
    for v in latches:
        var_of[v] = next_var
        next_var += 1
    # ANDs in level-major, id-minor order so operands precede uses.
    ands = sorted(
        (v for v in range(graph.n_nodes) if graph.kinds[v] is OperatorKind.AND2),
        key=lambda v: (schedule.level_of[v], v),
    )
    for v in ands:
        var_of[v] = next_var
        next_var += 1

    def literal(v: int) -> int:
        base, parity = resolve(v)
        if graph.kinds[base] is OperatorKind.CONST0:
            return parity
        return 2 * var_of[base] + parity

    out = [f"aag {next_var - 1} {len(pis)} {len(latches)} {len(graph.primary_outputs)} {len(ands)}"]
    for v in pis:
        out.append(str(2 * var_of[v]))
    for v in latches:
        init = graph.latch_init.get(v, 0)
        nxt = literal(graph.latch_map[v])
        out.append(f"{2 * var_of[v]} {nxt} {init}" if init else f"{2 * var_of[v]} {nxt}")
    for o in graph.primary_outputs:
        out.append(str(literal(o)))
    for v in ands:
        a, b = graph.inputs_of[v]
        out.append(f"{2 * var_of[v]} {literal(a)} {literal(b)}")
    return "\n".join(out) + "\n"
