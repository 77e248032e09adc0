"""Structural Verilog and DEF 5.6 placement files for testcells.

Only the subsets this toolkit writes are read back. Both parsers report the
offending line on bad input and never let an IndexError or similar escape.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Optional

from .geometry import Rect
from .techlib import CellMaster, TechRules
from .testgen import ORIENTATIONS, Instance, Net, TestcellSpec, instance_bbox

DEF_VERSION = "5.6"

# --------------------------------------------------------------------------- tokenizing


class FormatError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class VerilogParseError(FormatError):
    pass


class DefParseError(FormatError):
    pass


_VERILOG_TOKEN = re.compile(r"//[^\n]*|\n|[ \t\r]+|[A-Za-z_][A-Za-z0-9_$]*|[().;,]|.")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_$]*")


def _verilog_tokens(text: str) -> Iterator[tuple[str, int]]:
    line = 1
    for m in _VERILOG_TOKEN.finditer(text):
        tok = m.group()
        if tok == "\n":
            line += 1
        elif tok.startswith("//") or tok.isspace():
            continue
        elif _IDENT.fullmatch(tok) or tok in "().;,":
            yield tok, line
        else:
            raise VerilogParseError(f"unexpected character {tok!r}", line)


# --------------------------------------------------------------------------- verilog


@dataclass(frozen=True)
class VerilogInstance:
    master: str
    name: str
    connections: tuple[tuple[str, Optional[str]], ...]  # (pin, net or None)


@dataclass(frozen=True)
class VerilogModule:
    name: str
    wires: tuple[str, ...]
    instances: tuple[VerilogInstance, ...]


@dataclass(frozen=True)
class VerilogNetlist:
    modules: tuple[VerilogModule, ...]

    def module(self, name: str) -> VerilogModule:
        for m in self.modules:
            if m.name == name:
                return m
        raise KeyError(name)


def emit_verilog(spec: TestcellSpec, cells: Optional[Mapping[str, CellMaster]] = None) -> str:
    """One module per testcell with named port connections.

    With `cells`, pins that belong to no net are written as explicit ``.P()``.
    """
    if not spec.nets:
        raise ValueError(f"{spec.id}: nets have not been assigned")
    net_of = spec.net_of()
    lines = [f"module {spec.id} ();"]
    for net in spec.nets:
        lines.append(f"  wire {net.name};")
    for inst in spec.instances:
        pins = [p.name for p in cells[inst.master].pins] if cells is not None else \
            [pin for (name, pin) in net_of if name == inst.name]
        ports = []
        for pin in pins:
            net = net_of.get((inst.name, pin))
            ports.append(f".{pin}({net or ''})")
        lines.append(f"  {inst.master} {inst.name} ({', '.join(ports)});")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


class _Tokens:
    def __init__(self, tokens, error):
        self.tokens = list(tokens)
        self.pos = 0
        self.error = error

    def line(self) -> Optional[int]:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos][1]
        return self.tokens[-1][1] if self.tokens else None

    def peek(self) -> Optional[str]:
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def next(self) -> str:
        if self.pos >= len(self.tokens):
            raise self.error("unexpected end of input", self.line())
        tok = self.tokens[self.pos][0]
        self.pos += 1
        return tok

    def expect(self, want: str) -> str:
        line = self.line()
        tok = self.next()
        if tok != want:
            raise self.error(f"expected {want!r}, found {tok!r}", line)
        return tok

    def ident(self, what: str) -> str:
        line = self.line()
        tok = self.next()
        if not _IDENT.fullmatch(tok):
            raise self.error(f"expected {what}, found {tok!r}", line)
        return tok


def parse_verilog(text: str) -> VerilogNetlist:
    toks = _Tokens(_verilog_tokens(text), VerilogParseError)
    modules = []
    while toks.peek() is not None:
        line = toks.line()
        if toks.next() != "module":
            raise VerilogParseError("expected 'module'", line)
        name = toks.ident("module name")
        toks.expect("(")
        toks.expect(")")
        toks.expect(";")
        wires: list[str] = []
        declared: set[str] = set()
        instances = []
        names: set[str] = set()
        while True:
            line = toks.line()
            tok = toks.next()
            if tok == "endmodule":
                break
            if tok == "wire":
                while True:
                    wline = toks.line()
                    w = toks.ident("net name")
                    if w in declared:
                        raise VerilogParseError(f"net {w} declared twice", wline)
                    declared.add(w)
                    wires.append(w)
                    sep = toks.next()
                    if sep == ";":
                        break
                    if sep != ",":
                        raise VerilogParseError(f"expected ',' or ';', found {sep!r}", wline)
                continue
            if tok in ("assign", "input", "output", "inout", "reg", "always", "initial"):
                raise VerilogParseError(f"unsupported construct {tok!r}", line)
            master = tok
            if not _IDENT.fullmatch(master):
                raise VerilogParseError(f"unexpected token {master!r}", line)
            inst = toks.ident("instance name")
            if inst in names:
                raise VerilogParseError(f"instance {inst} defined twice", line)
            names.add(inst)
            toks.expect("(")
            conns = []
            pins: set[str] = set()
            if toks.peek() != ")":
                while True:
                    toks.expect(".")
                    pline = toks.line()
                    pin = toks.ident("pin name")
                    if pin in pins:
                        raise VerilogParseError(f"pin {pin} of {inst} connected twice", pline)
                    pins.add(pin)
                    toks.expect("(")
                    net = None
                    if toks.peek() != ")":
                        nline = toks.line()
                        net = toks.ident("net name")
                        if net not in declared:
                            raise VerilogParseError(f"undeclared net {net}", nline)
                    toks.expect(")")
                    conns.append((pin, net))
                    sep = toks.next()
                    if sep == ")":
                        break
                    if sep != ",":
                        raise VerilogParseError(f"expected ',' or ')', found {sep!r}", toks.line())
            else:
                toks.expect(")")
            toks.expect(";")
            instances.append(VerilogInstance(master, inst, tuple(conns)))
        modules.append(VerilogModule(name, tuple(wires), tuple(instances)))
    return VerilogNetlist(tuple(modules))


def nets_from_module(module: VerilogModule) -> tuple[Net, ...]:
    """Rebuild net terminal lists; nets with fewer than two pins are unconnected."""
    terms: dict[str, list] = {w: [] for w in module.wires}
    for inst in module.instances:
        for pin, net in inst.connections:
            if net is not None:
                terms[net].append((inst.name, pin))
    return tuple(Net(w, tuple(terms[w]), unconnected=len(terms[w]) < 2) for w in module.wires)


# --------------------------------------------------------------------------- DEF


@dataclass(frozen=True)
class DefComponent:
    name: str
    master: str
    x: int
    y: int
    orient: str


@dataclass(frozen=True)
class DefDocument:
    design_name: str
    components: tuple[DefComponent, ...]
    die_area: Rect
    version: str = DEF_VERSION
    dbu: int = 1000
    nets: tuple[tuple[str, tuple[tuple[str, str], ...]], ...] = ()


def def_document(spec: TestcellSpec, dbu: int = 1000, with_nets: bool = False) -> DefDocument:
    comps = tuple(DefComponent(i.name, i.master, i.origin[0], i.origin[1], i.orientation)
                  for i in spec.instances)
    nets = tuple((n.name, tuple(n.terminals)) for n in spec.nets) if with_nets else ()
    return DefDocument(spec.id, comps, spec.die_area, DEF_VERSION, dbu, nets)


def check_placement(doc: DefDocument, cells: Mapping[str, CellMaster], rules: TechRules) -> None:
    """Raise ValueError when components overlap or reference unknown masters."""
    boxes = []
    for c in doc.components:
        if c.master not in cells:
            raise ValueError(f"component {c.name}: unknown master {c.master}")
        box = instance_bbox(Instance(c.name, c.master, (c.x, c.y), c.orient), cells[c.master], rules)
        for other, obox in boxes:
            if box.overlaps(obox):
                raise ValueError(f"components {other} and {c.name} overlap")
        boxes.append((c.name, box))


def emit_def(spec: TestcellSpec, cells: Optional[Mapping[str, CellMaster]] = None,
             rules: Optional[TechRules] = None, with_nets: bool = False) -> str:
    doc = def_document(spec, rules.dbu_per_micron if rules else 1000, with_nets)
    if cells is not None and rules is not None:
        check_placement(doc, cells, rules)
    return write_def(doc)


def write_def(doc: DefDocument) -> str:
    d = doc.die_area
    lines = [
        f"VERSION {doc.version} ;",
        f"DESIGN {doc.design_name} ;",
        f"UNITS DISTANCE MICRONS {doc.dbu} ;",
        f"COMPONENTS {len(doc.components)} ;",
    ]
    for c in doc.components:
        lines.append(f"- {c.name} {c.master} + PLACED ( {c.x} {c.y} ) {c.orient} ;")
    lines.append("END COMPONENTS")
    if doc.nets:
        lines.append(f"NETS {len(doc.nets)} ;")
        for name, terms in doc.nets:
            pins = " ".join(f"( {i} {p} )" for i, p in terms)
            lines.append(f"- {name} {pins} ;")
        lines.append("END NETS")
    lines.append(f"DIEAREA ( {d.x1} {d.y1} ) ( {d.x2} {d.y2} ) ;")
    lines.append("END DESIGN")
    return "\n".join(lines) + "\n"


def _def_statements(text: str) -> list[tuple[list[str], int]]:
    """Split into ';'-terminated statements; END lines stand on their own."""
    out = []
    current: list[str] = []
    start = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        words = line.replace(";", " ; ").replace("(", " ( ").replace(")", " ) ").split()
        if not current and words[:1] == ["END"]:
            out.append((words, lineno))
            continue
        for w in words:
            if start is None:
                start = lineno
            if w == ";":
                out.append((current, start))
                current, start = [], None
            else:
                current.append(w)
    if current:
        raise DefParseError("statement not terminated by ';'", start)
    return out


def _int(tok: str, line: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise DefParseError(f"expected an integer, found {tok!r}", line) from None


def _point(words: list[str], at: int, line: int) -> tuple[int, int]:
    if len(words) < at + 4 or words[at] != "(" or words[at + 3] != ")":
        raise DefParseError("malformed point", line)
    return _int(words[at + 1], line), _int(words[at + 2], line)


def parse_def(text: str) -> DefDocument:
    version = None
    design = None
    dbu = 1000
    die = None
    components: list[DefComponent] = []
    nets: list = []
    declared = None
    section = None
    ended = False
    for words, line in _def_statements(text):
        if not words:
            raise DefParseError("empty statement", line)
        if ended:
            raise DefParseError("content after END DESIGN", line)
        key = words[0]
        if section == "COMPONENTS":
            if words == ["END", "COMPONENTS"]:
                if declared is not None and declared != len(components):
                    raise DefParseError(f"COMPONENTS declares {declared}, found {len(components)}", line)
                section = None
                continue
            if key != "-" or len(words) < 3:
                raise DefParseError("malformed component", line)
            name, master = words[1], words[2]
            rest = words[3:]
            if len(rest) != 7 or rest[0] != "+" or rest[1] not in ("PLACED", "FIXED"):
                raise DefParseError(f"component {name}: expected '+ PLACED ( x y ) orient'", line)
            x, y = _point(rest, 2, line)
            orient = rest[6]
            if orient not in ORIENTATIONS:
                raise DefParseError(f"component {name}: unsupported orientation {orient!r}", line)
            components.append(DefComponent(name, master, x, y, orient))
            continue
        if section == "NETS":
            if words == ["END", "NETS"]:
                section = None
                continue
            if key != "-" or len(words) < 2:
                raise DefParseError("malformed net", line)
            rest = words[2:]
            if len(rest) % 4:
                raise DefParseError(f"net {words[1]}: malformed pin list", line)
            terms = []
            for k in range(0, len(rest), 4):
                if rest[k] != "(" or rest[k + 3] != ")":
                    raise DefParseError(f"net {words[1]}: malformed pin list", line)
                terms.append((rest[k + 1], rest[k + 2]))
            nets.append((words[1], tuple(terms)))
            continue
        if key == "VERSION" and len(words) == 2:
            version = words[1]
        elif key == "DESIGN" and len(words) == 2:
            design = words[1]
        elif key == "TECHNOLOGY" and len(words) == 2:
            pass
        elif key == "UNITS" and len(words) == 4 and words[1:3] == ["DISTANCE", "MICRONS"]:
            dbu = _int(words[3], line)
        elif key == "DIEAREA" and len(words) == 9:
            (x1, y1), (x2, y2) = _point(words, 1, line), _point(words, 5, line)
            die = Rect.normalized(x1, y1, x2, y2)
        elif key == "COMPONENTS" and len(words) == 2:
            declared = _int(words[1], line)
            section = "COMPONENTS"
        elif key == "NETS" and len(words) == 2:
            section = "NETS"
        elif words == ["END", "DESIGN"]:
            ended = True
        else:
            raise DefParseError(f"unsupported statement {' '.join(words[:3])!r}", line)
    if section is not None:
        raise DefParseError(f"unterminated {section} section")
    if version is None or design is None:
        raise DefParseError("missing VERSION or DESIGN")
    if die is None:
        raise DefParseError("missing DIEAREA")
    if not ended:
        raise DefParseError("missing END DESIGN")
    return DefDocument(design, tuple(components), die, version, dbu, tuple(nets))


def spec_from_files(def_text: str, verilog_text: str, kind: str = "parsed") -> TestcellSpec:
    """Rebuild a testcell from its DEF placement and Verilog connectivity."""
    doc = parse_def(def_text)
    netlist = parse_verilog(verilog_text)
    module = netlist.module(doc.design_name)
    order = [c.name for c in doc.components]
    if order != [i.name for i in module.instances]:
        raise ValueError(f"{doc.design_name}: DEF and Verilog instance order differ")
    instances = tuple(Instance(c.name, c.master, (c.x, c.y), c.orient) for c in doc.components)
    return TestcellSpec(doc.design_name, kind, instances, doc.die_area, nets_from_module(module))

