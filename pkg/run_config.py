"""Scenario files: INI-style sections parsed into a validated RunConfig.

    [eos]          kind = two_fluid, gamma_plus = 2, gamma_minus = 2
    [grid]         nx = 64, ny = 1, x_min = 0, x_max = 1, ...
    [ic.patch.1]   x_min, x_max, y_min, y_max, r, q, ux, uy, uz
    [solver]       cfl, t_end, flux, bc, stride, snapshot_dt, max_steps
    [output]       dir, name

Problems are collected, not raised one at a time, so a bad file is
reported in full. Each message starts with the line it refers to.
"""
import re
from dataclasses import dataclass
from pathlib import Path

from closure import EquationOfState
from errors import ValidationError
from grid import Grid
from solver import ConservedField, Patch, PiecewiseConstantIC, SolverConfig, make_piecewise_ic

EOS_PARAMETERS = {
    'two_fluid': ('gamma_plus', 'gamma_minus'),
    'liquid_gas': ('c_const', 'k0', 'a0'),
    'fluid_particle': ('gamma', 'beta'),
}

SECTION_KEYS = {
    'eos': {'kind'} | {key for keys in EOS_PARAMETERS.values() for key in keys},
    'grid': {'nx', 'ny', 'x_min', 'x_max', 'y_min', 'y_max'},
    'solver': {'cfl', 't_end', 'flux', 'bc', 'stride', 'snapshot_dt', 'max_steps'},
    'output': {'dir', 'name'},
}
PATCH_KEYS = {'x_min', 'x_max', 'y_min', 'y_max', 'r', 'q', 'ux', 'uy', 'uz'}

_SECTION = re.compile(r'^\[\s*([A-Za-z0-9_.]+)\s*\]$')
_ENTRY = re.compile(r'^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$')
_PATCH = re.compile(r'^ic\.patch\.(\d+)$')


@dataclass(frozen=True)
class RunConfig:
    name: str
    eos: EquationOfState
    grid: Grid
    ic: PiecewiseConstantIC
    solver: SolverConfig
    output_dir: str

    def initial_field(self) -> ConservedField:
        return make_piecewise_ic(self.ic, self.grid)


@dataclass
class _Section:
    name: str
    line: int
    entries: dict

    def where(self, key: str | None = None) -> int:
        if key is not None and key in self.entries:
            return self.entries[key][1]
        return self.line


def _read_sections(text: str) -> tuple:
    sections = {}
    errors = []
    current = None
    for line_num, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(('#', ';')):
            continue

        header = _SECTION.match(line)
        if header:
            name = header.group(1)
            if name in sections:
                errors.append(f"line {line_num}: duplicate section [{name}]")
                current = None
                continue
            if name not in SECTION_KEYS and not _PATCH.match(name):
                errors.append(f"line {line_num}: unknown section [{name}]")
                current = None
                continue
            current = sections[name] = _Section(name, line_num, {})
            continue

        entry = _ENTRY.match(line)
        if not entry:
            errors.append(f"line {line_num}: expected 'key = value', got {raw.strip()!r}")
            continue
        if current is None:
            errors.append(f"line {line_num}: '{entry.group(1)}' is outside any known section")
            continue
        key, value = entry.group(1), entry.group(2).strip()
        allowed = PATCH_KEYS if _PATCH.match(current.name) else SECTION_KEYS[current.name]
        if key not in allowed:
            errors.append(f"line {line_num}: unknown key '{key}' in [{current.name}]")
        elif key in current.entries:
            errors.append(f"line {line_num}: duplicate key '{key}' in [{current.name}]")
        elif not value:
            errors.append(f"line {line_num}: '{key}' has no value")
        else:
            current.entries[key] = (value, line_num)
    return sections, errors


def _value(section: _Section, key: str, errors: list, default=None, kind=float, required=False):
    if key not in section.entries:
        if required:
            errors.append(f"line {section.line}: [{section.name}] is missing required key '{key}'")
        return default
    raw, line_num = section.entries[key]
    try:
        return kind(raw)
    except ValueError:
        expected = 'an integer' if kind is int else 'a number'
        errors.append(f"line {line_num}: {key} must be {expected}, got {raw!r}")
        return default


def _build(section: _Section | None, errors: list, factory, *args, **kwargs):
    """Call a validating constructor, turning its ValidationError into a line-numbered message."""
    try:
        return factory(*args, **kwargs)
    except ValidationError as exc:
        line = section.line if section is not None else 1
        errors.append(f"line {line}: {exc}")
        return None


def _parse_eos(section: _Section, errors: list) -> EquationOfState | None:
    kind = _value(section, 'kind', errors, kind=str, required=True)
    if kind is None:
        return None
    if kind not in EOS_PARAMETERS:
        errors.append(f"line {section.where('kind')}: unknown eos kind '{kind}', "
                      f"expected one of {', '.join(EOS_PARAMETERS)}")
        return None
    for key in section.entries:
        if key != 'kind' and key not in EOS_PARAMETERS[kind]:
            errors.append(f"line {section.where(key)}: '{key}' does not apply to eos kind {kind}")

    before = len(errors)
    values = [_value(section, key, errors, required=True) for key in EOS_PARAMETERS[kind]]
    if len(errors) > before:
        return None
    factory = {
        'two_fluid': EquationOfState.two_fluid_law,
        'liquid_gas': EquationOfState.liquid_gas_law,
        'fluid_particle': EquationOfState.fluid_particle_law,
    }[kind]
    return _build(section, errors, factory, *values)


def _parse_grid(section: _Section, errors: list) -> Grid | None:
    before = len(errors)
    nx = _value(section, 'nx', errors, kind=int, required=True)
    ny = _value(section, 'ny', errors, default=1, kind=int)
    x_range = (_value(section, 'x_min', errors, 0.0), _value(section, 'x_max', errors, 1.0))
    y_range = (_value(section, 'y_min', errors, 0.0), _value(section, 'y_max', errors, 1.0))
    if len(errors) > before:
        return None
    if ny == 1 and ('y_min' in section.entries or 'y_max' in section.entries):
        errors.append(f"line {section.where('y_min')}: y bounds need ny > 1")
        return None
    if ny < 1:
        errors.append(f"line {section.where('ny')}: ny must be at least 1 (got {ny})")
        return None
    return _build(section, errors, Grid.uniform, nx, ny, x_range, y_range)


def _parse_patch(section: _Section, grid: Grid, errors: list) -> Patch | None:
    before = len(errors)
    lower = [_value(section, 'x_min', errors, grid.lower[0])]
    upper = [_value(section, 'x_max', errors, grid.upper[0])]
    if grid.ndim == 2:
        lower.append(_value(section, 'y_min', errors, grid.lower[1]))
        upper.append(_value(section, 'y_max', errors, grid.upper[1]))
    elif 'y_min' in section.entries or 'y_max' in section.entries:
        errors.append(f"line {section.where('y_min')}: [{section.name}] sets y bounds on a 1D grid")
    R = _value(section, 'r', errors, required=True)
    Q = _value(section, 'q', errors, required=True)
    u = tuple(_value(section, key, errors, 0.0) for key in ('ux', 'uy', 'uz'))
    if len(errors) > before:
        return None
    for key, component in list(zip(('ux', 'uy', 'uz'), u))[grid.ndim:]:
        if component != 0:
            errors.append(f"line {section.where(key)}: {key} cannot be carried on a {grid.ndim}D grid")
            return None
    return _build(section, errors, Patch, section.name, tuple(lower), tuple(upper), R, Q, u)


def _parse_solver(section: _Section, eos: EquationOfState, errors: list) -> SolverConfig | None:
    before = len(errors)
    values = dict(
        t_end=_value(section, 't_end', errors, required=True),
        cfl=_value(section, 'cfl', errors, 0.9),
        flux=_value(section, 'flux', errors, 'rusanov', kind=str),
        bc=_value(section, 'bc', errors, 'reflecting', kind=str),
        stride=_value(section, 'stride', errors, 1, kind=int),
        snapshot_dt=_value(section, 'snapshot_dt', errors, None),
        max_steps=_value(section, 'max_steps', errors, 1_000_000, kind=int),
    )
    if len(errors) > before or eos is None:
        return None
    return _build(section, errors, SolverConfig, eos, **values)


def parse_config(text: str) -> tuple:
    """Parse and validate a scenario; returns (RunConfig or None, errors)."""
    sections, errors = _read_sections(text)

    for required in ('eos', 'grid', 'solver'):
        if required not in sections:
            errors.append(f"line 1: missing section [{required}]")

    eos = _parse_eos(sections['eos'], errors) if 'eos' in sections else None
    grid = _parse_grid(sections['grid'], errors) if 'grid' in sections else None
    solver = _parse_solver(sections['solver'], eos, errors) if 'solver' in sections else None

    patch_sections = sorted((s for name, s in sections.items() if _PATCH.match(name)),
                            key=lambda s: int(_PATCH.match(s.name).group(1)))
    if not patch_sections:
        errors.append("line 1: at least one [ic.patch.N] section is required")

    ic = None
    if grid is not None and patch_sections:
        patches = [_parse_patch(section, grid, errors) for section in patch_sections]
        if all(p is not None for p in patches):
            ic = _build(patch_sections[0], errors, PiecewiseConstantIC, tuple(patches))
        if ic is not None:
            try:
                ic.check_covers(grid)
            except ValidationError as exc:
                errors.append(f"line {patch_sections[0].line}: {exc}")

    output = sections.get('output')
    name = 'run'
    output_dir = 'out'
    if output is not None:
        name = _value(output, 'name', errors, 'run', kind=str)
        output_dir = _value(output, 'dir', errors, 'out', kind=str)

    if errors:
        return None, errors
    return RunConfig(name, eos, grid, ic, solver, output_dir), []


def load_config(path) -> RunConfig:
    """Read and parse a scenario file, raising ValidationError with every problem found."""
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror or exc}")
    config, errors = parse_config(text)
    if errors:
        raise ValidationError(f"{path}: {len(errors)} configuration error(s)", messages=errors)
    return config
