"""
Text formats read and written by hslag.

Potential files are sectioned key-value text; frame archives are
versioned and checksummed; meshes are Wavefront OBJ; reports, sample and
cone tables are plain text. Every write goes through a temporary file in
the target directory and an atomic rename. Floats are written with 17
significant digits, so reading them back is exact.
"""
import hashlib
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algebra import get_case
from .dpw import HoloPotential, LoopField
from .exceptions import AlgebraError, ArchiveError, PotentialFormatError
from .grids import Grid

logger = logging.getLogger(__name__)

ARCHIVE_MAGIC = 'hslag-archive'
ARCHIVE_VERSION = '1.0'
TWIST_TOL = 1e-10

POTENTIAL_SECTIONS = {
    'case': ('name',),
    'grid': ('nx', 'ny', 'domain'),
    'loop': ('lambda_samples', 'fourier_cap'),
    'coefficient': ('k', 'entry'),
}


def fmt(value):
    return format(float(value), '.17g')


def atomic_write(path, text):
    """Write text to path through a temporary sibling and os.replace."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile('w', dir=path.parent, prefix=f'.{path.name}.', delete=False, encoding='utf-8')
    try:
        with handle:
            handle.write(text)
        os.replace(handle.name, path)
    except BaseException:
        if os.path.exists(handle.name):
            os.unlink(handle.name)
        raise
    logger.debug('wrote %s (%d bytes)', path, len(text))
    return path


@dataclass(eq=False)
class PotentialFile:
    """A parsed potential together with the optional grid and loop sections."""

    potential: HoloPotential
    grid: dict = field(default_factory=dict)
    loop: dict = field(default_factory=dict)


@dataclass
class _Block:
    line: int
    k: int = None
    entries: list = field(default_factory=list)


def _values(text, count, path, number, cast=float):
    parts = [part.strip() for part in text.split(',')]
    if len(parts) != count:
        raise PotentialFormatError(f"expected {count} comma separated values, got {len(parts)}", path, number)
    try:
        return [cast(part) for part in parts]
    except ValueError as exc:
        raise PotentialFormatError(f"bad number: {exc}", path, number) from None


def _integer(text, path, number):
    return _values(text, 1, path, number, int)[0]


def parse_potential(text, path=None):
    """Parse potential file text; errors carry the offending line."""
    section = None
    case_name = None
    grid = {}
    loop = {}
    blocks = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if line.startswith('[') and line.endswith(']'):
            section = line[1:-1].strip()
            if section not in POTENTIAL_SECTIONS:
                raise PotentialFormatError(f"unknown section [{section}]", path, number)
            if section == 'coefficient':
                blocks.append(_Block(number))
            continue
        if '=' not in line:
            raise PotentialFormatError(f"expected 'key = value', got '{line}'", path, number)
        key, value = (part.strip() for part in line.split('=', 1))
        if section is None:
            raise PotentialFormatError(f"key '{key}' outside any section", path, number)
        if key not in POTENTIAL_SECTIONS[section]:
            raise PotentialFormatError(f"unknown key '{key}' in [{section}]", path, number)

        if section == 'case':
            try:
                case_name = get_case(value).name
            except AlgebraError as exc:
                raise PotentialFormatError(str(exc), path, number) from None
        elif section == 'grid':
            grid[key] = _values(value, 4, path, number) if key == 'domain' else _integer(value, path, number)
        elif section == 'loop':
            loop[key] = _integer(value, path, number)
        elif key == 'k':
            k = _integer(value, path, number)
            if k < -2:
                raise PotentialFormatError(f"mode k = {k} is below -2", path, number)
            blocks[-1].k = k
        else:
            row, col, degree, re, im = _values(value, 5, path, number)
            blocks[-1].entries.append((number, row, col, degree, complex(re, im)))

    case = get_case(case_name or 'CP2')
    potential = _assemble(case, blocks, path)
    domain = tuple(grid['domain']) if 'domain' in grid else None
    potential = HoloPotential(potential.coeffs, case, potential.k_min, domain)
    return PotentialFile(potential, grid, loop)


def _assemble(case, blocks, path):
    n = case.size
    for block in blocks:
        if block.k is None:
            raise PotentialFormatError('[coefficient] block has no k', path, block.line)
    if not blocks:
        return HoloPotential.zero(case)
    k_max = max(max(block.k for block in blocks), -2)
    degree = 0
    for block in blocks:
        for number, row, col, d, _ in block.entries:
            if d != int(d) or d < 0:
                raise PotentialFormatError(f"degree {d} is not a non-negative integer", path, number)
            if not (0 <= row < n and 0 <= col < n) or row != int(row) or col != int(col):
                raise PotentialFormatError(f"entry ({row}, {col}) outside a {n}x{n} matrix", path, number)
            degree = max(degree, int(d))
    coeffs = np.zeros((k_max + 3, degree + 1, n, n), dtype=complex)
    for block in blocks:
        matrix = np.zeros((degree + 1, n, n), dtype=complex)
        for _, row, col, d, value in block.entries:
            matrix[int(d), int(row), int(col)] += value
        residual = float(np.max(np.abs(case.tau(matrix) - (1j ** block.k) * matrix), initial=0.0))
        if residual > TWIST_TOL * max(1.0, float(np.max(np.abs(matrix), initial=0.0))):
            raise PotentialFormatError(
                f"coefficient of lambda^{block.k} violates the twisting condition (residual {residual:.3e})",
                path, block.line,
            )
        coeffs[block.k + 2] += matrix
    return HoloPotential(coeffs, case, -2)


def read_potential_file(path):
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise PotentialFormatError(f"cannot read: {exc.strerror}", path, 0) from None
    return parse_potential(text, path)


def read_potential(path):
    return read_potential_file(path).potential


def format_potential(potential, grid=None, spec=None):
    lines = ['# hslag holomorphic potential', '[case]', f'name = {potential.case.name}']
    if grid is not None:
        lines += ['[grid]', f'nx = {grid.nx}', f'ny = {grid.ny}',
                  'domain = ' + ', '.join(fmt(v) for v in grid.domain)]
    if spec is not None:
        lines += ['[loop]', f'lambda_samples = {spec.N}', f'fourier_cap = {spec.K}']
    for i, k in enumerate(potential.modes):
        block = potential.coeffs[i]
        nonzero = np.argwhere(block != 0)
        if not len(nonzero):
            continue
        lines += ['[coefficient]', f'k = {k}']
        for d, row, col in nonzero:
            value = block[d, row, col]
            lines.append(f'entry = {row}, {col}, {d}, {fmt(value.real)}, {fmt(value.imag)}')
    return '\n'.join(lines) + '\n'


def write_potential(path, potential, grid=None, spec=None):
    return atomic_write(path, format_potential(potential, grid, spec))


def write_report(path, report):
    return atomic_write(path, report.as_text())


def format_mesh(vertices, comment=None):
    """
    OBJ text for a grid of vertices (nx, ny, 3), or a stack of such sheets
    (sheets, nx, ny, 3). Quads are split into two counterclockwise triangles.
    """
    vertices = np.asarray(vertices, dtype=float)
    lines = ['# hslag mesh']
    if comment:
        lines.append(f'# {comment}')
    if vertices.size == 0:
        return '\n'.join(lines) + '\n'
    sheets = vertices.reshape((-1,) + vertices.shape[-3:])
    nx, ny = sheets.shape[1:3]
    lines.extend('v ' + ' '.join(fmt(c) for c in v) for v in sheets.reshape(-1, 3))

    for s in range(len(sheets)):
        for p in range(nx - 1):
            for q in range(ny - 1):
                # vertex (s, p, q) has OBJ index s nx ny + p ny + q + 1
                a = s * nx * ny + p * ny + q + 1
                b, c, d = a + ny, a + ny + 1, a + 1
                lines.append(f'f {a} {b} {c}')
                lines.append(f'f {a} {c} {d}')
    return '\n'.join(lines) + '\n'


def write_mesh(path, vertices, comment=None):
    return atomic_write(path, format_mesh(vertices, comment))


SAMPLE_COLUMNS = (
    'p', 'q', 'x', 'y',
    're_z1', 'im_z1', 're_z2', 'im_z2', 're_z3', 'im_z3',
    'rho', 'beta', 'maslov_x', 'maslov_y',
)


def format_samples(surface):
    lines = ['# ' + ' '.join(SAMPLE_COLUMNS)]
    if surface is None:
        return lines[0] + '\n'
    z = surface.grid.z
    for p in range(surface.grid.nx):
        for q in range(surface.grid.ny):
            point = surface.points[p, q]
            values = [z[p, q].real, z[p, q].imag]
            for c in point:
                values += [c.real, c.imag]
            values += [surface.rho[p, q], surface.beta[p, q], *surface.maslov[p, q]]
            lines.append(f'{p} {q} ' + ' '.join(fmt(v) for v in values))
    return '\n'.join(lines) + '\n'


def write_samples(path, surface):
    return atomic_write(path, format_samples(surface))


def write_cone_table(path, table):
    """Six columns per point: real and imaginary parts of z1, z2, z3."""
    lines = ['# re_z1 im_z1 re_z2 im_z2 re_z3 im_z3']
    lines.extend(' '.join(fmt(v) for v in row) for row in np.asarray(table).reshape(-1, 6))
    return atomic_write(path, '\n'.join(lines) + '\n')


@dataclass(eq=False)
class FrameArchive:
    case: object
    grid: Grid
    N: int
    K: int
    samples: np.ndarray
    version: str = ARCHIVE_VERSION

    def loop_field(self):
        return LoopField(self.grid, self.samples, self.case)


def format_archive(frame, K):
    grid = frame.grid
    n = frame.case.size
    lines = [
        f'{ARCHIVE_MAGIC} {ARCHIVE_VERSION}',
        f'case = {frame.case.name}',
        'grid = ' + ', '.join([str(grid.nx), str(grid.ny)] + [fmt(v) for v in grid.domain]),
        f'loop = {frame.N}, {K}',
    ]
    for p in range(grid.nx):
        for q in range(grid.ny):
            lines.append(f'node = {p}, {q}')
            for j in range(frame.N):
                block = frame.samples[p, q, j].reshape(n * n)
                values = np.stack([block.real, block.imag], axis=-1).reshape(-1)
                lines.append(f'sample = {j}, ' + ', '.join(fmt(v) for v in values))
    body = '\n'.join(lines) + '\n'
    digest = hashlib.sha256(body.encode('utf-8')).hexdigest()
    return body + f'checksum = sha256:{digest}\n'


def write_archive(path, frame, K):
    return atomic_write(path, format_archive(frame, K))


def _archive_value(line, key, path):
    prefix = f'{key} = '
    if not line.startswith(prefix):
        raise ArchiveError(f"expected '{key}' record, got '{line[:40]}'", path)
    return [part.strip() for part in line[len(prefix):].split(',')]


def read_archive(path):
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ArchiveError(f"cannot read: {exc.strerror}", path) from None
    lines = text.splitlines()
    if not lines or not lines[0].startswith(ARCHIVE_MAGIC + ' '):
        raise ArchiveError('not an hslag frame archive', path)
    version = lines[0].split()[1]
    if version.split('.')[0] != ARCHIVE_VERSION.split('.')[0]:
        raise ArchiveError(f"unsupported archive version {version}", path)
    if not lines[-1].startswith('checksum = sha256:'):
        raise ArchiveError('missing checksum line', path)
    body = text[:text.rindex('checksum = ')]
    if hashlib.sha256(body.encode('utf-8')).hexdigest() != lines[-1].split(':', 1)[1].strip():
        raise ArchiveError('checksum mismatch', path)

    try:
        case = get_case(_archive_value(lines[1], 'case', path)[0])
        nx, ny, *domain = _archive_value(lines[2], 'grid', path)
        grid = Grid.from_domain(int(nx), int(ny), [float(v) for v in domain])
        N, K = (int(v) for v in _archive_value(lines[3], 'loop', path))
        n = case.size
        samples = np.empty((grid.nx, grid.ny, N, n, n), dtype=complex)
        cursor = 4
        for p in range(grid.nx):
            for q in range(grid.ny):
                node = [int(v) for v in _archive_value(lines[cursor], 'node', path)]
                if node != [p, q]:
                    raise ArchiveError(f"expected node {p}, {q}, got {node}", path)
                cursor += 1
                for j in range(N):
                    values = _archive_value(lines[cursor], 'sample', path)
                    if int(values[0]) != j or len(values) != 1 + 2 * n * n:
                        raise ArchiveError(f"malformed sample record at line {cursor + 1}", path)
                    pairs = np.array([float(v) for v in values[1:]]).reshape(n * n, 2)
                    samples[p, q, j] = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(n, n)
                    cursor += 1
    except (ValueError, IndexError) as exc:
        raise ArchiveError(f"malformed record: {exc}", path) from None
    if cursor != len(lines) - 1:
        raise ArchiveError(f"{len(lines) - 1 - cursor} unexpected line(s) before the checksum", path)
    logger.info('read archive %s: %s, %dx%d grid, N=%d', path, case.name, grid.nx, grid.ny, N)
    return FrameArchive(case, grid, N, K, samples, version)
