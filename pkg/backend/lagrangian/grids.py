"""Rectangular z-grids shared by the DPW pipeline, geometry and cones."""
from dataclasses import dataclass

import numpy as np

# finite-difference residuals are compared against FD_CONSTANT * h**2
FD_CONSTANT = 50.0


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs at least 3x3 nodes, got {self.nx}x{self.ny}")
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError(
                f"empty domain {self.x0},{self.y0},{self.x1},{self.y1}"
            )

    @classmethod
    def from_domain(cls, nx, ny, domain):
        x0, y0, x1, y1 = (float(v) for v in domain)
        return cls(int(nx), int(ny), x0, y0, x1, y1)

    @property
    def domain(self):
        return (self.x0, self.y0, self.x1, self.y1)

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def hx(self):
        return (self.x1 - self.x0) / (self.nx - 1)

    @property
    def hy(self):
        return (self.y1 - self.y0) / (self.ny - 1)

    @property
    def h(self):
        return max(self.hx, self.hy)

    @property
    def xs(self):
        return np.linspace(self.x0, self.x1, self.nx)

    @property
    def ys(self):
        return np.linspace(self.y0, self.y1, self.ny)

    @property
    def z(self):
        """Node coordinates, shape (nx, ny), ``z[p, q] = xs[p] + i ys[q]``."""
        x, y = np.meshgrid(self.xs, self.ys, indexing='ij')
        return x + 1j * y

    @property
    def basepoint(self):
        """Index of the node nearest to z = 0 (clamped into the domain)."""
        p = int(np.argmin(np.abs(self.xs)))
        q = int(np.argmin(np.abs(self.ys)))
        return p, q

    @property
    def boundary(self):
        mask = np.zeros(self.shape, dtype=bool)
        mask[0, :] = mask[-1, :] = True
        mask[:, 0] = mask[:, -1] = True
        return mask

    def refine(self):
        """Same domain with halved spacing; node (p, q) becomes (2p, 2q)."""
        return Grid(2 * self.nx - 1, 2 * self.ny - 1, self.x0, self.y0, self.x1, self.y1)

    def fd_tolerance(self, constant=FD_CONSTANT, order=2):
        return constant * self.h ** order

    def gradient(self, values, axis_offset=0):
        """Second-order derivatives of a field whose leading axes are (nx, ny)."""
        dx = np.gradient(values, self.hx, axis=axis_offset, edge_order=2)
        dy = np.gradient(values, self.hy, axis=axis_offset + 1, edge_order=2)
        return dx, dy
