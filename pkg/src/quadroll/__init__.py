"""Doubly ruled quadrics, their confocal families, and the transformations
that roll, bend and transport them.

The package is organized as a small geometry core (`confocal`, `ivory`,
`tangency`), a kinematics layer (`rolling`, `bending`), the transform
machinery (`backlund`), a self-contained balance demo (`archimedes`), and a
FastAPI service plus thin CLI client on top (`service`, `cli`).
"""

__version__ = "0.1.0"
