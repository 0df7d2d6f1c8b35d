"""Five-velocity vector BGK relaxation solver for the incompressible Navier-Stokes limit."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"
