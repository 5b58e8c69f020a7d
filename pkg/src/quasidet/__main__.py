"""`python -m quasidet` runs the same entry point as the `quasidet` console script."""

from .main import main

if __name__ == "__main__":
    raise SystemExit(main())
