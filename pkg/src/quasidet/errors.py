from __future__ import annotations

from typing import Optional


class QuasidetError(Exception):
    pass


class ShapeError(QuasidetError, ValueError):
    pass


class NonFiniteError(QuasidetError, ValueError):
    pass


class ParameterError(QuasidetError, ValueError):
    pass


class NonHermitianError(QuasidetError, ValueError):
    def __init__(self, deviation: float, tol: float):
        super().__init__(f"matrix is not Hermitian (max |H - H^dagger| = {deviation:.3e} > tol {tol:.1e})")
        self.deviation = deviation
        self.tol = tol


class OrthogonalPostselectionError(QuasidetError):
    def __init__(self, overlap_prob: float, eps: float, final_label: Optional[str] = None):
        where = f" for f={final_label}" if final_label else ""
        super().__init__(
            f"post-selection is orthogonal to the initial state{where} "
            f"(|<f|i>|^2 = {overlap_prob:.3e} < {eps:.1e}); the weak value is undefined"
        )
        self.overlap_prob = overlap_prob
        self.eps = eps
        self.final_label = final_label


class PostselectionStarvedError(QuasidetError):
    def __init__(self, prob: float, final_label: Optional[str] = None):
        where = f" for f={final_label}" if final_label else ""
        super().__init__(f"post-selection probability{where} is {prob:.3e}; no shots would survive")
        self.prob = prob
        self.final_label = final_label


class ScenarioError(QuasidetError):
    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}" if field_path else message)
        self.field_path = field_path
        self.message = message
