"""Exception classes used across the package."""


class ANEError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateNeuronError(ANEError, ValueError):
    """A neuron has a zero input-weight vector and cannot be normalized."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"neuron {index} has |omega| = 0")


class DegenerateElementError(ANEError, ValueError):
    """A physical element has too few points for a principal direction."""


class NonFiniteSampleError(ANEError, FloatingPointError):
    """An integrand returned NaN or inf at a quadrature point."""

    def __init__(self, cell_index, center):
        self.cell_index = cell_index
        self.center = center
        super().__init__(
            f"non-finite integrand value at cell {cell_index} (center {list(center)})"
        )


class SingularSystemError(ANEError, ArithmeticError):
    """Cholesky factorization of the mass matrix failed."""

    def __init__(self, pivot):
        self.pivot = pivot
        super().__init__(f"mass matrix is not positive definite (failing pivot {pivot})")


class DivergenceError(ANEError, FloatingPointError):
    """Training produced a non-finite loss."""

    def __init__(self, iteration, learning_rate):
        self.iteration = iteration
        self.learning_rate = learning_rate
        super().__init__(
            f"loss became non-finite at iteration {iteration} "
            f"(learning_rate={learning_rate:g})"
        )


class RefinementBudgetError(ANEError, RuntimeError):
    """Adaptive mesh refinement exceeded the configured cell cap."""

    def __init__(self, n_cells, max_cells):
        self.n_cells = n_cells
        self.max_cells = max_cells
        super().__init__(f"refined mesh has {n_cells} cells, cap is {max_cells}")


class ConfigError(ANEError, ValueError):
    """Invalid or incomplete run configuration."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
