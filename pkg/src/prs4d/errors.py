"""Exception types shared across the package.

The CLI maps these onto exit codes: argument errors exit 2 (argparse),
ValidationError exits 3, ModelDomainError exits 4.
"""


class ValidationError(ValueError):
    """Malformed or inconsistent input (bad labeling, shape mismatch, bad file)."""


class DegenerateInputError(ValidationError):
    """Input is structurally valid but degenerate (all-zero points, zero variance)."""


class ModelDomainError(ValueError):
    """Inputs leave the domain where the model is defined (e.g. negative NLI power)."""


class OutOfRangeError(ModelDomainError):
    """A requested rate, threshold or power lies outside the computed curve."""
