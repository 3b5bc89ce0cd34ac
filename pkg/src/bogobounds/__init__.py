"""Interface free energy and two-sided Bogoliubov bounds on finite Hilbert spaces."""

__version__ = "0.1.0"

from .bounds import (
    BoundsReport,
    ObservableFamily,
    PartitionedHamiltonian,
    TrialStateFamily,
    bogoliubov_bounds,
    donsker_varadhan_value,
    gibbs_functional,
    gibbs_minimizer,
    golden_thompson_gap,
    interface_free_energy,
    optimize_lower,
    optimize_upper,
    tilted_free_energies,
    variational_lower,
    variational_upper,
)
from .gibbs import (
    INFINITE,
    DensityMatrix,
    GibbsResult,
    expectation,
    gibbs_state,
    klein_gap,
    log_partition,
    relative_entropy,
    von_neumann_entropy,
)
from .models import ModelSpec, build_model, model_terms
from .operators import (
    HermitianOperator,
    SiteLayout,
    SpectralDecomposition,
    hermitian_eig,
    kron_embed,
    matrix_func,
    trace_product,
)
