"""Generalized exchange-driven growth: truncated rate equations, kernel
audits, moment diagnostics and detailed-balance equilibria."""

from .analysis import (ConvergenceTable, EquilibriumError, EquilibriumSpec, SigmaFunction, audit_sigma,
                       check_moment_bound, detailed_balance_residual, equilibrium_from_mass, lyapunov_rate,
                       lyapunov_v, power_sigma, sigma_inequality_audit, superadditivity_scan,
                       truncation_convergence)
from .fluxes import (FluxBreakdown, TruncatedSystem, balanced_net_rate, flux_breakdown, rhs,
                     rhs_enumeration_oracle, weighted_moment_rate)
from .integrate import IntegrationError, IntegratorConfig, Trajectory, conservation_drift, integrate
from .kernels import (AuditReport, BoundCertificate, KernelDomainError, RateKernel, audit_structure,
                      builtin_kernel, certify_bound, evaluate, load_table_kernel, make_coagfrag_kernel,
                      make_edg_kernel, make_table_kernel)
from .state import ConcentrationState, InitialSpec, Variant, build_initial, moment, sigma_moment

__version__ = "0.1.0"

__all__ = [
    "AuditReport", "BoundCertificate", "ConcentrationState", "ConvergenceTable", "EquilibriumError",
    "EquilibriumSpec", "FluxBreakdown", "InitialSpec", "IntegrationError", "IntegratorConfig",
    "KernelDomainError", "RateKernel", "SigmaFunction", "Trajectory", "TruncatedSystem", "Variant",
    "audit_sigma", "audit_structure", "balanced_net_rate", "build_initial", "builtin_kernel",
    "certify_bound", "check_moment_bound", "conservation_drift", "detailed_balance_residual",
    "equilibrium_from_mass", "evaluate", "flux_breakdown", "integrate", "load_table_kernel",
    "lyapunov_rate", "lyapunov_v", "make_coagfrag_kernel", "make_edg_kernel", "make_table_kernel",
    "moment", "power_sigma", "rhs", "rhs_enumeration_oracle", "sigma_inequality_audit", "sigma_moment",
    "superadditivity_scan", "truncation_convergence", "weighted_moment_rate",
]
