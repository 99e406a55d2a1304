"""screenlab: posted-price and bundling revenue analysis under precise
Gaussian seller beliefs, with convergence-rate experiment harnesses."""

from .gauss import (DomainError, GaussianBelief, NumericError, SegmentDecomposition,
                    gauss_hermite, lambda_coeff, make_segments, std_normal_cdf)
from .mechanisms import (MultiGoodEnv, PriceMenu, bundling_revenue, first_best,
                         mixed_bundling_revenue, relaxed_upper_bound,
                         separate_revenue, single_bundle_revenue)
from .onedim import (DiscreteTypeDist, GaussianTypeDist, OneDimEnv,
                     discrete_lp_oracle, optimal_simple_mechanism)
from .signals import (Box, GaussianLocation, LogisticPurchase, SignalDataset,
                      empirical_fisher, fisher, log_density, mle, sample)
from .single_good import (MarginReport, ScalarBelief, TailFamily, elasticity_ratio,
                          gaussian_family, laplace_family, margin_decomposition,
                          optimal_price, revenue_bounds, rule_of_thumb_price,
                          tail_optimal_price)

__all__ = [
    "DomainError", "GaussianBelief", "NumericError", "SegmentDecomposition",
    "gauss_hermite", "lambda_coeff", "make_segments", "std_normal_cdf",
    "MultiGoodEnv", "PriceMenu", "bundling_revenue", "first_best",
    "mixed_bundling_revenue", "relaxed_upper_bound", "separate_revenue",
    "single_bundle_revenue",
    "DiscreteTypeDist", "GaussianTypeDist", "OneDimEnv", "discrete_lp_oracle",
    "optimal_simple_mechanism",
    "Box", "GaussianLocation", "LogisticPurchase", "SignalDataset",
    "empirical_fisher", "fisher", "log_density", "mle", "sample",
    "MarginReport", "ScalarBelief", "TailFamily", "elasticity_ratio",
    "gaussian_family", "laplace_family", "margin_decomposition", "optimal_price",
    "revenue_bounds", "rule_of_thumb_price", "tail_optimal_price",
]

__version__ = "0.1.0"
